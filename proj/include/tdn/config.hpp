#pragma once

#include <string>

#include "tdn/data.hpp"
#include "tdn/loss.hpp"
#include "tdn/net.hpp"

namespace tdn::config {

// Line-oriented `section.key = value` experiment configuration. Blank lines
// and lines starting with '#' are ignored; unknown or duplicate keys are
// hard errors with line numbers.
struct ExperimentConfig {
    data::DatasetSpec dataset;
    net::TDNetConfig model;
    loss::LossWeights weights;
    double lr = 1e-4;
    double weight_decay = 0.01;
    int epochs = 30;
    int patience = 5;
    double factor = 0.5;
    double min_lr = 1e-6;
    uint64_t seed = 0;
    std::string dataset_dir;  // exp.dataset

    void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name);
ExperimentConfig load_config(const std::string& path);

// The default configuration serialized in config syntax.
std::string default_config_text();

}  // namespace tdn::config
