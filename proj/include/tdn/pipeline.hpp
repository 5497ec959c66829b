#pragma once

#include <string>
#include <vector>

#include "tdn/config.hpp"
#include "tdn/optim.hpp"

namespace tdn::pipeline {

// Orchestration entry points behind the CLI. All outputs land under out_dir.
// Contract violations throw std::invalid_argument (usage), everything else
// std::runtime_error.

void cmd_simulate(const config::ExperimentConfig& cfg, const std::string& out_dir);

void cmd_train(const config::ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& resume_path = "");

void cmd_eval(const config::ExperimentConfig& cfg, const std::string& out_dir,
              const std::string& checkpoint_path);

void cmd_render(const config::ExperimentConfig& cfg, const std::string& out_dir,
                const std::string& checkpoint_path, const std::vector<int>& ids);

void cmd_reconstruct(const config::ExperimentConfig& cfg, const std::string& out_dir,
                     const std::string& checkpoint_path, const std::string& input_path);

// Checkpoint helpers (shared with tests).
void save_checkpoint(const std::string& path, net::TDNet& model, optim::RAdam& opt,
                     optim::PlateauScheduler& sched, int next_epoch, double best_val);
struct CheckpointState {
    int next_epoch = 0;
    double best_val = 0;
};
CheckpointState load_checkpoint(const std::string& path, net::TDNet& model, optim::RAdam* opt,
                                optim::PlateauScheduler* sched);
void load_model_weights(const std::string& path, net::TDNet& model);

}  // namespace tdn::pipeline
