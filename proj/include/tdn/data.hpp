#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdn/tomo.hpp"

namespace tdn::data {

struct DatasetSpec {
    int train = 200, val = 40, test = 100;
    int image_h = 64, image_w = 64;
    std::vector<int> views{21, 33, 45};
    double noise_level = 0.05;  // sigma as a fraction of mean |S_gt|
    int upscale = 2;            // inverse-crime simulation factor
    double detector_spacing = 1.0;
    uint64_t seed = 0;

    void validate() const {
        check(train > 0 && val > 0 && test > 0, "DatasetSpec: counts must be positive");
        check(image_h >= 16 && image_w >= 16, "DatasetSpec: image size must be >= 16");
        check(!views.empty(), "DatasetSpec: views list is empty");
        for (int p : views) check(p >= 2, "DatasetSpec: view counts must be >= 2");
        check(noise_level >= 0, "DatasetSpec: noise level must be >= 0");
        check(upscale >= 2, "DatasetSpec: upscale factor must be >= 2");
        check(detector_spacing > 0, "DatasetSpec: detector spacing must be positive");
    }
};

struct SimPair {
    Sinogram s;     // noisy measurement
    Sinogram s_gt;  // clean, simulated at high resolution (inverse-crime gap)
    Image i_gt;     // the original phantom
};

// Bilinear upscale by `factor` (align-corners=false convention).
Image upscale_bilinear(const Image& img, int factor);

// Projects the phantom at `upscale`x resolution, box-downsamples the detector
// row back to geom, then adds seeded Gaussian noise with
// sigma = noise_level * mean(|S_gt|).
SimPair simulate_pair(const Image& phantom, const Geometry& geom, double noise_level, int upscale,
                      uint64_t noise_seed);

struct ManifestEntry {
    int id = 0;
    std::string split;  // train | val | test
    int views = 0;
    std::string igt_path, s_path, sgt_path, sdirect_path;
    uint64_t seed = 0;
};

// Writes phantoms + per-view-count sinogram tensors and a tab-separated
// manifest under out_dir. Deterministic in spec.seed.
void build_dataset(const DatasetSpec& spec, const std::string& out_dir);

std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace tdn::data
