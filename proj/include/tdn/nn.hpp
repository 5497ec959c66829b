#pragma once

#include <string>
#include <vector>

#include "tdn/autograd.hpp"
#include "tdn/rng.hpp"

namespace tdn::nn {

// Ordered parameter registry; the registration order defines the checkpoint
// manifest order.
struct ParamStore {
    std::vector<std::pair<std::string, ag::Tensor>> items;

    ag::Tensor add(const std::string& name, std::vector<int> shape, std::vector<double> init) {
        for (const auto& [n, t] : items) check(n != name, "duplicate parameter name: " + name);
        ag::Tensor t = ag::Tensor::from(std::move(shape), std::move(init), true);
        items.emplace_back(name, t);
        return t;
    }

    ag::Tensor* find(const std::string& name) {
        for (auto& [n, t] : items)
            if (n == name) return &t;
        return nullptr;
    }

    void zero_grad() {
        for (auto& [n, t] : items) t.zero_grad();
    }
};

// Truncated-normal weight init (sigma 0.02, clipped at 2 sigma).
std::vector<double> tn_init(Rng& rng, size_t count, double sigma = 0.02);

struct Linear {
    ag::Tensor w, b;  // w [in, out], b [out]

    Linear() = default;
    Linear(ParamStore& ps, const std::string& prefix, Rng& rng, int in, int out,
           bool zero_init = false);
    // x [T, in] -> [T, out]
    ag::Tensor operator()(const ag::Tensor& x) const { return ag::add(ag::matmul(x, w), b); }
};

struct Conv2d {
    ag::Tensor w, b;  // w [co, ci, k, k], b [co]

    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& prefix, Rng& rng, int ci, int co, int k,
           bool zero_init = false);
    ag::Tensor operator()(const ag::Tensor& x) const { return ag::conv2d(x, w, b); }
};

struct LayerNorm {
    ag::Tensor g, b;

    LayerNorm() = default;
    LayerNorm(ParamStore& ps, const std::string& prefix, int dim);
    ag::Tensor operator()(const ag::Tensor& x) const { return ag::layernorm(x, g, b); }
};

// Pre-LN transformer layer with windowed multi-head attention on a [C, H, W]
// feature map. Odd layers in a stack use a cyclic half-window shift.
struct SwinLayer {
    LayerNorm ln1, ln2;
    Linear wq, wk, wv, wo, mlp1, mlp2;
    int window = 4, heads = 4, channels = 32;
    bool shifted = false;

    SwinLayer() = default;
    SwinLayer(ParamStore& ps, const std::string& prefix, Rng& rng, int channels, int heads,
              int window, bool shifted);
    ag::Tensor operator()(const ag::Tensor& x) const;  // [C,H,W] -> [C,H,W]
};

// n successive swin layers with alternating shifts.
struct SwinStack {
    std::vector<SwinLayer> layers;

    SwinStack() = default;
    SwinStack(ParamStore& ps, const std::string& prefix, Rng& rng, int n, int channels, int heads,
              int window);
    ag::Tensor operator()(const ag::Tensor& x) const;
};

// [HW, C] tokens <-> [C, H, W] maps
ag::Tensor map_to_tokens(const ag::Tensor& x);
ag::Tensor tokens_to_map(const ag::Tensor& t, int c, int h, int w);

}  // namespace tdn::nn
