#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdn/nn.hpp"
#include "tdn/spectral.hpp"
#include "tdn/tomo.hpp"

namespace tdn::net {

struct SRMConfig {
    int blocks = 2;    // residual blocks
    int layers = 2;    // swin layers per block
    int window = 4;
    int channels = 32;
    int heads = 4;

    void validate() const {
        check(blocks >= 1 && layers >= 1 && window >= 1 && channels >= 1 && heads >= 1,
              "SRMConfig: all fields must be positive");
        check(channels % heads == 0, "SRMConfig: channels must be divisible by heads");
    }
};

struct FSMConfig {
    int embed = 64;   // FDE width F
    int layers = 4;   // decoder depth
    int heads = 4;
    int cond = 64;    // low-frequency conditioning length

    void validate() const {
        check(embed >= 8 && embed % 2 == 0, "FSMConfig: embed width must be even and >= 8");
        check(layers >= 1 && heads >= 1 && cond >= 0, "FSMConfig: bad field");
        check(embed % heads == 0, "FSMConfig: embed must be divisible by heads");
    }
};

struct IRMConfig {
    int channels = 32;   // fused feature width
    int blocks = 2;      // residual conv blocks
    int reduction = 8;   // channel-attention squeeze ratio

    void validate() const {
        check(channels >= 1 && blocks >= 1 && reduction >= 1, "IRMConfig: all fields positive");
        check(channels % reduction == 0, "IRMConfig: reduction must divide channels");
    }
};

struct TDNetConfig {
    SRMConfig srm;
    FSMConfig fsm;
    IRMConfig irm;
};

// Sinogram restoration: residual swin blocks with a global residual onto the
// input, so a zero-initialized output conv starts as the identity.
class SRM {
public:
    SRM(nn::ParamStore& ps, const std::string& prefix, Rng& rng, const SRMConfig& cfg);
    ag::Tensor forward(const ag::Tensor& s) const;  // [N,M] -> [N,M]

private:
    SRMConfig cfg_;
    nn::Conv2d conv_in_, conv_mid_, conv_out_;
    std::vector<nn::SwinStack> stacks_;
    std::vector<nn::Conv2d> block_convs_;
};

// Frequency supervision: encodes the FBP image's half spectrum, conditions a
// causal decoder on its low-frequency prefix plus a pooled sinogram encoding,
// and emits (amplitude, phase) for every half-spectrum position.
class FSM {
public:
    FSM(nn::ParamStore& ps, const std::string& prefix, Rng& rng, const FSMConfig& cfg);

    struct Out {
        ag::Tensor amp;    // [L], raw scale, >= 0 (softplus head)
        ag::Tensor phase;  // [L], in (-pi, pi] (atan2 head)
        ag::Tensor image;  // [H,W] synthesized from the predicted spectrum
        FourierSequence seq;
    };
    Out forward(const Sinogram& s, const Image& i1) const;

    struct Decoded {
        ag::Tensor amp, phase;  // both [L]
    };
    // Causal decoder + heads over a prepared token sequence [L, F]. Prediction
    // at position i depends only on tokens 0..i.
    Decoded decode(const ag::Tensor& tokens) const;

private:
    FSMConfig cfg_;
    nn::Linear input_, pool_proj_;
    struct Layer {
        nn::LayerNorm ln1, ln2;
        nn::Linear wq, wk, wv, wo, mlp1, mlp2;
    };
    std::vector<Layer> layers_;
    nn::LayerNorm ln_f_;
    nn::Linear amp_head_, phase_head_;
};

// Image reconstruction: swin features over concat(I1, I2), conv features over
// I3, channel-attention fusion, residual conv blocks, zero-initialized
// projection with a global residual from I1.
class IRM {
public:
    IRM(nn::ParamStore& ps, const std::string& prefix, Rng& rng, const IRMConfig& cfg, int window,
        int heads);
    ag::Tensor forward(const ag::Tensor& i1, const ag::Tensor& i2, const ag::Tensor& i3) const;

private:
    IRMConfig cfg_;
    int window_, heads_;
    nn::Conv2d conv_a_, conv_b1_, conv_b2_, conv_fuse_, proj_;
    nn::SwinStack swin_;
    nn::Linear se_fc1_, se_fc2_;
    std::vector<std::pair<nn::Conv2d, nn::Conv2d>> res_blocks_;
};

// The assembled tri-domain model.
class TDNet {
public:
    TDNet(const TDNetConfig& cfg, uint64_t init_seed);

    struct Forward {
        Image i1;            // FBP reconstruction of the input sinogram
        ag::Tensor s_hat;    // restored sinogram
        ag::Tensor i2;       // consistency-layer image of s_hat
        ag::Tensor i3;       // frequency-branch image
        ag::Tensor i_hat;    // final reconstruction
        ag::Tensor fsm_amp, fsm_phase;
        FourierSequence fsm_seq;
    };
    Forward forward(const Sinogram& s, const Geometry& geom) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const TDNetConfig& config() const { return cfg_; }

private:
    TDNetConfig cfg_;
    nn::ParamStore params_;
    std::unique_ptr<SRM> srm_;
    std::unique_ptr<FSM> fsm_;
    std::unique_ptr<IRM> irm_;
};

}  // namespace tdn::net
