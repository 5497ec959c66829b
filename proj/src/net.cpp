#include "tdn/net.hpp"

#include <cmath>

namespace tdn::net {

using ag::Tensor;

namespace {

int pad_to_multiple(int n, int m) { return (m - n % m) % m; }

}  // namespace

// ------------------------------------------------------------------- SRM ----

SRM::SRM(nn::ParamStore& ps, const std::string& prefix, Rng& rng, const SRMConfig& cfg)
    : cfg_(cfg) {
    cfg.validate();
    conv_in_ = nn::Conv2d(ps, prefix + ".conv_in", rng, 1, cfg.channels, 3);
    for (int i = 0; i < cfg.blocks; ++i) {
        stacks_.emplace_back(ps, prefix + ".b" + std::to_string(i), rng, cfg.layers, cfg.channels,
                             cfg.heads, cfg.window);
        block_convs_.emplace_back(ps, prefix + ".b" + std::to_string(i) + ".conv", rng,
                                  cfg.channels, cfg.channels, 3);
    }
    conv_mid_ = nn::Conv2d(ps, prefix + ".conv_mid", rng, cfg.channels, cfg.channels, 3);
    conv_out_ = nn::Conv2d(ps, prefix + ".conv_out", rng, cfg.channels, 1, 3,
                           /*zero_init=*/true);
}

ag::Tensor SRM::forward(const Tensor& s) const {
    const auto& sh = s.shape();
    check(sh.size() == 2, "SRM: expected [N,M] sinogram, got " + shape_str(sh));
    const int n = sh[0], m = sh[1];
    const int pb = pad_to_multiple(n, cfg_.window), pr = pad_to_multiple(m, cfg_.window);
    check(pb < n && pr < m,
          "SRM: sinogram " + shape_str(sh) + " too small for window " +
              std::to_string(cfg_.window));
    Tensor x = ag::reshape(s, {1, n, m});
    if (pb || pr) x = ag::pad_reflect2d(x, pb, pr);
    Tensor f0 = conv_in_(x);
    Tensor f = f0;
    for (size_t i = 0; i < stacks_.size(); ++i)
        f = ag::add(block_convs_[i](stacks_[i](f)), f);
    Tensor out = conv_out_(ag::add(conv_mid_(f), f0));
    if (pb || pr) out = ag::crop2d(out, n, m);
    return ag::add(s, ag::reshape(out, {n, m}));
}

// ------------------------------------------------------------------- FSM ----

FSM::FSM(nn::ParamStore& ps, const std::string& prefix, Rng& rng, const FSMConfig& cfg)
    : cfg_(cfg) {
    cfg.validate();
    const int f = cfg.embed;
    input_ = nn::Linear(ps, prefix + ".input", rng, f, f);
    pool_proj_ = nn::Linear(ps, prefix + ".pool", rng, f, f);
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string lp = prefix + ".l" + std::to_string(i);
        layers_.push_back({nn::LayerNorm(ps, lp + ".ln1", f), nn::LayerNorm(ps, lp + ".ln2", f),
                           nn::Linear(ps, lp + ".wq", rng, f, f),
                           nn::Linear(ps, lp + ".wk", rng, f, f),
                           nn::Linear(ps, lp + ".wv", rng, f, f),
                           nn::Linear(ps, lp + ".wo", rng, f, f),
                           nn::Linear(ps, lp + ".mlp1", rng, f, 4 * f),
                           nn::Linear(ps, lp + ".mlp2", rng, 4 * f, f)});
    }
    ln_f_ = nn::LayerNorm(ps, prefix + ".ln_f", f);
    amp_head_ = nn::Linear(ps, prefix + ".amp", rng, f, 1);
    phase_head_ = nn::Linear(ps, prefix + ".phase", rng, f, 2);
}

FSM::Out FSM::forward(const Sinogram& s, const Image& i1) const {
    const int h = i1.h(), w = i1.w(), f = cfg_.embed;
    const auto& plan = HalfSpectrumPlan::get(h, w);
    const int length = plan.length;
    check(cfg_.cond <= length, "FSM: conditioning length " + std::to_string(cfg_.cond) +
                                   " exceeds half-spectrum length " + std::to_string(length));

    // frequency-domain encodings of both inputs (constants in the graph)
    const auto seq_img = unroll_half_spectrum(dft2(i1.data), h, w);
    Tensor e_img = Tensor::from_mat(encode_fde(seq_img, f));
    const auto seq_sino = unroll_half_spectrum(dft2(s.data), s.views(), s.detectors());
    Tensor e_sino = Tensor::from_mat(encode_fde(seq_sino, f));

    Tensor tokens = input_(e_img);  // [L, F]
    // pooled sinogram embedding conditions the low-frequency prefix
    if (cfg_.cond > 0) {
        Tensor pooled = pool_proj_(ag::reshape(ag::mean_axis(e_sino, 0), {1, f}));
        Tensor prefix = ag::add(ag::slice(tokens, 0, 0, cfg_.cond), pooled);
        tokens = cfg_.cond == length
                     ? prefix
                     : ag::concat({prefix, ag::slice(tokens, 0, cfg_.cond, length)}, 0);
    }

    auto dec = decode(tokens);
    Out out;
    // the decoder refines the baseline spectrum of i1: the softplus head is a
    // multiplicative amplitude ratio (1 at init), the atan2 head a phase
    // rotation (0 at init), so the branch starts at i3 ~ i1 and learns
    // corrections
    Tensor base_amp = Tensor::from({length}, seq_img.amp);
    Tensor base_phase = Tensor::from({length}, seq_img.phase);
    constexpr double inv_softplus0 = 1.4426950408889634;  // 1/softplus(0)
    out.amp = ag::mul(base_amp, ag::affine(dec.amp, inv_softplus0, 0.0));
    Tensor rotated = ag::add(base_phase, dec.phase);
    out.phase = ag::atan2_t(ag::sin_t(rotated), ag::cos_t(rotated));  // wrap to (-pi, pi]
    Tensor re = ag::mul(out.amp, ag::cos_t(out.phase));
    Tensor im = ag::mul(out.amp, ag::sin_t(out.phase));
    out.image = ag::fourier_synth(re, im, plan);
    out.seq.src_h = h;
    out.seq.src_w = w;
    out.seq.amp = out.amp.val();
    out.seq.phase = out.phase.val();
    return out;
}

FSM::Decoded FSM::decode(const Tensor& tokens) const {
    const auto& sh = tokens.shape();
    check(sh.size() == 2 && sh[1] == cfg_.embed,
          "FSM::decode: expected [L, " + std::to_string(cfg_.embed) + "], got " + shape_str(sh));
    const int length = sh[0], f = cfg_.embed;
    const int heads = cfg_.heads, dh = f / heads;
    auto split = [&](const Tensor& t) {
        return ag::permute(ag::reshape(t, {length, heads, dh}), {1, 0, 2});
    };
    Tensor x = tokens;
    for (const auto& l : layers_) {
        Tensor a = l.ln1(x);
        Tensor att = ag::attention(split(l.wq(a)), split(l.wk(a)), split(l.wv(a)),
                                   /*causal=*/true);
        att = ag::reshape(ag::permute(att, {1, 0, 2}), {length, f});
        x = ag::add(x, l.wo(att));
        x = ag::add(x, l.mlp2(ag::gelu(l.mlp1(l.ln2(x)))));
    }
    x = ln_f_(x);
    Decoded out;
    out.amp = ag::softplus(ag::reshape(amp_head_(x), {length}));
    Tensor uv = phase_head_(x);  // [L, 2]
    Tensor u = ag::reshape(ag::slice(uv, 1, 0, 1), {length});
    Tensor v = ag::reshape(ag::slice(uv, 1, 1, 2), {length});
    // the unit offset on the cos component biases the head towards phase 0
    out.phase = ag::atan2_t(u, ag::affine(v, 1.0, 1.0));
    return out;
}

// ------------------------------------------------------------------- IRM ----

IRM::IRM(nn::ParamStore& ps, const std::string& prefix, Rng& rng, const IRMConfig& cfg,
         int window, int heads)
    : cfg_(cfg), window_(window), heads_(heads) {
    cfg.validate();
    const int c = cfg.channels;
    conv_a_ = nn::Conv2d(ps, prefix + ".conv_a", rng, 2, c, 3);
    swin_ = nn::SwinStack(ps, prefix + ".swin", rng, 2, c, heads, window);
    conv_b1_ = nn::Conv2d(ps, prefix + ".conv_b1", rng, 1, c, 3);
    conv_b2_ = nn::Conv2d(ps, prefix + ".conv_b2", rng, c, c, 3);
    conv_fuse_ = nn::Conv2d(ps, prefix + ".conv_fuse", rng, 2 * c, c, 3);
    se_fc1_ = nn::Linear(ps, prefix + ".se1", rng, c, c / cfg.reduction);
    se_fc2_ = nn::Linear(ps, prefix + ".se2", rng, c / cfg.reduction, c);
    for (int i = 0; i < cfg.blocks; ++i) {
        const std::string rp = prefix + ".res" + std::to_string(i);
        res_blocks_.emplace_back(nn::Conv2d(ps, rp + ".c1", rng, c, c, 3),
                                 nn::Conv2d(ps, rp + ".c2", rng, c, c, 3));
    }
    proj_ = nn::Conv2d(ps, prefix + ".proj", rng, c, 1, 3, /*zero_init=*/true);
}

ag::Tensor IRM::forward(const Tensor& i1, const Tensor& i2, const Tensor& i3) const {
    const auto& sh = i1.shape();
    check(sh.size() == 2 && i2.shape() == sh && i3.shape() == sh,
          "IRM: inputs must share [H,W]; got " + shape_str(sh) + ", " + shape_str(i2.shape()) +
              ", " + shape_str(i3.shape()));
    const int h = sh[0], w = sh[1], c = cfg_.channels;
    const int pb = pad_to_multiple(h, window_), pr = pad_to_multiple(w, window_);
    check(pb < h && pr < w, "IRM: image too small for window");
    auto as_map = [&](const Tensor& t) {
        Tensor m = ag::reshape(t, {1, h, w});
        return (pb || pr) ? ag::pad_reflect2d(m, pb, pr) : m;
    };
    // swin features over the two physics-consistent images
    Tensor xa = swin_(conv_a_(ag::concat({as_map(i1), as_map(i2)}, 0)));
    // conv features over the frequency-branch image
    Tensor xb = conv_b2_(ag::gelu(conv_b1_(as_map(i3))));
    Tensor fused = conv_fuse_(ag::concat({xa, xb}, 0));

    // squeeze-style channel attention
    const int hp = h + pb, wp = w + pr;
    Tensor squeeze = ag::reshape(ag::mean_axis(ag::reshape(fused, {c, hp * wp}), 1), {1, c});
    Tensor gate = ag::sigmoid(se_fc2_(ag::relu(se_fc1_(squeeze))));
    fused = ag::mul(fused, ag::reshape(gate, {c, 1, 1}));

    for (const auto& [c1, c2] : res_blocks_) fused = ag::add(fused, c2(ag::gelu(c1(fused))));

    Tensor corr = proj_(fused);
    if (pb || pr) corr = ag::crop2d(corr, h, w);
    return ag::add(i1, ag::reshape(corr, {h, w}));
}

// ----------------------------------------------------------------- TDNet ----

TDNet::TDNet(const TDNetConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    Rng rng(Rng::derive(init_seed, 0x74646e6574ULL));
    srm_ = std::make_unique<SRM>(params_, "srm", rng, cfg.srm);
    fsm_ = std::make_unique<FSM>(params_, "fsm", rng, cfg.fsm);
    irm_ = std::make_unique<IRM>(params_, "irm", rng, cfg.irm, cfg.srm.window, cfg.srm.heads);
}

TDNet::Forward TDNet::forward(const Sinogram& s, const Geometry& geom) const {
    geom.validate();
    check(s.views() == geom.num_views && s.detectors() == geom.num_detectors,
          "TDNet: sinogram " + shape_str({s.views(), s.detectors()}) +
              " does not match geometry " + shape_str({geom.num_views, geom.num_detectors}));
    Forward f;
    f.i1 = fbp(s, geom);
    Tensor st = Tensor::from_mat(s.data);
    f.s_hat = srm_->forward(st);
    f.i2 = ag::fbp_layer(f.s_hat, geom);
    auto fsm_out = fsm_->forward(s, f.i1);
    f.i3 = fsm_out.image;
    f.fsm_amp = fsm_out.amp;
    f.fsm_phase = fsm_out.phase;
    f.fsm_seq = std::move(fsm_out.seq);
    f.i_hat = irm_->forward(Tensor::from_mat(f.i1.data), f.i2, f.i3);
    return f;
}

}  // namespace tdn::net
