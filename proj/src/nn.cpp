#include "tdn/nn.hpp"

namespace tdn::nn {

using ag::Tensor;

std::vector<double> tn_init(Rng& rng, size_t count, double sigma) {
    std::vector<double> v(count);
    for (auto& x : v) x = rng.truncated_normal(sigma);
    return v;
}

Linear::Linear(ParamStore& ps, const std::string& prefix, Rng& rng, int in, int out,
               bool zero_init) {
    auto wv = zero_init ? std::vector<double>(static_cast<size_t>(in) * out, 0.0)
                        : tn_init(rng, static_cast<size_t>(in) * out);
    w = ps.add(prefix + ".w", {in, out}, std::move(wv));
    b = ps.add(prefix + ".b", {out}, std::vector<double>(out, 0.0));
}

Conv2d::Conv2d(ParamStore& ps, const std::string& prefix, Rng& rng, int ci, int co, int k,
               bool zero_init) {
    const size_t n = static_cast<size_t>(co) * ci * k * k;
    auto wv = zero_init ? std::vector<double>(n, 0.0) : tn_init(rng, n);
    w = ps.add(prefix + ".w", {co, ci, k, k}, std::move(wv));
    b = ps.add(prefix + ".b", {co}, std::vector<double>(co, 0.0));
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& prefix, int dim) {
    g = ps.add(prefix + ".g", {dim}, std::vector<double>(dim, 1.0));
    b = ps.add(prefix + ".b", {dim}, std::vector<double>(dim, 0.0));
}

ag::Tensor map_to_tokens(const Tensor& x) {
    const auto& s = x.shape();
    check(s.size() == 3, "map_to_tokens: expected [C,H,W]");
    return ag::permute(ag::reshape(x, {s[0], s[1] * s[2]}), {1, 0});
}

ag::Tensor tokens_to_map(const Tensor& t, int c, int h, int w) {
    return ag::reshape(ag::permute(t, {1, 0}), {c, h, w});
}

SwinLayer::SwinLayer(ParamStore& ps, const std::string& prefix, Rng& rng, int channels_,
                     int heads_, int window_, bool shifted_)
    : ln1(ps, prefix + ".ln1", channels_),
      ln2(ps, prefix + ".ln2", channels_),
      wq(ps, prefix + ".wq", rng, channels_, channels_),
      wk(ps, prefix + ".wk", rng, channels_, channels_),
      wv(ps, prefix + ".wv", rng, channels_, channels_),
      wo(ps, prefix + ".wo", rng, channels_, channels_),
      mlp1(ps, prefix + ".mlp1", rng, channels_, 4 * channels_),
      mlp2(ps, prefix + ".mlp2", rng, 4 * channels_, channels_),
      window(window_),
      heads(heads_),
      channels(channels_),
      shifted(shifted_) {
    check(channels_ % heads_ == 0, "SwinLayer: channels must divide into heads");
}

ag::Tensor SwinLayer::operator()(const Tensor& x) const {
    const auto& s = x.shape();
    check(s.size() == 3 && s[0] == channels, "SwinLayer: expected [C,H,W] with C=" +
                                                 std::to_string(channels) + ", got " +
                                                 shape_str(s));
    const int c = s[0], h = s[1], w = s[2];
    check(h % window == 0 && w % window == 0,
          "SwinLayer: window must divide the padded map, got " + shape_str(s));
    const int dh = c / heads, nt = window * window;
    const int nwin = (h / window) * (w / window);
    const int shift = shifted ? window / 2 : 0;

    // windowed attention branch
    Tensor a = tokens_to_map(ln1(map_to_tokens(x)), c, h, w);
    if (shift) a = ag::roll2d(a, -shift, -shift);
    Tensor wp = ag::reshape(ag::window_partition(a, window), {nwin * nt, c});
    auto split_heads = [&](const Tensor& t) {
        return ag::reshape(ag::permute(ag::reshape(t, {nwin, nt, heads, dh}), {0, 2, 1, 3}),
                           {nwin * heads, nt, dh});
    };
    Tensor att = ag::attention(split_heads(wq(wp)), split_heads(wk(wp)), split_heads(wv(wp)),
                               /*causal=*/false);
    att = ag::reshape(ag::permute(ag::reshape(att, {nwin, heads, nt, dh}), {0, 2, 1, 3}),
                      {nwin * nt, c});
    Tensor merged = ag::window_merge(ag::reshape(wo(att), {nwin, nt, c}), window, c, h, w);
    if (shift) merged = ag::roll2d(merged, shift, shift);
    Tensor y = ag::add(x, merged);

    // MLP branch
    Tensor t2 = ln2(map_to_tokens(y));
    Tensor m = mlp2(ag::gelu(mlp1(t2)));
    return ag::add(y, tokens_to_map(m, c, h, w));
}

SwinStack::SwinStack(ParamStore& ps, const std::string& prefix, Rng& rng, int n, int channels,
                     int heads, int window) {
    for (int i = 0; i < n; ++i)
        layers.emplace_back(ps, prefix + ".l" + std::to_string(i), rng, channels, heads, window,
                            i % 2 == 1);
}

ag::Tensor SwinStack::operator()(const Tensor& x) const {
    Tensor y = x;
    for (const auto& l : layers) y = l(y);
    return y;
}

}  // namespace tdn::nn
