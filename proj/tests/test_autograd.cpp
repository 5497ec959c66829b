#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "tdn/autograd.hpp"
#include "tdn/rng.hpp"
#include "tdn/spectral.hpp"
#include "tdn/tomo.hpp"

using namespace tdn;
using namespace tdn::ag;
using fdtest::fd_check;
using fdtest::FdOpts;

TEST_CASE("d(x*x)/dx at x=3 is 6") {
    Tensor x = Tensor::from({1}, {3.0}, true);
    Tensor y = mul(x, x);
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("gradient accumulates additively when a tensor is reused") {
    Tensor x = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    Tensor y = sum_all(add(x, x));
    y.backward();
    for (double g : x.grad()) CHECK(g == doctest::Approx(2.0));
}

TEST_CASE("shape mismatches report both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    CHECK_THROWS_WITH_AS(mse(a, b), doctest::Contains("[2, 3]"), std::invalid_argument);
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
    CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}

TEST_CASE("elementwise ops match finite differences") {
    auto sum_of = [](Tensor t) { return mean_all(t); };
    fd_check({{3, 4}, {3, 4}}, [&](const auto& in) { return mean_all(add(in[0], in[1])); }, 1);
    fd_check({{3, 4}, {3, 4}}, [&](const auto& in) { return mean_all(sub(in[0], in[1])); }, 2);
    fd_check({{3, 4}, {3, 4}}, [&](const auto& in) { return mean_all(mul(in[0], in[1])); }, 3);
    FdOpts away_from_zero{.lo = 0.5, .hi = 1.5};
    fd_check({{3, 4}, {3, 4}}, [&](const auto& in) { return mean_all(div(in[0], in[1])); }, 4,
             away_from_zero);
    fd_check({{6}}, [&](const auto& in) { return mean_all(affine(in[0], 2.5, -1.0)); }, 5);
    fd_check({{6}}, [&](const auto& in) { return mean_all(neg(in[0])); }, 6);
    (void)sum_of;
}

TEST_CASE("broadcasting add/mul match finite differences and reduce grads") {
    fd_check({{2, 3, 4}, {4}}, [](const auto& in) { return mean_all(add(in[0], in[1])); }, 7);
    fd_check({{2, 3, 4}, {3, 1}}, [](const auto& in) { return mean_all(mul(in[0], in[1])); }, 8);
    fd_check({{5, 1, 1}, {5, 2, 3}}, [](const auto& in) { return mean_all(mul(in[0], in[1])); }, 9);
    // scalar broadcast
    fd_check({{1}, {2, 2}}, [](const auto& in) { return sum_all(mul(in[0], in[1])); }, 10);
}

TEST_CASE("unary ops match finite differences") {
    FdOpts pos{.lo = 0.2, .hi = 2.0};
    FdOpts wide{.lo = -2.0, .hi = 2.0};
    FdOpts off_kink{.lo = 0.1, .hi = 1.0};
    fd_check({{8}}, [](const auto& in) { return mean_all(gelu(in[0])); }, 11, wide);
    fd_check({{8}}, [](const auto& in) { return mean_all(sigmoid(in[0])); }, 12, wide);
    fd_check({{8}}, [](const auto& in) { return mean_all(softplus(in[0])); }, 13, wide);
    fd_check({{8}}, [](const auto& in) { return mean_all(sqrt_t(in[0])); }, 14, pos);
    fd_check({{8}}, [](const auto& in) { return mean_all(cos_t(in[0])); }, 15, wide);
    fd_check({{8}}, [](const auto& in) { return mean_all(sin_t(in[0])); }, 16, wide);
    fd_check({{8}}, [](const auto& in) { return mean_all(log1p_t(in[0])); }, 17, pos);
    // relu away from the kink: positive and negative inputs separately
    fd_check({{6}}, [](const auto& in) { return mean_all(relu(in[0])); }, 18, off_kink);
    FdOpts neg_side{.lo = -1.0, .hi = -0.1};
    fd_check({{6}}, [](const auto& in) { return mean_all(relu(in[0])); }, 19, neg_side);
    FdOpts q1{.lo = 0.3, .hi = 1.5};
    fd_check({{6}, {6}}, [](const auto& in) { return mean_all(atan2_t(in[0], in[1])); }, 20, q1);
}

TEST_CASE("atan2 stays in (-pi, pi] and matches std::atan2") {
    Tensor y = Tensor::from({4}, {0.0, 1.0, -1.0, -0.3});
    Tensor x = Tensor::from({4}, {1.0, -1.0, -1.0, 0.2});
    Tensor a = atan2_t(y, x);
    for (int i = 0; i < 4; ++i)
        CHECK(a.val()[i] == doctest::Approx(std::atan2(y.val()[i], x.val()[i])));
}

TEST_CASE("matmul 2D and batched match finite differences and a scalar loop") {
    fd_check({{3, 4}, {4, 2}}, [](const auto& in) { return mean_all(matmul(in[0], in[1])); }, 21);
    fd_check({{2, 3, 4}, {2, 4, 2}},
             [](const auto& in) { return mean_all(matmul(in[0], in[1])); }, 22);
    // forward vs naive loop
    Rng rng(23);
    std::vector<double> av(12), bv(8);
    for (auto& x : av) x = rng.uniform(-1, 1);
    for (auto& x : bv) x = rng.uniform(-1, 1);
    Tensor a = Tensor::from({3, 4}, av), b = Tensor::from({4, 2}, bv);
    Tensor c = matmul(a, b);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += av[4 * i + k] * bv[2 * k + j];
            CHECK(c.val()[2 * i + j] == doctest::Approx(s).epsilon(1e-9));
        }
}

TEST_CASE("conv2d with a 1x1 identity kernel is the identity map") {
    Rng rng(24);
    std::vector<double> xv(2 * 5 * 6);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    Tensor x = Tensor::from({2, 5, 6}, xv, true);
    // w[co][ci][1][1] = identity over 2 channels
    Tensor w = Tensor::from({2, 2, 1, 1}, {1, 0, 0, 1});
    Tensor b = Tensor::zeros({2});
    Tensor y = conv2d(x, w, b);
    CHECK(y.val() == xv);
    sum_all(y).backward();
    for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("conv2d matches finite differences") {
    fd_check({{2, 4, 5}, {3, 2, 3, 3}, {3}},
             [](const auto& in) { return mean_all(conv2d(in[0], in[1], in[2])); }, 25);
    fd_check({{1, 6, 6}, {2, 1, 1, 1}, {2}},
             [](const auto& in) { return mean_all(conv2d(in[0], in[1], in[2])); }, 26);
}

TEST_CASE("conv2d forward matches a scalar reference on same-padding") {
    Rng rng(27);
    const int ci = 2, h = 4, w = 4, co = 2, k = 3;
    std::vector<double> xv(ci * h * w), wv(co * ci * k * k), bv(co);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    for (auto& v : wv) v = rng.uniform(-1, 1);
    for (auto& v : bv) v = rng.uniform(-1, 1);
    Tensor y = conv2d(Tensor::from({ci, h, w}, xv), Tensor::from({co, ci, k, k}, wv),
                      Tensor::from({co}, bv));
    for (int c = 0; c < co; ++c)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                double s = bv[c];
                for (int cc = 0; cc < ci; ++cc)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            int sy = yy + ky - 1, sx = xx + kx - 1;
                            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                            s += wv[((c * ci + cc) * k + ky) * k + kx] * xv[(cc * h + sy) * w + sx];
                        }
                CHECK(y.val()[(c * h + yy) * w + xx] == doctest::Approx(s).epsilon(1e-9));
            }
}

TEST_CASE("layernorm and softmax match finite differences") {
    fd_check({{3, 6}, {6}, {6}},
             [](const auto& in) { return mean_all(layernorm(in[0], in[1], in[2])); }, 28);
    fd_check({{2, 5}}, [](const auto& in) { return mean_all(softmax_lastdim(in[0])); }, 29);
    fd_check({{2, 5}}, [](const auto& in) {
        return mean_all(mul(softmax_lastdim(in[0]), in[0]));
    }, 30);
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(31);
    std::vector<double> xv(12);
    for (auto& v : xv) v = rng.uniform(-3, 3);
    Tensor y = softmax_lastdim(Tensor::from({3, 4}, xv));
    for (int r = 0; r < 3; ++r) {
        double s = 0;
        for (int c = 0; c < 4; ++c) s += y.val()[4 * r + c];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

namespace {

// Composite reference built from engine primitives: softmax(q k^T / sqrt(d)
// + mask) v with an additive -1e30 mask for causal.
Tensor attention_reference(const Tensor& q, const Tensor& k, const Tensor& v, bool causal) {
    const int b = q.shape()[0], t = q.shape()[1], d = q.shape()[2];
    Tensor kt = permute(k, {0, 2, 1});
    Tensor logits = affine(matmul(q, kt), 1.0 / std::sqrt(static_cast<double>(d)), 0.0);
    if (causal) {
        std::vector<double> maskv(static_cast<size_t>(b) * t * t, 0.0);
        for (int bb = 0; bb < b; ++bb)
            for (int i = 0; i < t; ++i)
                for (int j = i + 1; j < t; ++j)
                    maskv[(static_cast<size_t>(bb) * t + i) * t + j] = -1e30;
        logits = add(logits, Tensor::from({b, t, t}, maskv));
    }
    return matmul(softmax_lastdim(logits), v);
}

}  // namespace

TEST_CASE("fused attention matches the composite reference") {
    Rng rng(32);
    for (bool causal : {false, true}) {
        const int b = 2, t = 9, d = 5;
        std::vector<double> qv(b * t * d), kv(b * t * d), vv(b * t * d);
        for (auto& x : qv) x = rng.uniform(-1, 1);
        for (auto& x : kv) x = rng.uniform(-1, 1);
        for (auto& x : vv) x = rng.uniform(-1, 1);
        Tensor q = Tensor::from({b, t, d}, qv, true);
        Tensor k = Tensor::from({b, t, d}, kv, true);
        Tensor v = Tensor::from({b, t, d}, vv, true);
        Tensor fused = attention(q, k, v, causal);
        Tensor q2 = Tensor::from({b, t, d}, qv, true);
        Tensor k2 = Tensor::from({b, t, d}, kv, true);
        Tensor v2 = Tensor::from({b, t, d}, vv, true);
        Tensor ref = attention_reference(q2, k2, v2, causal);
        for (size_t i = 0; i < fused.val().size(); ++i)
            CHECK(fused.val()[i] == doctest::Approx(ref.val()[i]).epsilon(1e-9));
        // gradients agree too
        mean_all(fused).backward();
        mean_all(ref).backward();
        for (size_t i = 0; i < q.grad().size(); ++i) {
            CHECK(q.grad()[i] == doctest::Approx(q2.grad()[i]).epsilon(1e-7));
            CHECK(k.grad()[i] == doctest::Approx(k2.grad()[i]).epsilon(1e-7));
            CHECK(v.grad()[i] == doctest::Approx(v2.grad()[i]).epsilon(1e-7));
        }
    }
}

TEST_CASE("attention spans multiple tiles correctly") {
    // t > the internal tile size exercises the streaming-softmax path
    Rng rng(33);
    const int b = 1, t = 150, d = 4;
    std::vector<double> qv(b * t * d), kv(b * t * d), vv(b * t * d);
    for (auto& x : qv) x = rng.uniform(-1, 1);
    for (auto& x : kv) x = rng.uniform(-1, 1);
    for (auto& x : vv) x = rng.uniform(-1, 1);
    for (bool causal : {false, true}) {
        Tensor fused = attention(Tensor::from({b, t, d}, qv), Tensor::from({b, t, d}, kv),
                                 Tensor::from({b, t, d}, vv), causal);
        Tensor ref = attention_reference(Tensor::from({b, t, d}, qv), Tensor::from({b, t, d}, kv),
                                         Tensor::from({b, t, d}, vv), causal);
        for (size_t i = 0; i < fused.val().size(); ++i)
            CHECK(fused.val()[i] == doctest::Approx(ref.val()[i]).epsilon(1e-9));
    }
}

TEST_CASE("attention over a single position returns v") {
    Tensor q = Tensor::from({1, 1, 3}, {0.3, -0.7, 2.0});
    Tensor k = Tensor::from({1, 1, 3}, {1.0, 1.0, 1.0});
    Tensor v = Tensor::from({1, 1, 3}, {5.0, -4.0, 0.25});
    Tensor o = attention(q, k, v, true);
    CHECK(o.val()[0] == doctest::Approx(5.0));
    CHECK(o.val()[1] == doctest::Approx(-4.0));
    CHECK(o.val()[2] == doctest::Approx(0.25));
}

TEST_CASE("causal mask: gradients at future positions are exactly zero") {
    Rng rng(34);
    const int t = 7, d = 4;
    std::vector<double> qv(t * d), kv(t * d), vv(t * d);
    for (auto& x : qv) x = rng.uniform(-1, 1);
    for (auto& x : kv) x = rng.uniform(-1, 1);
    for (auto& x : vv) x = rng.uniform(-1, 1);
    const int pos = 2;  // differentiate output at this position
    Tensor q = Tensor::from({1, t, d}, qv, true);
    Tensor k = Tensor::from({1, t, d}, kv, true);
    Tensor v = Tensor::from({1, t, d}, vv, true);
    Tensor out = attention(q, k, v, true);
    sum_all(slice(out, 1, pos, pos + 1)).backward();
    for (int j = pos + 1; j < t; ++j)
        for (int c = 0; c < d; ++c) {
            CHECK(k.grad()[static_cast<size_t>(j) * d + c] == 0.0);
            CHECK(v.grad()[static_cast<size_t>(j) * d + c] == 0.0);
        }
    // and position <= pos has some signal
    double mag = 0;
    for (int j = 0; j <= pos; ++j)
        for (int c = 0; c < d; ++c) mag += std::abs(v.grad()[static_cast<size_t>(j) * d + c]);
    CHECK(mag > 0.0);
}

TEST_CASE("attention matches finite differences") {
    for (bool causal : {false, true}) {
        fd_check({{2, 4, 8}, {2, 4, 8}, {2, 4, 8}},
                 [causal](const auto& in) {
                     return mean_all(attention(in[0], in[1], in[2], causal));
                 },
                 causal ? 35 : 36);
    }
}

TEST_CASE("shape ops are index-true and differentiate") {
    fd_check({{2, 3, 4}}, [](const auto& in) {
        return mean_all(mul(reshape(in[0], {6, 4}), reshape(in[0], {6, 4})));
    }, 37);
    fd_check({{2, 3, 4}}, [](const auto& in) {
        return mean_all(mul(permute(in[0], {2, 0, 1}), permute(in[0], {2, 0, 1})));
    }, 38);
    fd_check({{3, 6}}, [](const auto& in) { return mean_all(slice(in[0], 1, 2, 5)); }, 39);
    fd_check({{2, 3}, {2, 2}}, [](const auto& in) {
        return mean_all(mul(concat({in[0], in[1]}, 1), concat({in[0], in[1]}, 1)));
    }, 40);
    fd_check({{2, 4, 4}}, [](const auto& in) {
        Tensor p = window_partition(in[0], 2);
        return mean_all(mul(p, p));
    }, 41);
    fd_check({{2, 4, 6}}, [](const auto& in) {
        return mean_all(mul(roll2d(in[0], 1, -2), roll2d(in[0], 1, -2)));
    }, 42);
    fd_check({{2, 4, 5}}, [](const auto& in) {
        Tensor p = pad_reflect2d(in[0], 2, 3);
        return mean_all(mul(p, p));
    }, 43);
    fd_check({{2, 4, 5}}, [](const auto& in) { return mean_all(crop2d(in[0], 3, 2)); }, 44);
    fd_check({{3, 5}}, [](const auto& in) { return mean_all(mul(mean_axis(in[0], 0), mean_axis(in[0], 0))); }, 45);
    fd_check({{4, 3}, {4, 3}}, [](const auto& in) { return mse(in[0], in[1]); }, 46);
}

TEST_CASE("window partition and merge are inverse permutations") {
    Rng rng(47);
    std::vector<double> xv(3 * 4 * 8);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    Tensor x = Tensor::from({3, 4, 8}, xv);
    Tensor merged = window_merge(window_partition(x, 2), 2, 3, 4, 8);
    CHECK(merged.val() == xv);
}

TEST_CASE("pad_reflect2d reflects without repeating the edge") {
    Tensor x = Tensor::from({1, 2, 4}, {0, 1, 2, 3, 10, 11, 12, 13});
    Tensor p = pad_reflect2d(x, 1, 2);
    // row 2 reflects row 0; columns 4,5 reflect columns 2,1
    REQUIRE(p.shape() == std::vector<int>{1, 3, 6});
    CHECK(p.val()[2 * 6 + 0] == 0);
    CHECK(p.val()[0 * 6 + 4] == 2);
    CHECK(p.val()[0 * 6 + 5] == 1);
    CHECK(p.val()[1 * 6 + 4] == 12);
}

TEST_CASE("consistency layer: forward equals fbp and gradient matches finite differences") {
    const int n = 16, views = 8;
    Geometry g = make_parallel_geometry(views, n, n);
    Image phantom = make_phantom(3, n, n);
    Sinogram s = radon(phantom, g);
    Tensor st = Tensor::from_mat(s.data);
    Tensor out = fbp_layer(st, g);
    Image direct = fbp(s, g);
    for (size_t i = 0; i < out.val().size(); ++i)
        CHECK(std::abs(out.val()[i] - direct.data.v[i]) < 1e-6);

    // zero input -> zero output
    Tensor zero_out = fbp_layer(Tensor::zeros({views, g.num_detectors}), g);
    for (double v : zero_out.val()) CHECK(v == 0.0);

    fd_check({{views, g.num_detectors}},
             [&](const auto& in) { return mean_all(fbp_layer(in[0], g)); }, 48);
    // a nonlinear functional of the output exercises the adjoint path harder
    fd_check({{views, g.num_detectors}},
             [&](const auto& in) {
                 Tensor y = fbp_layer(in[0], g);
                 return mean_all(mul(y, y));
             },
             49);
}

TEST_CASE("fourier_synth reproduces reroll_and_idft and differentiates") {
    const int h = 8, w = 8;
    Mat m(h, w);
    Rng rng(50);
    for (auto& v : m.v) v = rng.uniform(-1, 1);
    auto seq = unroll_half_spectrum(dft2(m), h, w);
    const auto& plan = seq.plan();
    std::vector<double> re(plan.length), im(plan.length);
    for (int i = 0; i < plan.length; ++i) {
        re[i] = seq.amp[i] * std::cos(seq.phase[i]);
        im[i] = seq.amp[i] * std::sin(seq.phase[i]);
    }
    Tensor out = fourier_synth(Tensor::from({plan.length}, re), Tensor::from({plan.length}, im),
                               plan);
    for (size_t i = 0; i < out.val().size(); ++i)
        CHECK(out.val()[i] == doctest::Approx(m.v[i]).epsilon(1e-9));

    fd_check({{plan.length}, {plan.length}},
             [&](const auto& in) { return mean_all(fourier_synth(in[0], in[1], plan)); }, 51);
    fd_check({{plan.length}, {plan.length}},
             [&](const auto& in) {
                 Tensor y = fourier_synth(in[0], in[1], plan);
                 return mean_all(mul(y, y));
             },
             52);
}

TEST_CASE("values stay finite through a deep composite graph") {
    Rng rng(53);
    std::vector<double> xv(64);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    Tensor x = Tensor::from({4, 16}, xv, true);
    Tensor g = Tensor::full({16}, 1.0), b = Tensor::zeros({16});
    Tensor y = layernorm(gelu(x), g, b);
    y = add(y, softmax_lastdim(y));
    Tensor loss = mean_all(mul(y, y));
    loss.backward();
    CHECK(std::isfinite(loss.item()));
    for (double v : x.grad()) CHECK(std::isfinite(v));
}
