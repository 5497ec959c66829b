#include "tdn/autograd.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_set>

#include "tdn/fastmath.hpp"
#include "tdn/tomo.hpp"

extern "C" void openblas_set_num_threads(int);

namespace tdn::ag {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Single-threaded BLAS keeps every reduction order fixed.
struct BlasInit {
    BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit blas_init;

void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

size_t numel_of(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        check(d > 0, "tensor dims must be positive, got " + shape_str(shape));
        n *= static_cast<size_t>(d);
    }
    return n;
}

std::shared_ptr<Node> make_node(std::vector<int> shape,
                                std::vector<std::shared_ptr<Node>> parents) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->val.resize(numel_of(n->shape));
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    if (n->requires_grad) n->parents = std::move(parents);
    return n;
}

std::vector<size_t> strides_of(const std::vector<int>& shape) {
    std::vector<size_t> s(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
        s[i] = s[i + 1] * static_cast<size_t>(shape[i + 1]);
    return s;
}

// Broadcast layout: output shape plus per-input strides (0 on broadcast axes).
struct BroadcastPlan {
    std::vector<int> out_shape;
    std::vector<size_t> sa, sb;  // aligned to out_shape rank
    bool trivial;                // shapes equal
};

BroadcastPlan broadcast(const std::vector<int>& a, const std::vector<int>& b,
                        const std::string& op) {
    BroadcastPlan p;
    p.trivial = (a == b);
    const int rank = static_cast<int>(std::max(a.size(), b.size()));
    p.out_shape.resize(rank);
    for (int i = 0; i < rank; ++i) {
        int da = i < rank - static_cast<int>(a.size()) ? 1 : a[i - (rank - a.size())];
        int db = i < rank - static_cast<int>(b.size()) ? 1 : b[i - (rank - b.size())];
        check(da == db || da == 1 || db == 1,
              op + ": shapes " + shape_str(a) + " and " + shape_str(b) + " do not broadcast");
        p.out_shape[i] = std::max(da, db);
    }
    auto aligned_strides = [&](const std::vector<int>& s) {
        std::vector<size_t> full(rank, 0);
        auto st = strides_of(s);
        for (int i = 0; i < static_cast<int>(s.size()); ++i) {
            int oi = rank - static_cast<int>(s.size()) + i;
            full[oi] = (s[i] == 1 && p.out_shape[oi] != 1) ? 0 : st[i];
        }
        return full;
    };
    p.sa = aligned_strides(a);
    p.sb = aligned_strides(b);
    return p;
}

// Walks the output index space once, calling fn(out_index, a_offset, b_offset).
template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& fn) {
    const int rank = static_cast<int>(p.out_shape.size());
    std::vector<int> idx(rank, 0);
    size_t oa = 0, ob = 0;
    const size_t total = numel_of(p.out_shape);
    for (size_t i = 0; i < total; ++i) {
        fn(i, oa, ob);
        for (int d = rank - 1; d >= 0; --d) {
            ++idx[d];
            oa += p.sa[d];
            ob += p.sb[d];
            if (idx[d] < p.out_shape[d]) break;
            oa -= p.sa[d] * static_cast<size_t>(p.out_shape[d]);
            ob -= p.sb[d] * static_cast<size_t>(p.out_shape[d]);
            idx[d] = 0;
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- Tensor ----

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    check(numel_of(n->shape) == values.size(),
          "Tensor::from: " + shape_str(n->shape) + " does not hold " +
              std::to_string(values.size()) + " values");
    n->val = std::move(values);
    n->requires_grad = requires_grad;
    Tensor t;
    t.node_ = std::move(n);
    return t;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->val.assign(numel_of(n->shape), 0.0);
    n->requires_grad = requires_grad;
    Tensor t;
    t.node_ = std::move(n);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.node_->val.begin(), t.node_->val.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::from_mat(const Mat& m, bool requires_grad) {
    return from({m.rows, m.cols}, m.v, requires_grad);
}

Tensor Tensor::wrap(std::shared_ptr<Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
}

double Tensor::item() const {
    check(node_ && node_->numel() == 1, "item(): tensor is not scalar");
    return node_->val[0];
}

Mat Tensor::to_mat() const {
    check(node_ && node_->shape.size() == 2, "to_mat(): tensor is not rank 2");
    Mat m(node_->shape[0], node_->shape[1]);
    m.v = node_->val;
    return m;
}

void Tensor::backward() {
    check(node_ && node_->numel() == 1, "backward(): root must be scalar");
    // reverse topological order via iterative post-order DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---------------------------------------------------- elementwise binary ----

namespace {

// dfa/dfb compute the partials given (a, b) values; either input may be
// broadcast, in which case its gradient is reduced by accumulation.
template <typename FwdF, typename DaF, typename DbF>
Tensor binary_op(const Tensor& a, const Tensor& b, const std::string& name, FwdF fwd, DaF dfa,
                 DbF dfb) {
    auto pa = a.node(), pb = b.node();
    auto plan = broadcast(pa->shape, pb->shape, name);
    auto n = make_node(plan.out_shape, {pa, pb});
    if (plan.trivial) {
        for (size_t i = 0; i < n->val.size(); ++i) n->val[i] = fwd(pa->val[i], pb->val[i]);
    } else {
        for_each_broadcast(plan, [&](size_t i, size_t oa, size_t ob) {
            n->val[i] = fwd(pa->val[oa], pb->val[ob]);
        });
    }
    if (n->requires_grad) {
        n->backward_fn = [pa, pb, plan, dfa, dfb](Node& self) {
            if (pa->requires_grad) pa->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            if (plan.trivial) {
                for (size_t i = 0; i < self.val.size(); ++i) {
                    const double g = self.grad[i];
                    if (pa->requires_grad) pa->grad[i] += g * dfa(pa->val[i], pb->val[i]);
                    if (pb->requires_grad) pb->grad[i] += g * dfb(pa->val[i], pb->val[i]);
                }
            } else {
                for_each_broadcast(plan, [&](size_t i, size_t oa, size_t ob) {
                    const double g = self.grad[i];
                    if (pa->requires_grad) pa->grad[oa] += g * dfa(pa->val[oa], pb->val[ob]);
                    if (pb->requires_grad) pb->grad[ob] += g * dfb(pa->val[oa], pb->val[ob]);
                });
            }
        };
    }
    return Tensor::wrap(n);
}

template <typename FwdF, typename DF>
Tensor unary_op(const Tensor& x, FwdF fwd, DF df) {
    auto px = x.node();
    auto n = make_node(px->shape, {px});
    for (size_t i = 0; i < n->val.size(); ++i) n->val[i] = fwd(px->val[i]);
    if (n->requires_grad) {
        n->backward_fn = [px, df](Node& self) {
            px->ensure_grad();
            for (size_t i = 0; i < self.val.size(); ++i)
                px->grad[i] += self.grad[i] * df(px->val[i], self.val[i]);
        };
    }
    return Tensor::wrap(n);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor affine(const Tensor& x, double scale, double shift) {
    return unary_op(
        x, [scale, shift](double v) { return scale * v + shift; },
        [scale](double, double) { return scale; });
}

Tensor neg(const Tensor& x) { return affine(x, -1.0, 0.0); }

// -------------------------------------------------------------- unary ops ---

Tensor relu(const Tensor& x) {
    return unary_op(
        x, [](double v) { return v > 0 ? v : 0.0; },
        [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return unary_op(
        x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
        [](double v, double) {
            return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) +
                   v * inv_sqrt2pi * std::exp(-0.5 * v * v);
        });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
    return unary_op(
        x,
        [](double v) {
            if (v > 35.0) return v;
            if (v < -35.0) return std::exp(v);
            return std::log1p(std::exp(v));
        },
        [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor sqrt_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::sqrt(v); },
        [](double, double y) { return y > 1e-150 ? 0.5 / y : 0.0; });
}

Tensor cos_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::cos(v); },
        [](double v, double) { return -std::sin(v); });
}

Tensor sin_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::sin(v); },
        [](double v, double) { return std::cos(v); });
}

Tensor log1p_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::log1p(v); },
        [](double v, double) { return 1.0 / (1.0 + v); });
}

Tensor atan2_t(const Tensor& y, const Tensor& x) {
    check(y.shape() == x.shape(), "atan2: shapes " + shape_str(y.shape()) + " and " +
                                      shape_str(x.shape()) + " must match");
    return binary_op(
        y, x, "atan2", [](double yy, double xx) { return std::atan2(yy, xx); },
        [](double yy, double xx) {
            const double r2 = yy * yy + xx * xx;
            return r2 > 1e-300 ? xx / r2 : 0.0;
        },
        [](double yy, double xx) {
            const double r2 = yy * yy + xx * xx;
            return r2 > 1e-300 ? -yy / r2 : 0.0;
        });
}

// ------------------------------------------------------------------ matmul --

Tensor matmul(const Tensor& a, const Tensor& b) {
    auto pa = a.node(), pb = b.node();
    const auto& sa = pa->shape;
    const auto& sb = pb->shape;
    check(sa.size() >= 2 && sa.size() == sb.size(),
          "matmul: ranks must match and be >= 2, got " + shape_str(sa) + " x " + shape_str(sb));
    const int rank = static_cast<int>(sa.size());
    int batch = 1;
    for (int i = 0; i < rank - 2; ++i) {
        check(sa[i] == sb[i], "matmul: batch dims differ: " + shape_str(sa) + " x " + shape_str(sb));
        batch *= sa[i];
    }
    const int m = sa[rank - 2], k = sa[rank - 1], k2 = sb[rank - 2], nn = sb[rank - 1];
    check(k == k2, "matmul: inner dims differ: " + shape_str(sa) + " x " + shape_str(sb));
    std::vector<int> out_shape(sa.begin(), sa.end() - 2);
    out_shape.push_back(m);
    out_shape.push_back(nn);
    auto n = make_node(out_shape, {pa, pb});
    for (int bi = 0; bi < batch; ++bi)
        gemm(false, false, m, nn, k, 1.0, pa->val.data() + static_cast<size_t>(bi) * m * k, k,
             pb->val.data() + static_cast<size_t>(bi) * k * nn, nn, 0.0,
             n->val.data() + static_cast<size_t>(bi) * m * nn, nn);
    if (n->requires_grad) {
        n->backward_fn = [pa, pb, batch, m, k, nn](Node& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (int bi = 0; bi < batch; ++bi)
                    gemm(false, true, m, k, nn, 1.0,
                         self.grad.data() + static_cast<size_t>(bi) * m * nn, nn,
                         pb->val.data() + static_cast<size_t>(bi) * k * nn, nn, 1.0,
                         pa->grad.data() + static_cast<size_t>(bi) * m * k, k);
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int bi = 0; bi < batch; ++bi)
                    gemm(true, false, k, nn, m, 1.0,
                         pa->val.data() + static_cast<size_t>(bi) * m * k, k,
                         self.grad.data() + static_cast<size_t>(bi) * m * nn, nn, 1.0,
                         pb->grad.data() + static_cast<size_t>(bi) * k * nn, nn);
            }
        };
    }
    return Tensor::wrap(n);
}

// ------------------------------------------------------------------ conv2d --

namespace {

void im2col(const double* x, int ci, int h, int w, int kh, int kw, double* col) {
    const int ph = kh / 2, pw = kw / 2;
    // col is [ci*kh*kw, h*w]
    size_t row = 0;
    for (int c = 0; c < ci; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx, ++row) {
                double* dst = col + row * static_cast<size_t>(h) * w;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - ph;
                    if (sy < 0 || sy >= h) {
                        std::fill(dst + static_cast<size_t>(y) * w, dst + static_cast<size_t>(y + 1) * w, 0.0);
                        continue;
                    }
                    for (int xx = 0; xx < w; ++xx) {
                        const int sx = xx + kx - pw;
                        dst[static_cast<size_t>(y) * w + xx] =
                            (sx < 0 || sx >= w) ? 0.0
                                                : x[(static_cast<size_t>(c) * h + sy) * w + sx];
                    }
                }
            }
}

void col2im_add(const double* col, int ci, int h, int w, int kh, int kw, double* x) {
    const int ph = kh / 2, pw = kw / 2;
    size_t row = 0;
    for (int c = 0; c < ci; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx, ++row) {
                const double* src = col + row * static_cast<size_t>(h) * w;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - ph;
                    if (sy < 0 || sy >= h) continue;
                    for (int xx = 0; xx < w; ++xx) {
                        const int sx = xx + kx - pw;
                        if (sx < 0 || sx >= w) continue;
                        x[(static_cast<size_t>(c) * h + sy) * w + sx] +=
                            src[static_cast<size_t>(y) * w + xx];
                    }
                }
            }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
    auto px = x.node(), pw = w.node(), pb = bias.node();
    check(px->shape.size() == 3 && pw->shape.size() == 4,
          "conv2d: expected x [C,H,W] and w [Co,Ci,kh,kw], got " + shape_str(px->shape) + " and " +
              shape_str(pw->shape));
    const int ci = px->shape[0], h = px->shape[1], ww = px->shape[2];
    const int co = pw->shape[0], kh = pw->shape[2], kw = pw->shape[3];
    check(pw->shape[1] == ci, "conv2d: channel mismatch: x " + shape_str(px->shape) + " vs w " +
                                  shape_str(pw->shape));
    check(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel dims must be odd");
    check(pb->shape == std::vector<int>{co}, "conv2d: bias must be [Co]");
    const int hw = h * ww, krow = ci * kh * kw;
    auto n = make_node({co, h, ww}, {px, pw, pb});
    std::vector<double> col(static_cast<size_t>(krow) * hw);
    im2col(px->val.data(), ci, h, ww, kh, kw, col.data());
    gemm(false, false, co, hw, krow, 1.0, pw->val.data(), krow, col.data(), hw, 0.0,
         n->val.data(), hw);
    for (int c = 0; c < co; ++c) {
        const double b = pb->val[c];
        double* row = n->val.data() + static_cast<size_t>(c) * hw;
        for (int i = 0; i < hw; ++i) row[i] += b;
    }
    if (n->requires_grad) {
        n->backward_fn = [px, pw, pb, ci, h, ww, co, kh, kw](Node& self) {
            const int hw = h * ww, krow = ci * kh * kw;
            std::vector<double> col(static_cast<size_t>(krow) * hw);
            im2col(px->val.data(), ci, h, ww, kh, kw, col.data());
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int c = 0; c < co; ++c) {
                    double s = 0;
                    const double* row = self.grad.data() + static_cast<size_t>(c) * hw;
                    for (int i = 0; i < hw; ++i) s += row[i];
                    pb->grad[c] += s;
                }
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                gemm(false, true, co, krow, hw, 1.0, self.grad.data(), hw, col.data(), hw, 1.0,
                     pw->grad.data(), krow);
            }
            if (px->requires_grad) {
                px->ensure_grad();
                std::vector<double> dcol(static_cast<size_t>(krow) * hw);
                gemm(true, false, krow, hw, co, 1.0, pw->val.data(), krow, self.grad.data(), hw,
                     0.0, dcol.data(), hw);
                col2im_add(dcol.data(), ci, h, ww, kh, kw, px->grad.data());
            }
        };
    }
    return Tensor::wrap(n);
}

// ------------------------------------------------------ layernorm, softmax --

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    auto px = x.node(), pg = gain.node(), pb = bias.node();
    check(!px->shape.empty(), "layernorm: scalar input");
    const int d = px->shape.back();
    check(pg->shape == std::vector<int>{d} && pb->shape == std::vector<int>{d},
          "layernorm: gain/bias must be [" + std::to_string(d) + "]");
    constexpr double eps = 1e-5;
    auto n = make_node(px->shape, {px, pg, pb});
    const size_t rows = px->numel() / d;
    for (size_t r = 0; r < rows; ++r) {
        const double* xi = px->val.data() + r * d;
        double* yi = n->val.data() + r * d;
        double mu = 0;
        for (int i = 0; i < d; ++i) mu += xi[i];
        mu /= d;
        double var = 0;
        for (int i = 0; i < d; ++i) var += (xi[i] - mu) * (xi[i] - mu);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int i = 0; i < d; ++i) yi[i] = (xi[i] - mu) * inv * pg->val[i] + pb->val[i];
    }
    if (n->requires_grad) {
        n->backward_fn = [px, pg, pb, d](Node& self) {
            constexpr double eps = 1e-5;
            const size_t rows = px->numel() / d;
            if (px->requires_grad) px->ensure_grad();
            if (pg->requires_grad) pg->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            std::vector<double> xhat(d);
            for (size_t r = 0; r < rows; ++r) {
                const double* xi = px->val.data() + r * d;
                const double* gy = self.grad.data() + r * d;
                double mu = 0;
                for (int i = 0; i < d; ++i) mu += xi[i];
                mu /= d;
                double var = 0;
                for (int i = 0; i < d; ++i) var += (xi[i] - mu) * (xi[i] - mu);
                var /= d;
                const double inv = 1.0 / std::sqrt(var + eps);
                double mean_dxhat = 0, mean_dxhat_xhat = 0;
                for (int i = 0; i < d; ++i) {
                    xhat[i] = (xi[i] - mu) * inv;
                    const double dxh = gy[i] * pg->val[i];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xhat[i];
                }
                mean_dxhat /= d;
                mean_dxhat_xhat /= d;
                for (int i = 0; i < d; ++i) {
                    if (pg->requires_grad) pg->grad[i] += gy[i] * xhat[i];
                    if (pb->requires_grad) pb->grad[i] += gy[i];
                    if (px->requires_grad)
                        px->grad[r * d + i] +=
                            inv * (gy[i] * pg->val[i] - mean_dxhat - xhat[i] * mean_dxhat_xhat);
                }
            }
        };
    }
    return Tensor::wrap(n);
}

Tensor softmax_lastdim(const Tensor& x) {
    auto px = x.node();
    check(!px->shape.empty(), "softmax: scalar input");
    const int d = px->shape.back();
    auto n = make_node(px->shape, {px});
    const size_t rows = px->numel() / d;
    for (size_t r = 0; r < rows; ++r) {
        const double* xi = px->val.data() + r * d;
        double* yi = n->val.data() + r * d;
        double m = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < d; ++i) m = std::max(m, xi[i]);
        double sum = 0;
        for (int i = 0; i < d; ++i) {
            yi[i] = fast_exp(xi[i] - m);
            sum += yi[i];
        }
        for (int i = 0; i < d; ++i) yi[i] /= sum;
    }
    if (n->requires_grad) {
        n->backward_fn = [px, d](Node& self) {
            px->ensure_grad();
            const size_t rows = px->numel() / d;
            for (size_t r = 0; r < rows; ++r) {
                const double* y = self.val.data() + r * d;
                const double* gy = self.grad.data() + r * d;
                double dot = 0;
                for (int i = 0; i < d; ++i) dot += gy[i] * y[i];
                for (int i = 0; i < d; ++i) px->grad[r * d + i] += y[i] * (gy[i] - dot);
            }
        };
    }
    return Tensor::wrap(n);
}

// --------------------------------------------------------------- attention --

namespace {

constexpr int kAttnBlock = 128;

// Unmasked prefix length of tile row i: under the causal mask, columns
// j0..j0+bj are valid while j0+j <= i0+i.
inline int prefix_len(bool causal, int i0, int i, int j0, int bj) {
    if (!causal) return bj;
    return std::clamp(i0 + i - j0 + 1, 0, bj);
}

// Recomputes the P = exp(S - lse) tile for rows [i0,i1) x cols [j0,j1);
// masked entries are exactly zero.
void attn_tile(const double* q, const double* k, const double* lse, int d, double scale,
               bool causal, int i0, int i1, int j0, int j1, double* p /* (i1-i0) x (j1-j0) */) {
    const int bi = i1 - i0, bj = j1 - j0;
    gemm(false, true, bi, bj, d, scale, q + static_cast<size_t>(i0) * d, d,
         k + static_cast<size_t>(j0) * d, d, 0.0, p, bj);
    for (int i = 0; i < bi; ++i) {
        double* row = p + static_cast<size_t>(i) * bj;
        const int valid = prefix_len(causal, i0, i, j0, bj);
        exp_span(row, row, valid, lse[i0 + i]);
        std::fill(row + valid, row + bj, 0.0);
    }
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal) {
    auto pq = q.node(), pk = k.node(), pv = v.node();
    check(pq->shape.size() == 3 && pk->shape.size() == 3 && pv->shape.size() == 3,
          "attention: q,k,v must be [B,T,D]");
    const int b = pq->shape[0], tq = pq->shape[1], d = pq->shape[2];
    const int tk = pk->shape[1];
    check(pk->shape[0] == b && pv->shape[0] == b,
          "attention: batch dims differ: " + shape_str(pq->shape) + ", " + shape_str(pk->shape) +
              ", " + shape_str(pv->shape));
    check(pk->shape[2] == d, "attention: q/k head dims differ: " + shape_str(pq->shape) + " vs " +
                                 shape_str(pk->shape));
    check(pv->shape[1] == tk, "attention: k/v lengths differ");
    const int dv = pv->shape[2];
    check(!causal || tq == tk, "attention: causal mask requires equal q/k lengths");
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    auto n = make_node({b, tq, dv}, {pq, pk, pv});
    // per-row log-sum-exp, kept for the backward recomputation
    auto lse = std::make_shared<std::vector<double>>(static_cast<size_t>(b) * tq);

    std::vector<double> s(static_cast<size_t>(kAttnBlock) * kAttnBlock);
    std::vector<double> rowmax(kAttnBlock), rowsum(kAttnBlock);
    for (int bi = 0; bi < b; ++bi) {
        const double* qb = pq->val.data() + static_cast<size_t>(bi) * tq * d;
        const double* kb = pk->val.data() + static_cast<size_t>(bi) * tk * d;
        const double* vb = pv->val.data() + static_cast<size_t>(bi) * tk * dv;
        double* ob = n->val.data() + static_cast<size_t>(bi) * tq * dv;
        double* lseb = lse->data() + static_cast<size_t>(bi) * tq;
        for (int i0 = 0; i0 < tq; i0 += kAttnBlock) {
            const int i1 = std::min(tq, i0 + kAttnBlock), brow = i1 - i0;
            std::fill(rowmax.begin(), rowmax.begin() + brow,
                      -std::numeric_limits<double>::infinity());
            std::fill(rowsum.begin(), rowsum.begin() + brow, 0.0);
            std::fill(ob + static_cast<size_t>(i0) * dv, ob + static_cast<size_t>(i1) * dv, 0.0);
            const int jmax = causal ? i1 : tk;
            for (int j0 = 0; j0 < jmax; j0 += kAttnBlock) {
                const int j1 = std::min(jmax, j0 + kAttnBlock), bcol = j1 - j0;
                gemm(false, true, brow, bcol, d, scale, qb + static_cast<size_t>(i0) * d, d,
                     kb + static_cast<size_t>(j0) * d, d, 0.0, s.data(), bcol);
                for (int i = 0; i < brow; ++i) {
                    double* srow = s.data() + static_cast<size_t>(i) * bcol;
                    const int valid = prefix_len(causal, i0, i, j0, bcol);
                    if (valid == 0) {  // fully masked row in this tile
                        std::fill(srow, srow + bcol, 0.0);
                        continue;
                    }
                    double m = rowmax[i];
                    for (int j = 0; j < valid; ++j) m = std::max(m, srow[j]);
                    exp_span(srow, srow, valid, m);
                    std::fill(srow + valid, srow + bcol, 0.0);
                    double psum = 0;
                    for (int j = 0; j < valid; ++j) psum += srow[j];
                    const double corr = rowmax[i] == -std::numeric_limits<double>::infinity()
                                            ? 0.0
                                            : fast_exp(rowmax[i] - m);
                    rowsum[i] = rowsum[i] * corr + psum;
                    rowmax[i] = m;
                    double* orow = ob + static_cast<size_t>(i0 + i) * dv;
                    if (corr != 1.0)
                        for (int c = 0; c < dv; ++c) orow[c] *= corr;
                }
                // O += P * V for this tile
                gemm(false, false, brow, dv, bcol, 1.0, s.data(), bcol,
                     vb + static_cast<size_t>(j0) * dv, dv, 1.0,
                     ob + static_cast<size_t>(i0) * dv, dv);
            }
            for (int i = 0; i < brow; ++i) {
                const double inv = 1.0 / rowsum[i];
                double* orow = ob + static_cast<size_t>(i0 + i) * dv;
                for (int c = 0; c < dv; ++c) orow[c] *= inv;
                lseb[i0 + i] = rowmax[i] + std::log(rowsum[i]);
            }
        }
    }

    if (n->requires_grad) {
        n->backward_fn = [pq, pk, pv, lse, b, tq, tk, d, dv, scale, causal](Node& self) {
            if (pq->requires_grad) pq->ensure_grad();
            if (pk->requires_grad) pk->ensure_grad();
            if (pv->requires_grad) pv->ensure_grad();
            std::vector<double> p(static_cast<size_t>(kAttnBlock) * kAttnBlock);
            std::vector<double> dp(static_cast<size_t>(kAttnBlock) * kAttnBlock);
            std::vector<double> dvec(tq);
            for (int bi = 0; bi < b; ++bi) {
                const double* qb = pq->val.data() + static_cast<size_t>(bi) * tq * d;
                const double* kb = pk->val.data() + static_cast<size_t>(bi) * tk * d;
                const double* vb = pv->val.data() + static_cast<size_t>(bi) * tk * dv;
                const double* ob = self.val.data() + static_cast<size_t>(bi) * tq * dv;
                const double* gob = self.grad.data() + static_cast<size_t>(bi) * tq * dv;
                const double* lseb = lse->data() + static_cast<size_t>(bi) * tq;
                double* gq = pq->requires_grad
                                 ? pq->grad.data() + static_cast<size_t>(bi) * tq * d
                                 : nullptr;
                double* gk = pk->requires_grad
                                 ? pk->grad.data() + static_cast<size_t>(bi) * tk * d
                                 : nullptr;
                double* gv = pv->requires_grad
                                 ? pv->grad.data() + static_cast<size_t>(bi) * tk * dv
                                 : nullptr;
                for (int i = 0; i < tq; ++i) {
                    double acc = 0;
                    for (int c = 0; c < dv; ++c)
                        acc += gob[static_cast<size_t>(i) * dv + c] * ob[static_cast<size_t>(i) * dv + c];
                    dvec[i] = acc;
                }
                for (int i0 = 0; i0 < tq; i0 += kAttnBlock) {
                    const int i1 = std::min(tq, i0 + kAttnBlock), brow = i1 - i0;
                    const int jmax = causal ? i1 : tk;
                    for (int j0 = 0; j0 < jmax; j0 += kAttnBlock) {
                        const int j1 = std::min(jmax, j0 + kAttnBlock), bcol = j1 - j0;
                        attn_tile(qb, kb, lseb, d, scale, causal, i0, i1, j0, j1, p.data());
                        if (gv)
                            gemm(true, false, bcol, dv, brow, 1.0, p.data(), bcol,
                                 gob + static_cast<size_t>(i0) * dv, dv, 1.0,
                                 gv + static_cast<size_t>(j0) * dv, dv);
                        // dP = dO * V^T, then dS = P o (dP - dvec)
                        gemm(false, true, brow, bcol, dv, 1.0, gob + static_cast<size_t>(i0) * dv,
                             dv, vb + static_cast<size_t>(j0) * dv, dv, 0.0, dp.data(), bcol);
                        for (int i = 0; i < brow; ++i)
                            for (int j = 0; j < bcol; ++j) {
                                const size_t off = static_cast<size_t>(i) * bcol + j;
                                dp[off] = p[off] * (dp[off] - dvec[i0 + i]);
                            }
                        if (gq)
                            gemm(false, false, brow, d, bcol, scale, dp.data(), bcol,
                                 kb + static_cast<size_t>(j0) * d, d, 1.0,
                                 gq + static_cast<size_t>(i0) * d, d);
                        if (gk)
                            gemm(true, false, bcol, d, brow, scale, dp.data(), bcol,
                                 qb + static_cast<size_t>(i0) * d, d, 1.0,
                                 gk + static_cast<size_t>(j0) * d, d);
                    }
                }
            }
        };
    }
    return Tensor::wrap(n);
}

// -------------------------------------------------------------- shape ops ---

namespace {

// out[i] = x[idx[i]]; backward scatter-adds, so duplicate sources accumulate.
Tensor gather_op(const Tensor& x, std::shared_ptr<std::vector<int64_t>> idx,
                 std::vector<int> out_shape) {
    auto px = x.node();
    auto n = make_node(std::move(out_shape), {px});
    check(idx->size() == n->numel(), "gather: index size mismatch");
    for (size_t i = 0; i < idx->size(); ++i) n->val[i] = px->val[(*idx)[i]];
    if (n->requires_grad) {
        n->backward_fn = [px, idx](Node& self) {
            px->ensure_grad();
            for (size_t i = 0; i < idx->size(); ++i) px->grad[(*idx)[i]] += self.grad[i];
        };
    }
    return Tensor::wrap(n);
}

}  // namespace

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    auto px = x.node();
    check(numel_of(shape) == px->numel(), "reshape: " + shape_str(px->shape) + " -> " +
                                              shape_str(shape) + " changes element count");
    auto n = make_node(std::move(shape), {px});
    n->val = px->val;
    if (n->requires_grad) {
        n->backward_fn = [px](Node& self) {
            px->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
        };
    }
    return Tensor::wrap(n);
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
    auto px = x.node();
    const int rank = static_cast<int>(px->shape.size());
    check(static_cast<int>(axes.size()) == rank, "permute: axes rank mismatch");
    std::vector<int> out_shape(rank);
    for (int i = 0; i < rank; ++i) out_shape[i] = px->shape[axes[i]];
    auto in_strides = strides_of(px->shape);
    auto idx = std::make_shared<std::vector<int64_t>>(px->numel());
    std::vector<int> coord(rank, 0);
    for (size_t i = 0; i < idx->size(); ++i) {
        size_t off = 0;
        for (int d = 0; d < rank; ++d) off += coord[d] * in_strides[axes[d]];
        (*idx)[i] = static_cast<int64_t>(off);
        for (int d = rank - 1; d >= 0; --d) {
            if (++coord[d] < out_shape[d]) break;
            coord[d] = 0;
        }
    }
    return gather_op(x, std::move(idx), out_shape);
}

Tensor slice(const Tensor& x, int axis, int start, int stop) {
    auto px = x.node();
    const int rank = static_cast<int>(px->shape.size());
    check(axis >= 0 && axis < rank, "slice: bad axis");
    check(0 <= start && start < stop && stop <= px->shape[axis],
          "slice: bad range [" + std::to_string(start) + ", " + std::to_string(stop) + ") on " +
              shape_str(px->shape));
    std::vector<int> out_shape = px->shape;
    out_shape[axis] = stop - start;
    auto in_strides = strides_of(px->shape);
    auto idx = std::make_shared<std::vector<int64_t>>(numel_of(out_shape));
    std::vector<int> coord(rank, 0);
    for (size_t i = 0; i < idx->size(); ++i) {
        size_t off = 0;
        for (int d = 0; d < rank; ++d) off += (coord[d] + (d == axis ? start : 0)) * in_strides[d];
        (*idx)[i] = static_cast<int64_t>(off);
        for (int d = rank - 1; d >= 0; --d) {
            if (++coord[d] < out_shape[d]) break;
            coord[d] = 0;
        }
    }
    return gather_op(x, std::move(idx), out_shape);
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    check(!xs.empty(), "concat: empty input list");
    const auto& s0 = xs[0].shape();
    const int rank = static_cast<int>(s0.size());
    check(axis >= 0 && axis < rank, "concat: bad axis");
    std::vector<int> out_shape = s0;
    for (size_t i = 1; i < xs.size(); ++i) {
        const auto& si = xs[i].shape();
        check(static_cast<int>(si.size()) == rank, "concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            check(d == axis || si[d] == s0[d],
                  "concat: shapes " + shape_str(s0) + " and " + shape_str(si) + " differ off-axis");
        out_shape[axis] += si[axis];
    }
    std::vector<std::shared_ptr<Node>> parents;
    for (const auto& t : xs) parents.push_back(t.node());
    auto n = make_node(out_shape, parents);

    // views as [outer, axis_dim, inner]
    size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s0[d];
    for (int d = axis + 1; d < rank; ++d) inner *= s0[d];
    const size_t out_axis = out_shape[axis];
    size_t axis_off = 0;
    for (const auto& t : xs) {
        const size_t ad = t.shape()[axis];
        const auto& val = t.node()->val;
        for (size_t o = 0; o < outer; ++o)
            for (size_t a = 0; a < ad; ++a)
                std::copy(val.begin() + (o * ad + a) * inner, val.begin() + (o * ad + a + 1) * inner,
                          n->val.begin() + (o * out_axis + axis_off + a) * inner);
        axis_off += ad;
    }
    if (n->requires_grad) {
        std::vector<std::shared_ptr<Node>> ps = parents;
        n->backward_fn = [ps, outer, inner, out_axis, axis](Node& self) {
            size_t axis_off = 0;
            for (const auto& p : ps) {
                const size_t ad = p->shape[axis];
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (size_t o = 0; o < outer; ++o)
                        for (size_t a = 0; a < ad; ++a) {
                            const double* src =
                                self.grad.data() + (o * out_axis + axis_off + a) * inner;
                            double* dst = p->grad.data() + (o * ad + a) * inner;
                            for (size_t i = 0; i < inner; ++i) dst[i] += src[i];
                        }
                }
                axis_off += ad;
            }
        };
    }
    return Tensor::wrap(n);
}

Tensor window_partition(const Tensor& x, int ws) {
    const auto& s = x.shape();
    check(s.size() == 3, "window_partition: expected [C,H,W], got " + shape_str(s));
    const int c = s[0], h = s[1], w = s[2];
    check(h % ws == 0 && w % ws == 0,
          "window_partition: window " + std::to_string(ws) + " does not divide " + shape_str(s));
    const int nh = h / ws, nw = w / ws;
    auto idx = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(c) * h * w);
    size_t i = 0;
    for (int wy = 0; wy < nh; ++wy)
        for (int wx = 0; wx < nw; ++wx)
            for (int iy = 0; iy < ws; ++iy)
                for (int ix = 0; ix < ws; ++ix)
                    for (int cc = 0; cc < c; ++cc)
                        (*idx)[i++] = (static_cast<int64_t>(cc) * h + wy * ws + iy) * w + wx * ws + ix;
    return gather_op(x, std::move(idx), {nh * nw, ws * ws, c});
}

Tensor window_merge(const Tensor& x, int ws, int channels, int h, int w) {
    const auto& s = x.shape();
    check(s.size() == 3 && s[1] == ws * ws && s[2] == channels &&
              s[0] == (h / ws) * (w / ws) && h % ws == 0 && w % ws == 0,
          "window_merge: shape " + shape_str(s) + " does not describe " +
              shape_str({channels, h, w}) + " with window " + std::to_string(ws));
    const int nw = w / ws;
    auto idx = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(channels) * h * w);
    size_t i = 0;
    for (int cc = 0; cc < channels; ++cc)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const int win = (y / ws) * nw + xx / ws;
                const int tok = (y % ws) * ws + xx % ws;
                (*idx)[i++] = (static_cast<int64_t>(win) * ws * ws + tok) * channels + cc;
            }
    return gather_op(x, std::move(idx), {channels, h, w});
}

Tensor roll2d(const Tensor& x, int shift_y, int shift_x) {
    const auto& s = x.shape();
    check(s.size() == 3, "roll2d: expected [C,H,W], got " + shape_str(s));
    const int c = s[0], h = s[1], w = s[2];
    auto mod = [](int a, int m) { return ((a % m) + m) % m; };
    auto idx = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(c) * h * w);
    size_t i = 0;
    for (int cc = 0; cc < c; ++cc)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                (*idx)[i++] =
                    (static_cast<int64_t>(cc) * h + mod(y - shift_y, h)) * w + mod(xx - shift_x, w);
    return gather_op(x, std::move(idx), {c, h, w});
}

Tensor pad_reflect2d(const Tensor& x, int bottom, int right) {
    const auto& s = x.shape();
    check(s.size() == 3, "pad_reflect2d: expected [C,H,W], got " + shape_str(s));
    const int c = s[0], h = s[1], w = s[2];
    check(bottom >= 0 && bottom < h && right >= 0 && right < w,
          "pad_reflect2d: pad must be smaller than the padded dimension");
    const int nh = h + bottom, nw = w + right;
    auto reflect = [](int i, int n) { return i < n ? i : 2 * n - 2 - i; };
    auto idx = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(c) * nh * nw);
    size_t i = 0;
    for (int cc = 0; cc < c; ++cc)
        for (int y = 0; y < nh; ++y)
            for (int xx = 0; xx < nw; ++xx)
                (*idx)[i++] = (static_cast<int64_t>(cc) * h + reflect(y, h)) * w + reflect(xx, w);
    return gather_op(x, std::move(idx), {c, nh, nw});
}

Tensor crop2d(const Tensor& x, int h, int w) {
    const auto& s = x.shape();
    check(s.size() == 3 && h <= s[1] && w <= s[2],
          "crop2d: cannot crop " + shape_str(s) + " to " + shape_str({s[0], h, w}));
    const int c = s[0], sh = s[1], sw = s[2];
    auto idx = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(c) * h * w);
    size_t i = 0;
    for (int cc = 0; cc < c; ++cc)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                (*idx)[i++] = (static_cast<int64_t>(cc) * sh + y) * sw + xx;
    return gather_op(x, std::move(idx), {c, h, w});
}

// -------------------------------------------------------------- reductions --

Tensor sum_all(const Tensor& x) {
    auto px = x.node();
    auto n = make_node({1}, {px});
    double s = 0;
    for (double v : px->val) s += v;
    n->val[0] = s;
    if (n->requires_grad) {
        n->backward_fn = [px](Node& self) {
            px->ensure_grad();
            const double g = self.grad[0];
            for (auto& gv : px->grad) gv += g;
        };
    }
    return Tensor::wrap(n);
}

Tensor mean_all(const Tensor& x) {
    auto px = x.node();
    auto n = make_node({1}, {px});
    double s = 0;
    for (double v : px->val) s += v;
    const double inv = 1.0 / px->numel();
    n->val[0] = s * inv;
    if (n->requires_grad) {
        n->backward_fn = [px, inv](Node& self) {
            px->ensure_grad();
            const double g = self.grad[0] * inv;
            for (auto& gv : px->grad) gv += g;
        };
    }
    return Tensor::wrap(n);
}

Tensor mean_axis(const Tensor& x, int axis) {
    auto px = x.node();
    const int rank = static_cast<int>(px->shape.size());
    check(axis >= 0 && axis < rank, "mean_axis: bad axis");
    std::vector<int> out_shape;
    for (int d = 0; d < rank; ++d)
        if (d != axis) out_shape.push_back(px->shape[d]);
    if (out_shape.empty()) out_shape.push_back(1);
    size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= px->shape[d];
    for (int d = axis + 1; d < rank; ++d) inner *= px->shape[d];
    const size_t ad = px->shape[axis];
    auto n = make_node(out_shape, {px});
    const double inv = 1.0 / static_cast<double>(ad);
    for (size_t o = 0; o < outer; ++o)
        for (size_t i = 0; i < inner; ++i) {
            double s = 0;
            for (size_t a = 0; a < ad; ++a) s += px->val[(o * ad + a) * inner + i];
            n->val[o * inner + i] = s * inv;
        }
    if (n->requires_grad) {
        n->backward_fn = [px, outer, inner, ad, inv](Node& self) {
            px->ensure_grad();
            for (size_t o = 0; o < outer; ++o)
                for (size_t i = 0; i < inner; ++i) {
                    const double g = self.grad[o * inner + i] * inv;
                    for (size_t a = 0; a < ad; ++a) px->grad[(o * ad + a) * inner + i] += g;
                }
        };
    }
    return Tensor::wrap(n);
}

Tensor mse(const Tensor& a, const Tensor& b) {
    auto pa = a.node(), pb = b.node();
    check(pa->shape == pb->shape, "mse: shapes " + shape_str(pa->shape) + " and " +
                                      shape_str(pb->shape) + " must match");
    auto n = make_node({1}, {pa, pb});
    double s = 0;
    for (size_t i = 0; i < pa->val.size(); ++i) {
        const double d = pa->val[i] - pb->val[i];
        s += d * d;
    }
    const double inv = 1.0 / pa->numel();
    n->val[0] = s * inv;
    if (n->requires_grad) {
        n->backward_fn = [pa, pb, inv](Node& self) {
            const double g = self.grad[0] * 2.0 * inv;
            if (pa->requires_grad) pa->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (size_t i = 0; i < pa->val.size(); ++i) {
                const double d = pa->val[i] - pb->val[i];
                if (pa->requires_grad) pa->grad[i] += g * d;
                if (pb->requires_grad) pb->grad[i] -= g * d;
            }
        };
    }
    return Tensor::wrap(n);
}

// ---------------------------------------------------------- domain layers ---

Tensor fbp_layer(const Tensor& sino, const Geometry& geom) {
    auto ps = sino.node();
    check(ps->shape.size() == 2 && ps->shape[0] == geom.num_views &&
              ps->shape[1] == geom.num_detectors,
          "fbp_layer: sinogram " + shape_str(ps->shape) + " does not match geometry " +
              shape_str({geom.num_views, geom.num_detectors}));
    Mat sm(ps->shape[0], ps->shape[1]);
    sm.v = ps->val;
    Image img = fbp(Sinogram(std::move(sm)), geom);
    auto n = make_node({geom.image_h, geom.image_w}, {ps});
    n->val = std::move(img.data.v);
    if (n->requires_grad) {
        Geometry g = geom;
        n->backward_fn = [ps, g](Node& self) {
            ps->ensure_grad();
            // adjoint of c * backproject(filter(s)): c * filter(radon(grad))
            Mat gm(g.image_h, g.image_w);
            gm.v = self.grad;
            Sinogram proj = radon(Image(std::move(gm)), g);
            Mat filt = filter_rows_ramp(proj.data, g.detector_spacing);
            const double scale = kPi / g.num_views * g.detector_spacing;
            for (size_t i = 0; i < ps->grad.size(); ++i) ps->grad[i] += scale * filt.v[i];
        };
    }
    return Tensor::wrap(n);
}

Tensor fourier_synth(const Tensor& re, const Tensor& im, const HalfSpectrumPlan& plan) {
    auto pr = re.node(), pi = im.node();
    check(pr->shape == pi->shape && pr->numel() == static_cast<size_t>(plan.length),
          "fourier_synth: re/im must both hold " + std::to_string(plan.length) + " values");
    const int h = plan.h, w = plan.w;
    std::vector<cd> spec(static_cast<size_t>(h) * w, cd(0, 0));
    for (int i = 0; i < plan.length; ++i) {
        const auto& p = plan.pos[i];
        const cd c(pr->val[i], pi->val[i]);
        spec[static_cast<size_t>(p.u) * w + p.v] = c;
        if (p.has_mirror) spec[static_cast<size_t>(p.mu) * w + p.mv] = std::conj(c);
    }
    Mat img = idft2_real(spec, h, w);
    auto n = make_node({h, w}, {pr, pi});
    n->val = std::move(img.v);
    if (n->requires_grad) {
        const HalfSpectrumPlan* pp = &plan;
        n->backward_fn = [pr, pi, pp, h, w](Node& self) {
            if (pr->requires_grad) pr->ensure_grad();
            if (pi->requires_grad) pi->ensure_grad();
            Mat gm(h, w);
            gm.v = self.grad;
            const auto gspec = dft2(gm);
            const double inv = 1.0 / (static_cast<double>(h) * w);
            for (int i = 0; i < pp->length; ++i) {
                const auto& p = pp->pos[i];
                const cd g = gspec[static_cast<size_t>(p.u) * w + p.v];
                const double k = p.has_mirror ? 2.0 : 1.0;
                if (pr->requires_grad) pr->grad[i] += k * inv * g.real();
                if (pi->requires_grad) pi->grad[i] += k * inv * g.imag();
            }
        };
    }
    return Tensor::wrap(n);
}

}  // namespace tdn::ag
