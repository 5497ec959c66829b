#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tdn/geometry.hpp"
#include "tdn/mat.hpp"
#include "tdn/spectral.hpp"

namespace tdn::ag {

struct Node {
    std::vector<int> shape;
    std::vector<double> val;
    std::vector<double> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    size_t numel() const { return val.size(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(val.size(), 0.0);
    }
};

// Handle to a node in the dynamic tape. Ops build the graph; backward()
// runs reverse topological order from a scalar root, accumulating gradients
// additively into every requires_grad node.
class Tensor {
public:
    Tensor() = default;

    static Tensor from(std::vector<int> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);
    static Tensor from_mat(const Mat& m, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const std::vector<int>& shape() const { return node_->shape; }
    size_t numel() const { return node_->numel(); }
    const std::vector<double>& val() const { return node_->val; }
    std::vector<double>& val() { return node_->val; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    double item() const;
    Mat to_mat() const;

    void zero_grad() { node_->grad.assign(node_->val.size(), 0.0); }
    void backward();

    std::shared_ptr<Node> node() const { return node_; }
    static Tensor wrap(std::shared_ptr<Node> n);

private:
    std::shared_ptr<Node> node_;
};

// ---- elementwise (NumPy-style broadcasting on add/sub/mul/div) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& x, double scale, double shift);  // scale*x + shift
Tensor neg(const Tensor& x);

// ---- unary ----
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sqrt_t(const Tensor& x);
Tensor cos_t(const Tensor& x);
Tensor sin_t(const Tensor& x);
Tensor log1p_t(const Tensor& x);
Tensor atan2_t(const Tensor& y, const Tensor& x);  // elementwise, same shape

// ---- linear algebra ----
// 2D x 2D, or batched with identical leading dims (last two axes multiply).
Tensor matmul(const Tensor& a, const Tensor& b);
// x [Ci,H,W], w [Co,Ci,kh,kw] (odd kernel), optional bias [Co]; stride 1,
// zero-padded "same".
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias);

// ---- normalization / attention ----
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias);  // last dim
Tensor softmax_lastdim(const Tensor& x);
// q,k,v: [B,T,D]; scaled dot-product with optional lower-triangular mask.
// Streaming softmax: no T x T intermediate is stored.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal);

// ---- shape ops ----
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor slice(const Tensor& x, int axis, int start, int stop);
Tensor concat(const std::vector<Tensor>& xs, int axis);
// [C,H,W] <-> [nWindows, ws*ws, C]
Tensor window_partition(const Tensor& x, int ws);
Tensor window_merge(const Tensor& x, int ws, int channels, int h, int w);
Tensor roll2d(const Tensor& x, int shift_y, int shift_x);          // [C,H,W] cyclic
Tensor pad_reflect2d(const Tensor& x, int bottom, int right);      // [C,H,W]
Tensor crop2d(const Tensor& x, int h, int w);                      // [C,H,W] top-left

// ---- reductions / losses ----
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mean_axis(const Tensor& x, int axis);
Tensor mse(const Tensor& a, const Tensor& b);

// ---- domain-specific ----
// Differentiable filtered back-projection (the consistency layer): forward is
// exactly fbp(sino); backward routes through the self-adjoint row filter and
// the radon transform (adjoint of backprojection).
Tensor fbp_layer(const Tensor& sino, const Geometry& geom);

// Linear synthesis of a real image from half-spectrum (re, im) vectors laid
// out in plan order: Hermitian fill + inverse DFT, real part.
Tensor fourier_synth(const Tensor& re, const Tensor& im, const HalfSpectrumPlan& plan);

}  // namespace tdn::ag
