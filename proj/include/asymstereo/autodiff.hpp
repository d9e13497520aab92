#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "asymstereo/tensor.hpp"

namespace asymstereo {

/// Reverse-mode automatic differentiation over Tensor values.
///
/// Graphs are built define-by-run: each op returns a Var holding the result
/// and a closure that scatters the output gradient into its parents. Calling
/// backward() on a scalar Var runs the closures in reverse topological order.
/// There is no global tape; graphs are independent and thread-safe to build
/// concurrently.

struct VarNode;
using VarNodePtr = std::shared_ptr<VarNode>;

struct VarNode {
    Tensor val;
    Tensor grad;  // allocated lazily by backward()
    bool requires_grad = false;
    bool grad_ready = false;
    std::vector<VarNodePtr> parents;
    std::function<void(VarNode&)> backward_fn;
};

class Var {
public:
    Var() = default;
    explicit Var(VarNodePtr n) : node_(std::move(n)) {}

    /// Leaf that participates in differentiation (network parameters, probe inputs).
    static Var leaf(Tensor value);
    /// Leaf treated as a constant.
    static Var constant(Tensor value);

    bool defined() const { return node_ != nullptr; }
    const Tensor& val() const { return node_->val; }
    const Tensor& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    VarNodePtr node() const { return node_; }

private:
    VarNodePtr node_;
};

/// Reverse pass from a scalar root. Gradients accumulate into every reachable
/// node with requires_grad; leaves keep them until the graph is dropped.
void backward(const Var& root);

// ---- elementwise -----------------------------------------------------------
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);  // Hadamard
Var operator/(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var vabs(const Var& a);   // subgradient 0 at 0
Var vexp(const Var& a);
Var leaky_relu(const Var& a, double slope);

// ---- reductions ------------------------------------------------------------
Var mean_all(const Var& a);
/// Mean over elements where mask is true; for rank-3 [C,H,W] inputs the [H,W]
/// mask broadcasts across channels (denominator C * count). Throws on an
/// all-false mask (degenerate input).
Var masked_mean(const Var& a, const std::vector<std::uint8_t>& mask);

// ---- structure -------------------------------------------------------------
/// Channel concatenation of two [C,H,W] tensors.
Var concat_channels(const Var& a, const Var& b);
/// [C,H,W] -> [C,H,W] with out[c,y,x] = in[c,y,max(x-shift,0)].
Var shift_x_clamp(const Var& a, int shift);
/// Stack D maps of identical [H,W] (or [1,H,W]) shape into [D,H,W].
Var stack_maps(const std::vector<Var>& slices);
/// Softmax along axis 0 of [D,H,W].
Var softmax_axis0(const Var& a);
/// out[y,x] = sum_d w[d] * a[d,y,x] for [D,H,W] input.
Var weighted_sum_axis0(const Var& a, const std::vector<double>& w);
/// Forward differences along x: [H,W] -> [H,W-1].
Var diff_x(const Var& a);
/// Forward differences along y: [H,W] -> [H-1,W].
Var diff_y(const Var& a);

// ---- filtering -------------------------------------------------------------
/// Symmetric reflect padding (edge duplicated: index -1 maps to 0) of [C,H,W].
Var reflect_pad2d(const Var& a, int pad);
/// Valid depthwise k x k mean filter on [C,H,W].
Var box_mean_valid(const Var& a, int k);
/// 2D convolution, zero padding. x:[Ci,H,W], w:[Co,Ci,kh,kw], b:[Co] (may be
/// undefined for no bias). Uses im2col + Eigen GEMM.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

// ---- resampling ------------------------------------------------------------
/// Bilinear upsampling of an [H,W] map by an integer factor, half-pixel
/// centers, border clamped.
Var upsample_bilinear(const Var& a, int factor);
/// Horizontal backward warp: out[c,y,x] = src[c,y, x - disp[y,x]] with
/// bilinear sampling and border clamp. Differentiable in both src and disp.
/// src:[C,H,W], disp:[H,W].
Var warp_x(const Var& src, const Var& disp);

/// In-bounds mask of the warp above: true where x - disp[y,x] lies in [0, W-1].
std::vector<std::uint8_t> warp_x_in_bounds(const Tensor& disp);

}  // namespace asymstereo
