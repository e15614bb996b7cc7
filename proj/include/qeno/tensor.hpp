#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qeno/errors.hpp"

namespace qeno {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Reverse-mode autodiff is on by default; evaluation paths that never call
// backward() can disable recording to save time and memory.
bool grad_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

/// Dense row-major f64 tensor. Doubles as a node in the recorded operation
/// graph: `parents` + `backward_fn` push this node's grad into its inputs.
/// Tensors are immutable after forward creation except for grad buffers.
struct Tensor : std::enable_shared_from_this<Tensor> {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized like data once touched by backward
    bool requires_grad = false;

    const char* op = "leaf";
    std::uint64_t seq = 0;  // creation order; used by non-finite diagnostics
    std::string name;       // set for named parameters
    std::vector<TensorPtr> parents;
    std::function<void()> backward_fn;

    static TensorPtr create(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr from(std::vector<int> shape, std::vector<double> values,
                          bool requires_grad = false);
    static TensorPtr full(std::vector<int> shape, double value,
                          bool requires_grad = false);
    static TensorPtr scalar(double value, bool requires_grad = false);

    std::size_t size() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int extent(int axis) const;
    double item() const;

    void ensure_grad();
    void zero_grad();
    bool all_finite() const;

    std::string shape_str() const;
};

// Creates an op-result node wired to `parents` (when grad recording is on and
// any parent requires grad). The caller fills `data` and sets `backward_fn`.
TensorPtr make_node(const char* op, std::vector<int> shape,
                    std::vector<TensorPtr> parents);

// ---------------- elementwise and structural ops ----------------
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& x, double c);        // explicit scalar*tensor
TensorPtr add_scalar(const TensorPtr& x, double c);
TensorPtr sigmoid(const TensorPtr& x);
TensorPtr tanh_op(const TensorPtr& x);
TensorPtr relu(const TensorPtr& x);
TensorPtr leaky_relu(const TensorPtr& x, double slope);
TensorPtr clamp01(const TensorPtr& x);
TensorPtr concat(const std::vector<TensorPtr>& xs, int axis);
TensorPtr slice(const TensorPtr& x, int axis, int start, int len);
TensorPtr reshape(const TensorPtr& x, std::vector<int> new_shape);
TensorPtr flatten(const TensorPtr& x);                // [B, rest]
TensorPtr mean_axes(const TensorPtr& x, std::vector<int> axes);
TensorPtr mean_all(const TensorPtr& x);
TensorPtr sum_all(const TensorPtr& x);

// y[b,d] = x[b,d] * s[b]; s is [B] or [B,1]. The one sanctioned broadcast
// beyond scalar*tensor (per-sample gating).
TensorPtr rowwise_scale(const TensorPtr& x, const TensorPtr& s);

// y = x + b broadcast over all but the channel axis (axis 1); b is [C].
TensorPtr bias_channel(const TensorPtr& x, const TensorPtr& b);

// ---------------- dense linear algebra ----------------
// y = x W^T + b; x: [B,n], W: [m,n], b: [m].
TensorPtr linear(const TensorPtr& x, const TensorPtr& W, const TensorPtr& b);

// ---------------- convolutions (cross-correlation, zero padding) ----------
// x: [B,Cin,H,W], k: [Cout,Cin,kh,kw] -> [B,Cout,H',W'],
// H' = floor((H+2p-kh)/s)+1.
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& k, int stride, int pad);

// Adjoint of conv2d: x: [B,C0,H,W], k: [C0,C1,kh,kw] -> [B,C1,H',W'],
// H' = (H-1)s - 2p + kh + output_pad.
TensorPtr conv_transpose2d(const TensorPtr& x, const TensorPtr& k, int stride,
                           int pad, int output_pad = 0);

// x: [B,1,D,H,W], k: [1,1,kd,kh,kw] -> [B,1,D',H',W'] (zero padding).
TensorPtr conv3d(const TensorPtr& x, const TensorPtr& k, int pad);

// ---------------- reverse pass ----------------
// Seeds d(loss)/d(loss)=1 and accumulates gradients into every
// requires_grad node reachable from `loss`. Gradients add up across calls;
// callers zero them between optimizer steps.
void backward(const TensorPtr& loss);

}  // namespace qeno
