#include "qeno/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace qeno {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_seq{0};

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw DimensionError("tensor extent must be positive, got " + std::to_string(e));
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

void check_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a->shape_str() + " vs " +
                             b->shape_str());
    }
}

// Splits a shape at `axis` into [outer, extent, inner] block sizes.
struct AxisView {
    std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const std::vector<int>& shape, int axis) {
    AxisView v;
    for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
        if (i < axis)
            v.outer *= static_cast<std::size_t>(shape[i]);
        else if (i == axis)
            v.extent = static_cast<std::size_t>(shape[i]);
        else
            v.inner *= static_cast<std::size_t>(shape[i]);
    }
    return v;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

TensorPtr Tensor::create(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    std::size_t n = shape_numel(shape);
    t->shape = std::move(shape);
    t->data.assign(n, 0.0);
    t->requires_grad = requires_grad;
    t->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return t;
}

TensorPtr Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    if (values.size() != n) {
        throw DimensionError("tensor data length " + std::to_string(values.size()) +
                             " does not match shape product " + std::to_string(n));
    }
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    t->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return t;
}

TensorPtr Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    auto t = create(std::move(shape), requires_grad);
    std::fill(t->data.begin(), t->data.end(), value);
    return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

int Tensor::extent(int axis) const {
    if (axis < 0 || axis >= rank()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                             std::to_string(rank()));
    }
    return shape[static_cast<std::size_t>(axis)];
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() requires a size-1 tensor, shape " + shape_str());
    return data[0];
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

TensorPtr make_node(const char* op, std::vector<int> shape, std::vector<TensorPtr> parents) {
    auto t = Tensor::create(std::move(shape), false);
    t->op = op;
    bool track = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) {
            if (p->requires_grad) {
                track = true;
                break;
            }
        }
    }
    if (track) {
        t->requires_grad = true;
        t->parents = std::move(parents);
    }
    return t;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("add", a, b);
    auto y = make_node("add", a->shape, {a, b});
    const std::size_t n = y->size();
    for (std::size_t i = 0; i < n; ++i) y->data[i] = a->data[i] + b->data[i];
    if (y->requires_grad) {
        Tensor *yr = y.get(), *ar = a.get(), *br = b.get();
        y->backward_fn = [yr, ar, br, n] {
            if (ar->requires_grad) {
                ar->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) ar->grad[i] += yr->grad[i];
            }
            if (br->requires_grad) {
                br->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) br->grad[i] += yr->grad[i];
            }
        };
    }
    return y;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("sub", a, b);
    auto y = make_node("sub", a->shape, {a, b});
    const std::size_t n = y->size();
    for (std::size_t i = 0; i < n; ++i) y->data[i] = a->data[i] - b->data[i];
    if (y->requires_grad) {
        Tensor *yr = y.get(), *ar = a.get(), *br = b.get();
        y->backward_fn = [yr, ar, br, n] {
            if (ar->requires_grad) {
                ar->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) ar->grad[i] += yr->grad[i];
            }
            if (br->requires_grad) {
                br->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) br->grad[i] -= yr->grad[i];
            }
        };
    }
    return y;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("mul", a, b);
    auto y = make_node("mul", a->shape, {a, b});
    const std::size_t n = y->size();
    for (std::size_t i = 0; i < n; ++i) y->data[i] = a->data[i] * b->data[i];
    if (y->requires_grad) {
        Tensor *yr = y.get(), *ar = a.get(), *br = b.get();
        y->backward_fn = [yr, ar, br, n] {
            if (ar->requires_grad) {
                ar->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) ar->grad[i] += yr->grad[i] * br->data[i];
            }
            if (br->requires_grad) {
                br->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) br->grad[i] += yr->grad[i] * ar->data[i];
            }
        };
    }
    return y;
}

TensorPtr scale(const TensorPtr& x, double c) {
    auto y = make_node("scale", x->shape, {x});
    const std::size_t n = y->size();
    for (std::size_t i = 0; i < n; ++i) y->data[i] = x->data[i] * c;
    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get();
        y->backward_fn = [yr, xr, c, n] {
            xr->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) xr->grad[i] += yr->grad[i] * c;
        };
    }
    return y;
}

TensorPtr add_scalar(const TensorPtr& x, double c) {
    auto y = make_node("add_scalar", x->shape, {x});
    const std::size_t n = y->size();
    for (std::size_t i = 0; i < n; ++i) y->data[i] = x->data[i] + c;
    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get();
        y->backward_fn = [yr, xr, n] {
            xr->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) xr->grad[i] += yr->grad[i];
        };
    }
    return y;
}

namespace {

template <typename Fwd, typename Bwd>
TensorPtr unary_op(const char* op, const TensorPtr& x, Fwd fwd, Bwd dydx_from_xy) {
    auto y = make_node(op, x->shape, {x});
    const std::size_t n = y->size();
    for (std::size_t i = 0; i < n; ++i) y->data[i] = fwd(x->data[i]);
    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get();
        y->backward_fn = [yr, xr, dydx_from_xy, n] {
            xr->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                xr->grad[i] += yr->grad[i] * dydx_from_xy(xr->data[i], yr->data[i]);
        };
    }
    return y;
}

}  // namespace

TensorPtr sigmoid(const TensorPtr& x) {
    return unary_op(
        "sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

TensorPtr tanh_op(const TensorPtr& x) {
    return unary_op(
        "tanh", x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

TensorPtr relu(const TensorPtr& x) {
    return unary_op(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

TensorPtr leaky_relu(const TensorPtr& x, double slope) {
    return unary_op(
        "leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

TensorPtr clamp01(const TensorPtr& x) {
    // Subgradient: pass-through strictly inside (0,1), zero outside.
    return unary_op(
        "clamp01", x, [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); },
        [](double v, double) { return (v > 0.0 && v < 1.0) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// structural
// ---------------------------------------------------------------------------

TensorPtr concat(const std::vector<TensorPtr>& xs, int axis) {
    if (xs.empty()) throw DimensionError("concat: empty input list");
    const int r = xs[0]->rank();
    if (axis < 0 || axis >= r) throw DimensionError("concat: axis " + std::to_string(axis) + " out of range");
    int total = 0;
    for (const auto& x : xs) {
        if (x->rank() != r) throw DimensionError("concat: rank mismatch");
        for (int i = 0; i < r; ++i) {
            if (i != axis && x->shape[i] != xs[0]->shape[i]) {
                throw DimensionError("concat: extent mismatch on axis " + std::to_string(i) + ": " +
                                     x->shape_str() + " vs " + xs[0]->shape_str());
            }
        }
        total += x->extent(axis);
    }
    std::vector<int> out_shape = xs[0]->shape;
    out_shape[static_cast<std::size_t>(axis)] = total;
    auto y = make_node("concat", out_shape, xs);

    const AxisView ov = axis_view(out_shape, axis);
    std::size_t off = 0;
    for (const auto& x : xs) {
        const AxisView xv = axis_view(x->shape, axis);
        for (std::size_t o = 0; o < xv.outer; ++o) {
            const double* src = x->data.data() + o * xv.extent * xv.inner;
            double* dst = y->data.data() + (o * ov.extent + off) * ov.inner;
            std::memcpy(dst, src, xv.extent * xv.inner * sizeof(double));
        }
        off += xv.extent;
    }

    if (y->requires_grad) {
        Tensor* yr = y.get();
        std::vector<Tensor*> parts;
        parts.reserve(xs.size());
        for (const auto& x : xs) parts.push_back(x.get());
        y->backward_fn = [yr, parts, axis] {
            const AxisView yv = axis_view(yr->shape, axis);
            std::size_t off2 = 0;
            for (Tensor* p : parts) {
                const AxisView pv = axis_view(p->shape, axis);
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t o = 0; o < pv.outer; ++o) {
                        const double* src = yr->grad.data() + (o * yv.extent + off2) * yv.inner;
                        double* dst = p->grad.data() + o * pv.extent * pv.inner;
                        const std::size_t n = pv.extent * pv.inner;
                        for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
                    }
                }
                off2 += pv.extent;
            }
        };
    }
    return y;
}

TensorPtr slice(const TensorPtr& x, int axis, int start, int len) {
    if (axis < 0 || axis >= x->rank()) throw DimensionError("slice: axis out of range");
    if (start < 0 || len <= 0 || start + len > x->extent(axis)) {
        throw DimensionError("slice: range [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") exceeds extent " +
                             std::to_string(x->extent(axis)) + " on axis " + std::to_string(axis));
    }
    std::vector<int> out_shape = x->shape;
    out_shape[static_cast<std::size_t>(axis)] = len;
    auto y = make_node("slice", out_shape, {x});

    const AxisView xv = axis_view(x->shape, axis);
    const std::size_t l = static_cast<std::size_t>(len), s0 = static_cast<std::size_t>(start);
    for (std::size_t o = 0; o < xv.outer; ++o) {
        const double* src = x->data.data() + (o * xv.extent + s0) * xv.inner;
        double* dst = y->data.data() + o * l * xv.inner;
        std::memcpy(dst, src, l * xv.inner * sizeof(double));
    }

    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get();
        y->backward_fn = [yr, xr, axis, s0, l] {
            const AxisView xv2 = axis_view(xr->shape, axis);
            xr->ensure_grad();
            for (std::size_t o = 0; o < xv2.outer; ++o) {
                const double* src = yr->grad.data() + o * l * xv2.inner;
                double* dst = xr->grad.data() + (o * xv2.extent + s0) * xv2.inner;
                const std::size_t n = l * xv2.inner;
                for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
            }
        };
    }
    return y;
}

TensorPtr reshape(const TensorPtr& x, std::vector<int> new_shape) {
    std::size_t n = shape_numel(new_shape);
    if (n != x->size()) {
        throw DimensionError("reshape: element count mismatch: " + std::to_string(x->size()) +
                             " -> " + std::to_string(n));
    }
    auto y = make_node("reshape", std::move(new_shape), {x});
    y->data = x->data;
    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get();
        y->backward_fn = [yr, xr] {
            xr->ensure_grad();
            const std::size_t n2 = xr->size();
            for (std::size_t i = 0; i < n2; ++i) xr->grad[i] += yr->grad[i];
        };
    }
    return y;
}

TensorPtr flatten(const TensorPtr& x) {
    if (x->rank() < 1) throw DimensionError("flatten: rank-0 tensor");
    int b = x->shape[0];
    int rest = static_cast<int>(x->size()) / b;
    return reshape(x, {b, rest});
}

TensorPtr mean_axes(const TensorPtr& x, std::vector<int> axes) {
    const int r = x->rank();
    std::vector<bool> reduced(static_cast<std::size_t>(r), false);
    std::size_t count = 1;
    for (int a : axes) {
        if (a < 0 || a >= r) throw DimensionError("mean_axes: axis " + std::to_string(a) + " out of range");
        if (reduced[static_cast<std::size_t>(a)]) throw DimensionError("mean_axes: duplicate axis");
        reduced[static_cast<std::size_t>(a)] = true;
        count *= static_cast<std::size_t>(x->shape[static_cast<std::size_t>(a)]);
    }
    std::vector<int> out_shape;
    for (int i = 0; i < r; ++i) {
        if (!reduced[static_cast<std::size_t>(i)]) out_shape.push_back(x->shape[static_cast<std::size_t>(i)]);
    }
    if (out_shape.empty()) out_shape.push_back(1);

    auto y = make_node("mean_pool", out_shape, {x});

    // Flat index of x -> flat index of the reduced output, precomputed once
    // and shared with the backward pass.
    std::vector<std::size_t> xstride(static_cast<std::size_t>(r), 1);
    for (int i = r - 2; i >= 0; --i)
        xstride[static_cast<std::size_t>(i)] =
            xstride[static_cast<std::size_t>(i) + 1] * static_cast<std::size_t>(x->shape[static_cast<std::size_t>(i) + 1]);
    std::vector<std::size_t> ostride(static_cast<std::size_t>(r), 0);
    std::size_t run = 1;
    for (int i = r - 1; i >= 0; --i) {
        if (!reduced[static_cast<std::size_t>(i)]) {
            ostride[static_cast<std::size_t>(i)] = run;
            run *= static_cast<std::size_t>(x->shape[static_cast<std::size_t>(i)]);
        }
    }

    const std::size_t n = x->size();
    auto out_index = std::make_shared<std::vector<std::size_t>>(n, 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
        std::size_t oi = 0;
        for (int i = 0; i < r; ++i) {
            std::size_t idx = (flat / xstride[static_cast<std::size_t>(i)]) %
                              static_cast<std::size_t>(x->shape[static_cast<std::size_t>(i)]);
            oi += idx * ostride[static_cast<std::size_t>(i)];
        }
        (*out_index)[flat] = oi;
    }
    for (std::size_t i = 0; i < n; ++i) y->data[(*out_index)[i]] += x->data[i];
    const double inv = 1.0 / static_cast<double>(count);
    for (double& v : y->data) v *= inv;

    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get();
        y->backward_fn = [yr, xr, out_index, inv, n] {
            xr->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) xr->grad[i] += yr->grad[(*out_index)[i]] * inv;
        };
    }
    return y;
}

TensorPtr mean_all(const TensorPtr& x) {
    auto y = make_node("mean", {1}, {x});
    double acc = 0.0;
    for (double v : x->data) acc += v;
    const double inv = 1.0 / static_cast<double>(x->size());
    y->data[0] = acc * inv;
    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get();
        y->backward_fn = [yr, xr, inv] {
            xr->ensure_grad();
            const double g = yr->grad[0] * inv;
            for (double& gv : xr->grad) gv += g;
        };
    }
    return y;
}

TensorPtr sum_all(const TensorPtr& x) {
    auto y = make_node("sum", {1}, {x});
    double acc = 0.0;
    for (double v : x->data) acc += v;
    y->data[0] = acc;
    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get();
        y->backward_fn = [yr, xr] {
            xr->ensure_grad();
            const double g = yr->grad[0];
            for (double& gv : xr->grad) gv += g;
        };
    }
    return y;
}

TensorPtr rowwise_scale(const TensorPtr& x, const TensorPtr& s) {
    if (x->rank() != 2) throw DimensionError("rowwise_scale: x must be [B,D], got " + x->shape_str());
    const int B = x->shape[0], D = x->shape[1];
    const std::size_t sn = s->size();
    if (sn != static_cast<std::size_t>(B)) {
        throw DimensionError("rowwise_scale: s has " + std::to_string(sn) + " entries for batch " +
                             std::to_string(B));
    }
    auto y = make_node("rowwise_scale", x->shape, {x, s});
    for (int b = 0; b < B; ++b) {
        const double sv = s->data[static_cast<std::size_t>(b)];
        const double* xr = x->data.data() + static_cast<std::size_t>(b) * D;
        double* yr = y->data.data() + static_cast<std::size_t>(b) * D;
        for (int d = 0; d < D; ++d) yr[d] = xr[d] * sv;
    }
    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get(), *sr = s.get();
        y->backward_fn = [yr, xr, sr, B, D] {
            if (xr->requires_grad) {
                xr->ensure_grad();
                for (int b = 0; b < B; ++b) {
                    const double sv = sr->data[static_cast<std::size_t>(b)];
                    const double* gy = yr->grad.data() + static_cast<std::size_t>(b) * D;
                    double* gx = xr->grad.data() + static_cast<std::size_t>(b) * D;
                    for (int d = 0; d < D; ++d) gx[d] += gy[d] * sv;
                }
            }
            if (sr->requires_grad) {
                sr->ensure_grad();
                for (int b = 0; b < B; ++b) {
                    const double* gy = yr->grad.data() + static_cast<std::size_t>(b) * D;
                    const double* xv = xr->data.data() + static_cast<std::size_t>(b) * D;
                    double acc = 0.0;
                    for (int d = 0; d < D; ++d) acc += gy[d] * xv[d];
                    sr->grad[static_cast<std::size_t>(b)] += acc;
                }
            }
        };
    }
    return y;
}

TensorPtr bias_channel(const TensorPtr& x, const TensorPtr& b) {
    if (x->rank() < 2) throw DimensionError("bias_channel: x rank must be >= 2");
    const int C = x->shape[1];
    if (b->rank() != 1 || b->shape[0] != C) {
        throw DimensionError("bias_channel: bias " + b->shape_str() + " does not match channel axis " +
                             std::to_string(C));
    }
    auto y = make_node("bias_channel", x->shape, {x, b});
    const AxisView v = axis_view(x->shape, 1);
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t c = 0; c < v.extent; ++c) {
            const double bv = b->data[c];
            const double* src = x->data.data() + (o * v.extent + c) * v.inner;
            double* dst = y->data.data() + (o * v.extent + c) * v.inner;
            for (std::size_t i = 0; i < v.inner; ++i) dst[i] = src[i] + bv;
        }
    }
    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get(), *br = b.get();
        y->backward_fn = [yr, xr, br, v] {
            if (xr->requires_grad) {
                xr->ensure_grad();
                const std::size_t n = yr->size();
                for (std::size_t i = 0; i < n; ++i) xr->grad[i] += yr->grad[i];
            }
            if (br->requires_grad) {
                br->ensure_grad();
                for (std::size_t o = 0; o < v.outer; ++o) {
                    for (std::size_t c = 0; c < v.extent; ++c) {
                        const double* g = yr->grad.data() + (o * v.extent + c) * v.inner;
                        double acc = 0.0;
                        for (std::size_t i = 0; i < v.inner; ++i) acc += g[i];
                        br->grad[c] += acc;
                    }
                }
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

TensorPtr linear(const TensorPtr& x, const TensorPtr& W, const TensorPtr& b) {
    if (x->rank() != 2) throw DimensionError("linear: x must be [B,n], got " + x->shape_str());
    if (W->rank() != 2) throw DimensionError("linear: W must be [m,n], got " + W->shape_str());
    const int B = x->shape[0], n = x->shape[1], m = W->shape[0];
    if (W->shape[1] != n) {
        throw DimensionError("linear: inner dimension mismatch: x " + x->shape_str() + " vs W " +
                             W->shape_str());
    }
    if (b->rank() != 1 || b->shape[0] != m) {
        throw DimensionError("linear: bias " + b->shape_str() + " does not match rows " +
                             std::to_string(m));
    }
    auto y = make_node("linear", {B, m}, {x, W, b});
    for (int bi = 0; bi < B; ++bi) {
        const double* xr = x->data.data() + static_cast<std::size_t>(bi) * n;
        double* yr = y->data.data() + static_cast<std::size_t>(bi) * m;
        for (int mi = 0; mi < m; ++mi) {
            const double* wr = W->data.data() + static_cast<std::size_t>(mi) * n;
            double acc = b->data[static_cast<std::size_t>(mi)];
            for (int ni = 0; ni < n; ++ni) acc += xr[ni] * wr[ni];
            yr[mi] = acc;
        }
    }
    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get(), *Wr = W.get(), *br = b.get();
        y->backward_fn = [yr, xr, Wr, br, B, n, m] {
            if (xr->requires_grad) {
                xr->ensure_grad();
                for (int bi = 0; bi < B; ++bi) {
                    const double* gy = yr->grad.data() + static_cast<std::size_t>(bi) * m;
                    double* gx = xr->grad.data() + static_cast<std::size_t>(bi) * n;
                    for (int mi = 0; mi < m; ++mi) {
                        const double g = gy[mi];
                        const double* wr = Wr->data.data() + static_cast<std::size_t>(mi) * n;
                        for (int ni = 0; ni < n; ++ni) gx[ni] += g * wr[ni];
                    }
                }
            }
            if (Wr->requires_grad) {
                Wr->ensure_grad();
                for (int bi = 0; bi < B; ++bi) {
                    const double* gy = yr->grad.data() + static_cast<std::size_t>(bi) * m;
                    const double* xv = xr->data.data() + static_cast<std::size_t>(bi) * n;
                    for (int mi = 0; mi < m; ++mi) {
                        const double g = gy[mi];
                        double* gw = Wr->grad.data() + static_cast<std::size_t>(mi) * n;
                        for (int ni = 0; ni < n; ++ni) gw[ni] += g * xv[ni];
                    }
                }
            }
            if (br->requires_grad) {
                br->ensure_grad();
                for (int bi = 0; bi < B; ++bi) {
                    const double* gy = yr->grad.data() + static_cast<std::size_t>(bi) * m;
                    for (int mi = 0; mi < m; ++mi) br->grad[static_cast<std::size_t>(mi)] += gy[mi];
                }
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// convolutions
// ---------------------------------------------------------------------------

namespace {

// Output-row range for which in = out*stride - pad + koff stays in [0, limit).
inline void valid_range(int koff, int pad, int stride, int limit, int out_extent, int& lo, int& hi) {
    int num = pad - koff;
    lo = num <= 0 ? 0 : (num + stride - 1) / stride;
    int top = limit - 1 + pad - koff;
    hi = top < 0 ? -1 : std::min(out_extent - 1, top / stride);
}

struct Conv2dDims {
    int B, Cin, H, W, Cout, kh, kw, OH, OW;
};

Conv2dDims conv2d_dims(const TensorPtr& x, const TensorPtr& k, int stride, int pad) {
    if (x->rank() != 4) throw DimensionError("conv2d: input must be [B,Cin,H,W], got " + x->shape_str());
    if (k->rank() != 4) throw DimensionError("conv2d: kernel must be [Cout,Cin,kh,kw], got " + k->shape_str());
    if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
    if (pad < 0) throw ContractError("conv2d: pad must be >= 0");
    Conv2dDims d{};
    d.B = x->shape[0];
    d.Cin = x->shape[1];
    d.H = x->shape[2];
    d.W = x->shape[3];
    d.Cout = k->shape[0];
    d.kh = k->shape[2];
    d.kw = k->shape[3];
    if (k->shape[1] != d.Cin) {
        throw DimensionError("conv2d: channel axis mismatch: input has " + std::to_string(d.Cin) +
                             " channels, kernel expects " + std::to_string(k->shape[1]));
    }
    if (d.H + 2 * pad < d.kh || d.W + 2 * pad < d.kw) {
        throw DimensionError("conv2d: kernel " + std::to_string(d.kh) + "x" + std::to_string(d.kw) +
                             " exceeds padded input " + std::to_string(d.H + 2 * pad) + "x" +
                             std::to_string(d.W + 2 * pad));
    }
    d.OH = (d.H + 2 * pad - d.kh) / stride + 1;
    d.OW = (d.W + 2 * pad - d.kw) / stride + 1;
    return d;
}

// ---- stride-1 row kernels: one pass applies a full kernel row ----
// y[ow] += sum_j w[j] * x[ow - p + j], out-of-range x indices skipped.
template <int KW>
void row_corr_t(const double* __restrict__ x, double* __restrict__ y, const double* __restrict__ w,
                int W, int OW, int p) {
    int lo = p > 0 ? p : 0;
    int hi = std::min(W - KW + p, OW - 1);
    for (int ow = 0; ow < lo && ow < OW; ++ow) {
        double acc = y[ow];
        for (int j = 0; j < KW; ++j) {
            const int iw = ow - p + j;
            if (iw >= 0 && iw < W) acc += w[j] * x[iw];
        }
        y[ow] = acc;
    }
    const double* xr = x + (lo - p);
    for (int ow = lo; ow <= hi; ++ow, ++xr) {
        double acc = y[ow];
        for (int j = 0; j < KW; ++j) acc += w[j] * xr[j];
        y[ow] = acc;
    }
    for (int ow = hi + 1; ow < OW; ++ow) {
        if (ow < lo) continue;
        double acc = y[ow];
        for (int j = 0; j < KW; ++j) {
            const int iw = ow - p + j;
            if (iw >= 0 && iw < W) acc += w[j] * x[iw];
        }
        y[ow] = acc;
    }
}

void row_corr_any(const double* __restrict__ x, double* __restrict__ y,
                  const double* __restrict__ w, int kw, int W, int OW, int p) {
    for (int ow = 0; ow < OW; ++ow) {
        double acc = y[ow];
        for (int j = 0; j < kw; ++j) {
            const int iw = ow - p + j;
            if (iw >= 0 && iw < W) acc += w[j] * x[iw];
        }
        y[ow] = acc;
    }
}

inline void row_corr(const double* x, double* y, const double* w, int kw, int W, int OW, int p) {
    switch (kw) {
        case 1: row_corr_t<1>(x, y, w, W, OW, p); break;
        case 3: row_corr_t<3>(x, y, w, W, OW, p); break;
        case 5: row_corr_t<5>(x, y, w, W, OW, p); break;
        case 7: row_corr_t<7>(x, y, w, W, OW, p); break;
        default: row_corr_any(x, y, w, kw, W, OW, p); break;
    }
}

// acc[j] += sum_ow y[ow] * x[ow - p + j] for the whole kernel row at once.
template <int KW>
void row_dot_t(const double* __restrict__ x, const double* __restrict__ y, double* __restrict__ acc,
               int W, int OW, int p) {
    int lo = p > 0 ? p : 0;
    int hi = std::min(W - KW + p, OW - 1);
    double local[KW] = {};
    for (int ow = 0; ow < lo && ow < OW; ++ow) {
        for (int j = 0; j < KW; ++j) {
            const int iw = ow - p + j;
            if (iw >= 0 && iw < W) local[j] += y[ow] * x[iw];
        }
    }
    const double* xr = x + (lo - p);
    for (int ow = lo; ow <= hi; ++ow, ++xr) {
        const double yv = y[ow];
        for (int j = 0; j < KW; ++j) local[j] += yv * xr[j];
    }
    for (int ow = hi + 1; ow < OW; ++ow) {
        if (ow < lo) continue;
        for (int j = 0; j < KW; ++j) {
            const int iw = ow - p + j;
            if (iw >= 0 && iw < W) local[j] += y[ow] * x[iw];
        }
    }
    for (int j = 0; j < KW; ++j) acc[j] += local[j];
}

void row_dot_any(const double* x, const double* y, double* acc, int kw, int W, int OW, int p) {
    for (int ow = 0; ow < OW; ++ow) {
        for (int j = 0; j < kw; ++j) {
            const int iw = ow - p + j;
            if (iw >= 0 && iw < W) acc[j] += y[ow] * x[iw];
        }
    }
}

inline void row_dot(const double* x, const double* y, double* acc, int kw, int W, int OW, int p) {
    switch (kw) {
        case 1: row_dot_t<1>(x, y, acc, W, OW, p); break;
        case 3: row_dot_t<3>(x, y, acc, W, OW, p); break;
        case 5: row_dot_t<5>(x, y, acc, W, OW, p); break;
        case 7: row_dot_t<7>(x, y, acc, W, OW, p); break;
        default: row_dot_any(x, y, acc, kw, W, OW, p); break;
    }
}

constexpr int kMaxKernel = 16;

// Taps reversed; the scatter adjoint of a stride-1 row correlation is a row
// correlation with flipped taps and pad kw-1-p.
inline void flip_taps(const double* w, int kw, double* out) {
    for (int j = 0; j < kw; ++j) out[j] = w[kw - 1 - j];
}

// y[oh,ow] += w * x[oh*s-p+ki, ow*s-p+kj], bounds hoisted out of inner loops.
void conv2d_plane_acc(const double* __restrict__ x, double* __restrict__ y, double w, int H, int W, int OH, int OW, int s,
                      int p, int ki, int kj) {
    int oh_lo, oh_hi, ow_lo, ow_hi;
    valid_range(ki, p, s, H, OH, oh_lo, oh_hi);
    valid_range(kj, p, s, W, OW, ow_lo, ow_hi);
    if (oh_hi < oh_lo || ow_hi < ow_lo) return;
    const int n = ow_hi - ow_lo + 1;
    for (int oh = oh_lo; oh <= oh_hi; ++oh) {
        const double* xr = x + static_cast<std::size_t>(oh * s - p + ki) * W + (ow_lo * s - p + kj);
        double* yr = y + static_cast<std::size_t>(oh) * OW + ow_lo;
        if (s == 1) {
            for (int t = 0; t < n; ++t) yr[t] += w * xr[t];
        } else {
            for (int t = 0; t < n; ++t) yr[t] += w * xr[static_cast<std::size_t>(t) * s];
        }
    }
}

// Adjoint of conv2d_plane_acc: x[oh*s-p+ki, ow*s-p+kj] += w * y[oh,ow].
void conv2d_plane_scatter(double* __restrict__ x, const double* __restrict__ y, double w, int H, int W, int OH, int OW, int s,
                          int p, int ki, int kj) {
    int oh_lo, oh_hi, ow_lo, ow_hi;
    valid_range(ki, p, s, H, OH, oh_lo, oh_hi);
    valid_range(kj, p, s, W, OW, ow_lo, ow_hi);
    if (oh_hi < oh_lo || ow_hi < ow_lo) return;
    const int n = ow_hi - ow_lo + 1;
    for (int oh = oh_lo; oh <= oh_hi; ++oh) {
        double* xr = x + static_cast<std::size_t>(oh * s - p + ki) * W + (ow_lo * s - p + kj);
        const double* yr = y + static_cast<std::size_t>(oh) * OW + ow_lo;
        if (s == 1) {
            for (int t = 0; t < n; ++t) xr[t] += w * yr[t];
        } else {
            for (int t = 0; t < n; ++t) xr[static_cast<std::size_t>(t) * s] += w * yr[t];
        }
    }
}

// Dot of y[oh,ow] with x at the kernel offset; used for kernel gradients.
double conv2d_plane_dot(const double* __restrict__ x, const double* __restrict__ y, int H, int W, int OH, int OW, int s, int p,
                        int ki, int kj) {
    int oh_lo, oh_hi, ow_lo, ow_hi;
    valid_range(ki, p, s, H, OH, oh_lo, oh_hi);
    valid_range(kj, p, s, W, OW, ow_lo, ow_hi);
    if (oh_hi < oh_lo || ow_hi < ow_lo) return 0.0;
    const int n = ow_hi - ow_lo + 1;
    double acc = 0.0;
    for (int oh = oh_lo; oh <= oh_hi; ++oh) {
        const double* xr = x + static_cast<std::size_t>(oh * s - p + ki) * W + (ow_lo * s - p + kj);
        const double* yr = y + static_cast<std::size_t>(oh) * OW + ow_lo;
        if (s == 1) {
            for (int t = 0; t < n; ++t) acc += yr[t] * xr[t];
        } else {
            for (int t = 0; t < n; ++t) acc += yr[t] * xr[static_cast<std::size_t>(t) * s];
        }
    }
    return acc;
}

}  // namespace

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& k, int stride, int pad) {
    const Conv2dDims d = conv2d_dims(x, k, stride, pad);
    auto y = make_node("conv2d", {d.B, d.Cout, d.OH, d.OW}, {x, k});

    const std::size_t xplane = static_cast<std::size_t>(d.H) * d.W;
    const std::size_t yplane = static_cast<std::size_t>(d.OH) * d.OW;
    for (int b = 0; b < d.B; ++b) {
        for (int co = 0; co < d.Cout; ++co) {
            double* yp = y->data.data() + (static_cast<std::size_t>(b) * d.Cout + co) * yplane;
            for (int ci = 0; ci < d.Cin; ++ci) {
                const double* xp = x->data.data() + (static_cast<std::size_t>(b) * d.Cin + ci) * xplane;
                const double* kp =
                    k->data.data() + (static_cast<std::size_t>(co) * d.Cin + ci) * d.kh * d.kw;
                for (int ki = 0; ki < d.kh; ++ki)
                    for (int kj = 0; kj < d.kw; ++kj)
                        conv2d_plane_acc(xp, yp, kp[ki * d.kw + kj], d.H, d.W, d.OH, d.OW, stride,
                                         pad, ki, kj);
            }
        }
    }

    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get(), *kr = k.get();
        y->backward_fn = [yr, xr, kr, d, stride, pad, xplane, yplane] {
            if (xr->requires_grad) {
                xr->ensure_grad();
                for (int b = 0; b < d.B; ++b) {
                    for (int co = 0; co < d.Cout; ++co) {
                        const double* gy =
                            yr->grad.data() + (static_cast<std::size_t>(b) * d.Cout + co) * yplane;
                        for (int ci = 0; ci < d.Cin; ++ci) {
                            double* gx =
                                xr->grad.data() + (static_cast<std::size_t>(b) * d.Cin + ci) * xplane;
                            const double* kp = kr->data.data() +
                                               (static_cast<std::size_t>(co) * d.Cin + ci) * d.kh * d.kw;
                            for (int ki = 0; ki < d.kh; ++ki)
                                for (int kj = 0; kj < d.kw; ++kj)
                                    conv2d_plane_scatter(gx, gy, kp[ki * d.kw + kj], d.H, d.W, d.OH,
                                                         d.OW, stride, pad, ki, kj);
                        }
                    }
                }
            }
            if (kr->requires_grad) {
                kr->ensure_grad();
                for (int b = 0; b < d.B; ++b) {
                    for (int co = 0; co < d.Cout; ++co) {
                        const double* gy =
                            yr->grad.data() + (static_cast<std::size_t>(b) * d.Cout + co) * yplane;
                        for (int ci = 0; ci < d.Cin; ++ci) {
                            const double* xp =
                                xr->data.data() + (static_cast<std::size_t>(b) * d.Cin + ci) * xplane;
                            double* gk = kr->grad.data() +
                                         (static_cast<std::size_t>(co) * d.Cin + ci) * d.kh * d.kw;
                            for (int ki = 0; ki < d.kh; ++ki)
                                for (int kj = 0; kj < d.kw; ++kj)
                                    gk[ki * d.kw + kj] += conv2d_plane_dot(
                                        xp, gy, d.H, d.W, d.OH, d.OW, stride, pad, ki, kj);
                        }
                    }
                }
            }
        };
    }
    return y;
}

TensorPtr conv_transpose2d(const TensorPtr& x, const TensorPtr& k, int stride, int pad,
                           int output_pad) {
    if (x->rank() != 4) throw DimensionError("conv_transpose2d: input must be [B,C,H,W], got " + x->shape_str());
    if (k->rank() != 4) throw DimensionError("conv_transpose2d: kernel must be [Cin,Cout,kh,kw], got " + k->shape_str());
    if (stride < 1) throw ContractError("conv_transpose2d: stride must be >= 1");
    if (pad < 0) throw ContractError("conv_transpose2d: pad must be >= 0");
    if (output_pad < 0 || output_pad >= stride)
        throw ContractError("conv_transpose2d: output_pad must be in [0, stride)");
    const int B = x->shape[0], C0 = x->shape[1], H = x->shape[2], W = x->shape[3];
    if (k->shape[0] != C0) {
        throw DimensionError("conv_transpose2d: channel axis mismatch: input has " +
                             std::to_string(C0) + " channels, kernel expects " +
                             std::to_string(k->shape[0]));
    }
    const int C1 = k->shape[1], kh = k->shape[2], kw = k->shape[3];
    const int OH = (H - 1) * stride - 2 * pad + kh + output_pad;
    const int OW = (W - 1) * stride - 2 * pad + kw + output_pad;
    if (OH <= 0 || OW <= 0) throw DimensionError("conv_transpose2d: non-positive output extent");

    auto y = make_node("conv_transpose2d", {B, C1, OH, OW}, {x, k});
    const std::size_t xplane = static_cast<std::size_t>(H) * W;
    const std::size_t yplane = static_cast<std::size_t>(OH) * OW;

    // Scatter: y[c1, oh*s-p+ki, ow*s-p+kj] += x[c0, oh, ow] * k[c0,c1,ki,kj].
    for (int b = 0; b < B; ++b) {
        for (int c0 = 0; c0 < C0; ++c0) {
            const double* xp = x->data.data() + (static_cast<std::size_t>(b) * C0 + c0) * xplane;
            for (int c1 = 0; c1 < C1; ++c1) {
                double* yp = y->data.data() + (static_cast<std::size_t>(b) * C1 + c1) * yplane;
                const double* kp = k->data.data() + (static_cast<std::size_t>(c0) * C1 + c1) * kh * kw;
                for (int ki = 0; ki < kh; ++ki)
                    for (int kj = 0; kj < kw; ++kj)
                        conv2d_plane_scatter(yp, xp, kp[ki * kw + kj], OH, OW, H, W, stride, pad, ki,
                                             kj);
            }
        }
    }

    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get(), *kr = k.get();
        y->backward_fn = [yr, xr, kr, B, C0, C1, H, W, OH, OW, kh, kw, stride, pad, xplane, yplane] {
            if (xr->requires_grad) {
                xr->ensure_grad();
                for (int b = 0; b < B; ++b) {
                    for (int c0 = 0; c0 < C0; ++c0) {
                        double* gx = xr->grad.data() + (static_cast<std::size_t>(b) * C0 + c0) * xplane;
                        for (int c1 = 0; c1 < C1; ++c1) {
                            const double* gy =
                                yr->grad.data() + (static_cast<std::size_t>(b) * C1 + c1) * yplane;
                            const double* kp =
                                kr->data.data() + (static_cast<std::size_t>(c0) * C1 + c1) * kh * kw;
                            for (int ki = 0; ki < kh; ++ki)
                                for (int kj = 0; kj < kw; ++kj)
                                    conv2d_plane_acc(gy, gx, kp[ki * kw + kj], OH, OW, H, W, stride,
                                                     pad, ki, kj);
                        }
                    }
                }
            }
            if (kr->requires_grad) {
                kr->ensure_grad();
                for (int b = 0; b < B; ++b) {
                    for (int c0 = 0; c0 < C0; ++c0) {
                        const double* xp =
                            xr->data.data() + (static_cast<std::size_t>(b) * C0 + c0) * xplane;
                        for (int c1 = 0; c1 < C1; ++c1) {
                            const double* gy =
                                yr->grad.data() + (static_cast<std::size_t>(b) * C1 + c1) * yplane;
                            double* gk =
                                kr->grad.data() + (static_cast<std::size_t>(c0) * C1 + c1) * kh * kw;
                            for (int ki = 0; ki < kh; ++ki)
                                for (int kj = 0; kj < kw; ++kj)
                                    gk[ki * kw + kj] += conv2d_plane_dot(gy, xp, OH, OW, H, W, stride,
                                                                         pad, ki, kj);
                        }
                    }
                }
            }
        };
    }
    return y;
}

TensorPtr conv3d(const TensorPtr& x, const TensorPtr& k, int pad) {
    if (x->rank() != 5) throw DimensionError("conv3d: input must be [B,1,D,H,W], got " + x->shape_str());
    if (k->rank() != 5) throw DimensionError("conv3d: kernel must be [1,1,kd,kh,kw], got " + k->shape_str());
    if (x->shape[1] != 1 || k->shape[0] != 1 || k->shape[1] != 1)
        throw DimensionError("conv3d: single-channel volumes only");
    if (pad < 0) throw ContractError("conv3d: pad must be >= 0");
    const int B = x->shape[0], D = x->shape[2], H = x->shape[3], W = x->shape[4];
    const int kd = k->shape[2], kh = k->shape[3], kw = k->shape[4];
    if (D + 2 * pad < kd || H + 2 * pad < kh || W + 2 * pad < kw)
        throw DimensionError("conv3d: kernel exceeds padded input");
    const int OD = D + 2 * pad - kd + 1, OH = H + 2 * pad - kh + 1, OW = W + 2 * pad - kw + 1;

    auto y = make_node("conv3d", {B, 1, OD, OH, OW}, {x, k});
    const std::size_t xvol = static_cast<std::size_t>(D) * H * W;
    const std::size_t yvol = static_cast<std::size_t>(OD) * OH * OW;

    for (int b = 0; b < B; ++b) {
        const double* xv = x->data.data() + static_cast<std::size_t>(b) * xvol;
        double* yv = y->data.data() + static_cast<std::size_t>(b) * yvol;
        for (int kz = 0; kz < kd; ++kz) {
            int od_lo, od_hi;
            valid_range(kz, pad, 1, D, OD, od_lo, od_hi);
            for (int od = od_lo; od <= od_hi; ++od) {
                const double* xslab = xv + static_cast<std::size_t>(od - pad + kz) * H * W;
                double* yslab = yv + static_cast<std::size_t>(od) * OH * OW;
                for (int ki = 0; ki < kh; ++ki)
                    for (int kj = 0; kj < kw; ++kj)
                        conv2d_plane_acc(xslab, yslab, k->data[(static_cast<std::size_t>(kz) * kh + ki) * kw + kj],
                                          H, W, OH, OW, 1, pad, ki, kj);
            }
        }
    }

    if (y->requires_grad) {
        Tensor *yr = y.get(), *xr = x.get(), *kr = k.get();
        y->backward_fn = [yr, xr, kr, B, D, H, W, OD, OH, OW, kd, kh, kw, pad, xvol, yvol] {
            if (xr->requires_grad) {
                xr->ensure_grad();
                for (int b = 0; b < B; ++b) {
                    double* gx = xr->grad.data() + static_cast<std::size_t>(b) * xvol;
                    const double* gy = yr->grad.data() + static_cast<std::size_t>(b) * yvol;
                    for (int kz = 0; kz < kd; ++kz) {
                        int od_lo, od_hi;
                        valid_range(kz, pad, 1, D, OD, od_lo, od_hi);
                        for (int od = od_lo; od <= od_hi; ++od) {
                            double* gxs = gx + static_cast<std::size_t>(od - pad + kz) * H * W;
                            const double* gys = gy + static_cast<std::size_t>(od) * OH * OW;
                            for (int ki = 0; ki < kh; ++ki)
                                for (int kj = 0; kj < kw; ++kj)
                                    conv2d_plane_scatter(
                                        gxs, gys,
                                        kr->data[(static_cast<std::size_t>(kz) * kh + ki) * kw + kj],
                                        H, W, OH, OW, 1, pad, ki, kj);
                        }
                    }
                }
            }
            if (kr->requires_grad) {
                kr->ensure_grad();
                for (int b = 0; b < B; ++b) {
                    const double* xv = xr->data.data() + static_cast<std::size_t>(b) * xvol;
                    const double* gy = yr->grad.data() + static_cast<std::size_t>(b) * yvol;
                    for (int kz = 0; kz < kd; ++kz) {
                        int od_lo, od_hi;
                        valid_range(kz, pad, 1, D, OD, od_lo, od_hi);
                        for (int od = od_lo; od <= od_hi; ++od) {
                            const double* xslab = xv + static_cast<std::size_t>(od - pad + kz) * H * W;
                            const double* gys = gy + static_cast<std::size_t>(od) * OH * OW;
                            for (int ki = 0; ki < kh; ++ki)
                                for (int kj = 0; kj < kw; ++kj)
                                    kr->grad[(static_cast<std::size_t>(kz) * kh + ki) * kw + kj] +=
                                        conv2d_plane_dot(xslab, gys, H, W, OH, OW, 1, pad, ki, kj);
                        }
                    }
                }
            }
        };
    }
    return y;
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void backward(const TensorPtr& loss) {
    if (loss->size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + loss->shape_str());
    }
    if (!loss->requires_grad) {
        throw ContractError("backward: loss is not connected to any requires_grad leaf");
    }

    // Iterative post-order DFS; parents precede children in `order`.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    std::vector<std::pair<Tensor*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor* p = node->parents[next].get();
            ++next;
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn();
        }
    }
}

}  // namespace qeno
