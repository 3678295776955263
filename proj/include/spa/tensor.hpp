#pragma once

// Reverse-mode automatic differentiation over dense double tensors.
// Graphs are built dynamically as primitives are applied and freed when the
// last Tensor handle into them goes away; leaf tensors accumulate gradients
// across backward calls until zero_grad.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "spa/common.hpp"

namespace spa {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

namespace detail {
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}
inline std::int64_t next_node_id() {
    static std::atomic<std::int64_t> counter{0};
    return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

// Disables provenance recording within a scope; forwards built under the
// guard produce plain value tensors.
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;  // sized lazily, same length as values
    // provenance
    std::string op;  // empty for leaves
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::function<void(TensorNode&)> backward_fn;
    std::int64_t id = detail::next_node_id();

    std::size_t numel() const { return values.size(); }
    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
        if (shape_numel(shape) != values.size())
            throw SpaError("autodiff", "shape",
                           "tensor values length " + std::to_string(values.size()) +
                               " does not match shape " + shape_str(shape));
        auto n = std::make_shared<TensorNode>();
        n->shape = std::move(shape);
        n->values = std::move(values);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<double> v(shape_numel(shape), 0.0);
        return from(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        std::vector<double> v(shape_numel(shape), value);
        return from(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return from({1}, {value}, requires_grad);
    }

    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false) {
        std::vector<double> v(shape_numel(shape));
        for (double& x : v) x = rng.uniform(lo, hi);
        return from(std::move(shape), std::move(v), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->values.size(); }
    std::size_t rows() const { return node_->shape.size() == 2 ? node_->shape[0] : node_->shape[0]; }
    std::size_t cols() const { return node_->shape.size() == 2 ? node_->shape[1] : 1; }
    bool requires_grad() const { return node_->requires_grad; }
    std::int64_t id() const { return node_->id; }

    const std::vector<double>& values() const { return node_->values; }
    std::vector<double>& mutable_values() { return node_->values; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }

    double value() const {
        if (numel() != 1)
            throw SpaError("autodiff", "usage", "value() on non-scalar tensor " + shape_str(shape()));
        return node_->values[0];
    }

    void zero_grad() { node_->grad.clear(); }

    std::shared_ptr<TensorNode> node() const { return node_; }
    TensorNode* raw() const { return node_.get(); }

private:
    std::shared_ptr<TensorNode> node_;
};

namespace detail {

inline bool any_requires(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

// Creates the result node; provenance is recorded only when some input
// requires grad and grad mode is on.
inline Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                          const std::vector<Tensor>& inputs,
                          std::function<void(TensorNode&)> backward) {
    auto out = Tensor::from(std::move(shape), std::move(values));
    if (grad_mode() && any_requires(inputs)) {
        TensorNode* n = out.raw();
        n->requires_grad = true;
        n->op = op;
        n->inputs.reserve(inputs.size());
        for (const auto& t : inputs) n->inputs.push_back(t.node());
        n->backward_fn = std::move(backward);
    }
    return out;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw SpaError("autodiff", "shape",
                       std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                           shape_str(b.shape()) + " differ");
}

inline void check_rank2(const Tensor& t, const char* op) {
    if (t.shape().size() != 2)
        throw SpaError("autodiff", "shape", std::string(op) + ": expected rank-2, got " + shape_str(t.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// primitives
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<double> v(a.numel());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
    return detail::make_result(a.shape(), std::move(v), "add", {a, b}, [](TensorNode& n) {
        for (int k = 0; k < 2; ++k) {
            auto& in = *n.inputs[k];
            if (!in.requires_grad) continue;
            in.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    std::vector<double> v(a.numel());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] - bv[i];
    return detail::make_result(a.shape(), std::move(v), "sub", {a, b}, [](TensorNode& n) {
        auto& ia = *n.inputs[0];
        if (ia.requires_grad) {
            ia.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) ia.grad[i] += n.grad[i];
        }
        auto& ib = *n.inputs[1];
        if (ib.requires_grad) {
            ib.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) ib.grad[i] -= n.grad[i];
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<double> v(a.numel());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
    return detail::make_result(a.shape(), std::move(v), "mul", {a, b}, [](TensorNode& n) {
        auto& ia = *n.inputs[0];
        auto& ib = *n.inputs[1];
        if (ia.requires_grad) {
            ia.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) ia.grad[i] += n.grad[i] * ib.values[i];
        }
        if (ib.requires_grad) {
            ib.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) ib.grad[i] += n.grad[i] * ia.values[i];
        }
    });
}

inline Tensor smul(const Tensor& a, double c) {
    std::vector<double> v(a.numel());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * c;
    return detail::make_result(a.shape(), std::move(v), "smul", {a}, [c](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i] * c;
    });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::check_rank2(a, "matmul");
    detail::check_rank2(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    const std::size_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw SpaError("autodiff", "shape",
                       "matmul: inner dimensions " + std::to_string(k) + " vs " + std::to_string(k2));
    std::vector<double> v(m * n, 0.0);
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = v.data() + i * n;
        const double* arow = av + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double aik = arow[p];
            if (aik == 0.0) continue;
            const double* brow = bv + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return detail::make_result({m, n}, std::move(v), "matmul", {a, b}, [m, k, n](TensorNode& nd) {
        auto& ia = *nd.inputs[0];
        auto& ib = *nd.inputs[1];
        const double* g = nd.grad.data();
        if (ia.requires_grad) {
            ia.ensure_grad();
            // dA = dC * B^T
            const double* bv = ib.values.data();
            for (std::size_t i = 0; i < m; ++i) {
                double* garow = ia.grad.data() + i * k;
                const double* grow = g + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double* brow = bv + p * n;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    garow[p] += acc;
                }
            }
        }
        if (ib.requires_grad) {
            ib.ensure_grad();
            // dB = A^T * dC
            const double* av = ia.values.data();
            for (std::size_t i = 0; i < m; ++i) {
                const double* arow = av + i * k;
                const double* grow = g + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = arow[p];
                    if (aip == 0.0) continue;
                    double* gbrow = ib.grad.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                }
            }
        }
    });
}

inline Tensor transpose(const Tensor& a) {
    detail::check_rank2(a, "transpose");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> v(r * c);
    const auto& av = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) v[j * r + i] = av[i * c + j];
    return detail::make_result({c, r}, std::move(v), "transpose", {a}, [r, c](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) in.grad[i * c + j] += n.grad[j * r + i];
    });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw SpaError("autodiff", "shape",
                       "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    std::vector<double> v = a.values();
    return detail::make_result(std::move(shape), std::move(v), "reshape", {a}, [](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i];
    });
}

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw SpaError("autodiff", "usage", "concat: no inputs");
    const std::size_t rank = parts[0].shape().size();
    if (rank == 1) {
        if (axis != 0) throw SpaError("autodiff", "shape", "concat: rank-1 tensors need axis 0");
        std::size_t total = 0;
        for (const auto& p : parts) {
            if (p.shape().size() != 1) throw SpaError("autodiff", "shape", "concat: mixed ranks");
            total += p.numel();
        }
        std::vector<double> v;
        v.reserve(total);
        std::vector<std::size_t> sizes;
        for (const auto& p : parts) {
            v.insert(v.end(), p.values().begin(), p.values().end());
            sizes.push_back(p.numel());
        }
        return detail::make_result({total}, std::move(v), "concat", parts, [sizes](TensorNode& n) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                auto& in = *n.inputs[k];
                if (in.requires_grad) {
                    in.ensure_grad();
                    for (std::size_t i = 0; i < sizes[k]; ++i) in.grad[i] += n.grad[off + i];
                }
                off += sizes[k];
            }
        });
    }
    if (rank != 2 || (axis != 0 && axis != 1))
        throw SpaError("autodiff", "shape", "concat: supported on rank-1/2, axis 0/1");
    const std::size_t fixed = parts[0].shape()[axis == 0 ? 1 : 0];
    std::size_t total = 0;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
        detail::check_rank2(p, "concat");
        if (p.shape()[axis == 0 ? 1 : 0] != fixed)
            throw SpaError("autodiff", "shape", "concat: mismatched non-concat dimension");
        sizes.push_back(p.shape()[axis]);
        total += p.shape()[axis];
    }
    Shape out_shape = axis == 0 ? Shape{total, fixed} : Shape{fixed, total};
    std::vector<double> v(total * fixed);
    if (axis == 0) {
        std::size_t off = 0;
        for (const auto& p : parts) {
            std::copy(p.values().begin(), p.values().end(), v.begin() + off);
            off += p.numel();
        }
    } else {
        std::size_t coloff = 0;
        for (const auto& p : parts) {
            const std::size_t pc = p.shape()[1];
            for (std::size_t i = 0; i < fixed; ++i)
                std::copy(p.values().begin() + i * pc, p.values().begin() + (i + 1) * pc,
                          v.begin() + i * total + coloff);
            coloff += pc;
        }
    }
    return detail::make_result(std::move(out_shape), std::move(v), "concat", parts,
                               [axis, sizes, fixed, total](TensorNode& n) {
        if (axis == 0) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                auto& in = *n.inputs[k];
                const std::size_t cnt = sizes[k] * fixed;
                if (in.requires_grad) {
                    in.ensure_grad();
                    for (std::size_t i = 0; i < cnt; ++i) in.grad[i] += n.grad[off + i];
                }
                off += cnt;
            }
        } else {
            std::size_t coloff = 0;
            for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                auto& in = *n.inputs[k];
                const std::size_t pc = sizes[k];
                if (in.requires_grad) {
                    in.ensure_grad();
                    for (std::size_t i = 0; i < fixed; ++i)
                        for (std::size_t j = 0; j < pc; ++j)
                            in.grad[i * pc + j] += n.grad[i * total + coloff + j];
                }
                coloff += pc;
            }
        }
    });
}

// Splits along `axis` into pieces of the given sizes; each piece is its own
// graph node referencing the parent.
inline std::vector<Tensor> split(const Tensor& a, int axis, const std::vector<std::size_t>& sizes) {
    const std::size_t rank = a.shape().size();
    std::size_t total = 0;
    for (std::size_t s : sizes) total += s;
    if (rank == 1) {
        if (axis != 0 || total != a.shape()[0])
            throw SpaError("autodiff", "shape", "split: sizes do not cover axis");
        std::vector<Tensor> out;
        std::size_t off = 0;
        for (std::size_t s : sizes) {
            std::vector<double> v(a.values().begin() + off, a.values().begin() + off + s);
            const std::size_t o = off;
            out.push_back(detail::make_result({s}, std::move(v), "split", {a}, [o, s](TensorNode& n) {
                auto& in = *n.inputs[0];
                if (!in.requires_grad) return;
                in.ensure_grad();
                for (std::size_t i = 0; i < s; ++i) in.grad[o + i] += n.grad[i];
            }));
            off += s;
        }
        return out;
    }
    detail::check_rank2(a, "split");
    if ((axis != 0 && axis != 1) || total != a.shape()[axis])
        throw SpaError("autodiff", "shape", "split: sizes do not cover axis");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<Tensor> out;
    std::size_t off = 0;
    for (std::size_t s : sizes) {
        if (axis == 0) {
            std::vector<double> v(a.values().begin() + off * c, a.values().begin() + (off + s) * c);
            const std::size_t o = off;
            out.push_back(detail::make_result({s, c}, std::move(v), "split", {a}, [o, s, c](TensorNode& n) {
                auto& in = *n.inputs[0];
                if (!in.requires_grad) return;
                in.ensure_grad();
                for (std::size_t i = 0; i < s * c; ++i) in.grad[o * c + i] += n.grad[i];
            }));
        } else {
            std::vector<double> v(r * s);
            for (std::size_t i = 0; i < r; ++i)
                std::copy(a.values().begin() + i * c + off, a.values().begin() + i * c + off + s,
                          v.begin() + i * s);
            const std::size_t o = off;
            out.push_back(detail::make_result({r, s}, std::move(v), "split", {a}, [o, s, r, c](TensorNode& n) {
                auto& in = *n.inputs[0];
                if (!in.requires_grad) return;
                in.ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < s; ++j) in.grad[i * c + o + j] += n.grad[i * s + j];
            }));
        }
        off += s;
    }
    return out;
}

inline Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double x : a.values()) acc += x;
    return detail::make_result({1}, {acc}, "sum", {a}, [](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        const double g = n.grad[0];
        for (double& gi : in.grad) gi += g;
    });
}

namespace detail {
enum class ReduceKind { Sum, Mean, Max };

inline Tensor reduce_axis(const Tensor& a, int axis, bool keepdims, ReduceKind kind, const char* op) {
    check_rank2(a, op);
    if (axis != 0 && axis != 1) throw SpaError("autodiff", "shape", std::string(op) + ": axis must be 0 or 1");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    const std::size_t out_n = axis == 0 ? c : r;
    const std::size_t span = axis == 0 ? r : c;
    std::vector<double> v(out_n, 0.0);
    std::vector<std::size_t> argmax(kind == ReduceKind::Max ? out_n : 0, 0);
    const auto& av = a.values();
    for (std::size_t o = 0; o < out_n; ++o) {
        if (kind == ReduceKind::Max) {
            std::size_t best = 0;
            double bv = axis == 0 ? av[o] : av[o * c];
            for (std::size_t i = 1; i < span; ++i) {
                const double x = axis == 0 ? av[i * c + o] : av[o * c + i];
                if (x > bv) {  // first maximal element wins ties
                    bv = x;
                    best = i;
                }
            }
            v[o] = bv;
            argmax[o] = best;
        } else {
            double acc = 0.0;
            for (std::size_t i = 0; i < span; ++i) acc += axis == 0 ? av[i * c + o] : av[o * c + i];
            v[o] = kind == ReduceKind::Mean ? acc / double(span) : acc;
        }
    }
    Shape out_shape = keepdims ? (axis == 0 ? Shape{1, c} : Shape{r, 1}) : Shape{out_n};
    return make_result(std::move(out_shape), std::move(v), op, {a},
                       [axis, r, c, kind, argmax](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        const std::size_t out_n = axis == 0 ? c : r;
        const std::size_t span = axis == 0 ? r : c;
        for (std::size_t o = 0; o < out_n; ++o) {
            const double g = n.grad[o];
            if (kind == ReduceKind::Max) {
                const std::size_t i = argmax[o];
                in.grad[axis == 0 ? i * c + o : o * c + i] += g;
            } else {
                const double gg = kind == ReduceKind::Mean ? g / double(span) : g;
                for (std::size_t i = 0; i < span; ++i)
                    in.grad[axis == 0 ? i * c + o : o * c + i] += gg;
            }
        }
    });
}
}  // namespace detail

inline Tensor sum(const Tensor& a, int axis, bool keepdims = false) {
    return detail::reduce_axis(a, axis, keepdims, detail::ReduceKind::Sum, "sum");
}
inline Tensor mean(const Tensor& a, int axis, bool keepdims = false) {
    return detail::reduce_axis(a, axis, keepdims, detail::ReduceKind::Mean, "mean");
}
inline Tensor max(const Tensor& a, int axis, bool keepdims = false) {
    return detail::reduce_axis(a, axis, keepdims, detail::ReduceKind::Max, "max");
}

inline Tensor mean(const Tensor& a) {
    Tensor s = sum(a);
    return smul(s, 1.0 / double(a.numel()));
}

namespace detail {
template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, const char* op, Fwd fwd, Bwd bwd) {
    std::vector<double> v(a.numel());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fwd(av[i]);
    return make_result(a.shape(), std::move(v), op, {a}, [bwd](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            in.grad[i] += n.grad[i] * bwd(in.values[i], n.values[i]);
    });
}
}  // namespace detail

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_op(
        a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}
inline Tensor tanh_t(const Tensor& a) {
    return detail::unary_op(
        a, "tanh", [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}
inline Tensor relu(const Tensor& a) {
    return detail::unary_op(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}
inline Tensor exp_t(const Tensor& a) {
    return detail::unary_op(
        a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
inline Tensor log_t(const Tensor& a) {
    return detail::unary_op(
        a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// Softmax along `axis` (rank-1 tensors use axis 0). Max-shifted for
// stability; the shift is a constant and does not change the adjoint.
inline Tensor softmax(const Tensor& a, int axis = -1) {
    const std::size_t rank = a.shape().size();
    std::size_t groups, span, gstride, sstride;
    if (rank == 1) {
        groups = 1;
        span = a.shape()[0];
        gstride = 0;
        sstride = 1;
    } else if (rank == 2) {
        if (axis != 0 && axis != 1)
            throw SpaError("autodiff", "shape", "softmax: axis must be 0 or 1 for rank-2");
        const std::size_t r = a.shape()[0], c = a.shape()[1];
        if (axis == 1) {
            groups = r; span = c; gstride = c; sstride = 1;
        } else {
            groups = c; span = r; gstride = 1; sstride = c;
        }
    } else {
        throw SpaError("autodiff", "shape", "softmax: rank-1/2 only");
    }
    std::vector<double> v(a.numel());
    const auto& av = a.values();
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t base = g * gstride;
        double m = av[base];
        for (std::size_t i = 1; i < span; ++i) m = std::max(m, av[base + i * sstride]);
        double denom = 0.0;
        for (std::size_t i = 0; i < span; ++i) {
            const double e = std::exp(av[base + i * sstride] - m);
            v[base + i * sstride] = e;
            denom += e;
        }
        for (std::size_t i = 0; i < span; ++i) v[base + i * sstride] /= denom;
    }
    return detail::make_result(a.shape(), std::move(v), "softmax", {a},
                               [groups, span, gstride, sstride](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t base = g * gstride;
            double dot = 0.0;
            for (std::size_t i = 0; i < span; ++i) {
                const std::size_t k = base + i * sstride;
                dot += n.grad[k] * n.values[k];
            }
            for (std::size_t i = 0; i < span; ++i) {
                const std::size_t k = base + i * sstride;
                in.grad[k] += n.values[k] * (n.grad[k] - dot);
            }
        }
    });
}

// Row gather from a rank-2 tensor.
inline Tensor gather(const Tensor& a, const std::vector<std::size_t>& rows) {
    detail::check_rank2(a, "gather");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    std::vector<double> v(rows.size() * c);
    const auto& av = a.values();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= r)
            throw SpaError("autodiff", "index",
                           "gather: row " + std::to_string(rows[i]) + " out of range " + std::to_string(r));
        std::copy(av.begin() + rows[i] * c, av.begin() + (rows[i] + 1) * c, v.begin() + i * c);
    }
    return detail::make_result({rows.size(), c}, std::move(v), "gather", {a}, [rows, c](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) in.grad[rows[i] * c + j] += n.grad[i * c + j];
    });
}

// Accumulates row i of `values` into row rows[i] of an out_rows x cols zero
// tensor.
inline Tensor scatter_add(const Tensor& values, const std::vector<std::size_t>& rows,
                          std::size_t out_rows) {
    detail::check_rank2(values, "scatter_add");
    const std::size_t e = values.shape()[0], c = values.shape()[1];
    if (rows.size() != e)
        throw SpaError("autodiff", "shape", "scatter_add: rows length does not match values rows");
    std::vector<double> v(out_rows * c, 0.0);
    const auto& av = values.values();
    for (std::size_t i = 0; i < e; ++i) {
        if (rows[i] >= out_rows)
            throw SpaError("autodiff", "index",
                           "scatter_add: row " + std::to_string(rows[i]) + " out of range " +
                               std::to_string(out_rows));
        for (std::size_t j = 0; j < c; ++j) v[rows[i] * c + j] += av[i * c + j];
    }
    return detail::make_result({out_rows, c}, std::move(v), "scatter_add", {values},
                               [rows, c](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) in.grad[i * c + j] += n.grad[rows[i] * c + j];
    });
}

// Inverted dropout: kept elements scaled by 1/(1-rate) at train time so eval
// is a plain identity.
inline Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw SpaError("autodiff", "config", "dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) return a;
    const double scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(a.numel());
    std::vector<double> v(a.numel());
    const auto& av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double m = rng.unit() < rate ? 0.0 : scale;
        (*mask)[i] = m;
        v[i] = av[i] * m;
    }
    return detail::make_result(a.shape(), std::move(v), "dropout", {a}, [mask](TensorNode& n) {
        auto& in = *n.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i] * (*mask)[i];
    });
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

// Accumulates gradients into every reachable requires-grad node. Root must be
// scalar. Safe to call repeatedly; leaf grads accumulate until zero_grad.
inline void backward(const Tensor& root) {
    if (root.numel() != 1)
        throw SpaError("autodiff", "usage", "backward: root must be scalar, got " + shape_str(root.shape()));
    if (!root.requires_grad()) return;

    // iterative post-order over the requires-grad subgraph
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root.raw(), 0);
    visited.insert(root.raw());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->inputs.size()) {
            TensorNode* child = node->inputs[idx].get();
            ++idx;
            if (child->requires_grad && !visited.count(child)) {
                visited.insert(child);
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.raw()->ensure_grad();
    root.raw()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

// backward plus a copy of every reachable requires-grad node's gradient,
// keyed by node id.
inline std::unordered_map<std::int64_t, std::vector<double>> gradient_map(const Tensor& root) {
    backward(root);
    std::unordered_map<std::int64_t, std::vector<double>> out;
    std::unordered_set<TensorNode*> visited;
    std::vector<TensorNode*> stack{root.raw()};
    visited.insert(root.raw());
    while (!stack.empty()) {
        TensorNode* n = stack.back();
        stack.pop_back();
        if (n->requires_grad && !n->grad.empty()) out.emplace(n->id, n->grad);
        for (const auto& in : n->inputs)
            if (in->requires_grad && !visited.count(in.get())) {
                visited.insert(in.get());
                stack.push_back(in.get());
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// name-based dispatch
// ---------------------------------------------------------------------------

struct PrimitiveAttrs {
    std::map<std::string, double> num;
    std::map<std::string, std::vector<std::int64_t>> ivec;

    double get_num(const std::string& key, double fallback) const {
        auto it = num.find(key);
        return it == num.end() ? fallback : it->second;
    }
    double require_num(const std::string& key) const {
        auto it = num.find(key);
        if (it == num.end()) throw SpaError("autodiff", "config", "missing attribute " + key);
        return it->second;
    }
    const std::vector<std::int64_t>& require_ivec(const std::string& key) const {
        auto it = ivec.find(key);
        if (it == ivec.end()) throw SpaError("autodiff", "config", "missing attribute " + key);
        return it->second;
    }
};

// Generic entry point over the primitive set. Typed wrappers above are what
// the model code calls; this exists for configuration-driven use and tests.
inline Tensor apply_primitive(const std::string& name, const std::vector<Tensor>& inputs,
                              const PrimitiveAttrs& attrs = {}, Rng* rng = nullptr) {
    auto arity = [&](std::size_t n) {
        if (inputs.size() != n)
            throw SpaError("autodiff", "shape",
                           name + ": expected " + std::to_string(n) + " inputs, got " +
                               std::to_string(inputs.size()));
    };
    auto rows_attr = [&]() {
        const auto& iv = attrs.require_ivec("rows");
        std::vector<std::size_t> rows(iv.size());
        for (std::size_t i = 0; i < iv.size(); ++i) {
            if (iv[i] < 0) throw SpaError("autodiff", "index", name + ": negative row index");
            rows[i] = std::size_t(iv[i]);
        }
        return rows;
    };
    if (name == "matmul") { arity(2); return matmul(inputs[0], inputs[1]); }
    if (name == "add") { arity(2); return add(inputs[0], inputs[1]); }
    if (name == "sub") { arity(2); return sub(inputs[0], inputs[1]); }
    if (name == "elementwise-mul") { arity(2); return mul(inputs[0], inputs[1]); }
    if (name == "scalar-mul") { arity(1); return smul(inputs[0], attrs.require_num("scalar")); }
    if (name == "concat") { return concat(inputs, int(attrs.require_num("axis"))); }
    if (name == "split") {
        arity(1);
        const auto& iv = attrs.require_ivec("sizes");
        std::vector<std::size_t> sizes(iv.begin(), iv.end());
        auto pieces = split(inputs[0], int(attrs.require_num("axis")), sizes);
        const std::size_t piece = std::size_t(attrs.require_num("piece"));
        if (piece >= pieces.size()) throw SpaError("autodiff", "index", "split: piece out of range");
        return pieces[piece];
    }
    if (name == "sum") {
        arity(1);
        if (!attrs.num.count("axis")) return sum(inputs[0]);
        return sum(inputs[0], int(attrs.require_num("axis")), attrs.get_num("keepdims", 0) != 0);
    }
    if (name == "mean") {
        arity(1);
        if (!attrs.num.count("axis")) return mean(inputs[0]);
        return mean(inputs[0], int(attrs.require_num("axis")), attrs.get_num("keepdims", 0) != 0);
    }
    if (name == "max") {
        arity(1);
        return max(inputs[0], int(attrs.require_num("axis")), attrs.get_num("keepdims", 0) != 0);
    }
    if (name == "sigmoid") { arity(1); return sigmoid(inputs[0]); }
    if (name == "tanh") { arity(1); return tanh_t(inputs[0]); }
    if (name == "relu") { arity(1); return relu(inputs[0]); }
    if (name == "exp") { arity(1); return exp_t(inputs[0]); }
    if (name == "log") { arity(1); return log_t(inputs[0]); }
    if (name == "softmax") { arity(1); return softmax(inputs[0], int(attrs.get_num("axis", -1))); }
    if (name == "gather") { arity(1); return gather(inputs[0], rows_attr()); }
    if (name == "scatter-add") {
        arity(1);
        return scatter_add(inputs[0], rows_attr(), std::size_t(attrs.require_num("rowCount")));
    }
    if (name == "dropout") {
        arity(1);
        const bool training = attrs.get_num("training", 0) != 0;
        if (training && rng == nullptr)
            throw SpaError("autodiff", "config", "dropout: training mode needs an rng");
        static Rng dummy(0);
        return dropout(inputs[0], attrs.require_num("rate"), training, rng ? *rng : dummy);
    }
    if (name == "transpose") { arity(1); return transpose(inputs[0]); }
    if (name == "reshape") {
        arity(1);
        const auto& iv = attrs.require_ivec("shape");
        return reshape(inputs[0], Shape(iv.begin(), iv.end()));
    }
    throw SpaError("autodiff", "config", "unknown primitive '" + name + "'");
}

}  // namespace spa
