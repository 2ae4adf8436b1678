// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pointy/common.hpp"

namespace pointy {

// =====================================================================
//  Dense tensor with reverse-mode differentiation
// =====================================================================
//
// A Tensor<T> is a handle to a heap node holding the shape, a flat
// row-major value array, and an optional gradient of the same length.
// Operations link output nodes to their inputs and register a backward
// rule; Tensor::backward() runs the rules in reverse topological order
// and sums gradients across uses. Values are immutable once produced
// by an operation; only leaf parameters are mutated (by the optimizer,
// through data()).

namespace detail {

template <typename T>
struct TensorNode {
    std::vector<std::int64_t> shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    bool grad_populated = false;
    std::string name;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backfn;

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
        grad_populated = true;
    }
};

/// true while evaluation should not record the graph
inline bool& no_grad_flag() {
    thread_local bool flag = false;
    return flag;
}

// ---- raw GEMM kernels, row-major ----

// C[m x n] (+)= A[m x k] * B[k x n]
template <typename T>
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c, bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, T(0));
        const T* arow = a + i * k;
        for (std::int64_t t = 0; t < k; ++t) {
            const T av = arow[t];
            const T* brow = b + t * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] (+)= A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c, bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = 0;
            for (std::int64_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

// C[m x n] (+)= A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, T(0));
    for (std::int64_t t = 0; t < k; ++t) {
        const T* arow = a + t * m;
        const T* brow = b + t * n;
        for (std::int64_t i = 0; i < m; ++i) {
            const T av = arow[i];
            T* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

template <typename T>
class Tensor {
  public:
    using Node = detail::TensorNode<T>;

    Tensor() = default;

    static Tensor zeros(std::vector<std::int64_t> shape) {
        return Tensor(make_node(std::move(shape), {}, true));
    }

    static Tensor from(std::vector<std::int64_t> shape, std::vector<T> data) {
        auto n = make_node(std::move(shape), std::move(data), false);
        check_finite(n->data, "tensor");
        return Tensor(std::move(n));
    }

    static Tensor scalar(T v) { return from({1}, {v}); }

    /// Leaf with a gradient slot; the unit of optimization and checkpointing.
    static Tensor param(std::vector<std::int64_t> shape, std::vector<T> data, std::string name) {
        auto n = make_node(std::move(shape), std::move(data), false);
        check_finite(n->data, "param");
        n->requires_grad = true;
        n->name = std::move(name);
        return Tensor(std::move(n));
    }

    bool defined() const { return static_cast<bool>(n_); }
    const std::vector<std::int64_t>& shape() const { return n_->shape; }
    std::int64_t numel() const { return n_->numel(); }
    std::int64_t rank() const { return static_cast<std::int64_t>(n_->shape.size()); }

    std::int64_t rows() const { return n_->shape.size() == 2 ? n_->shape[0] : (require_2d("rows"), 0); }
    std::int64_t cols() const { return n_->shape.size() == 2 ? n_->shape[1] : (require_2d("cols"), 0); }

    const std::vector<T>& data() const { return n_->data; }
    std::vector<T>& data() { return n_->data; }

    bool has_grad() const { return n_->grad_populated && n_->grad.size() == n_->data.size(); }
    const std::vector<T>& grad() const {
        if (!has_grad()) throw NumericError("tensor '" + n_->name + "' has no gradient");
        return n_->grad;
    }

    bool requires_grad() const { return n_->requires_grad; }
    const std::string& name() const { return n_->name; }

    T item() const {
        if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(n_->shape));
        return n_->data[0];
    }

    void zero_grad() {
        n_->grad.clear();
        n_->grad_populated = false;
    }

    /// Reverse accumulation from a scalar. Every reachable parameter gets
    /// d(this)/d(param) summed into its grad slot. Gradients persist until
    /// zero_grad; a second backward over the same parameters throws.
    void backward() const {
        if (numel() != 1) throw DimensionError("backward() requires a scalar, got " + shape_str(n_->shape));
        if (!n_->requires_grad) throw NumericError("backward(): value does not depend on any parameter");

        std::vector<Node*> order = topo_order(n_.get());

        for (Node* node : order) {
            if (!node->backfn && node->requires_grad && node->grad_populated) {
                throw NumericError("backward(): parameter '" + node->name +
                                   "' already holds a gradient; call zero_grads first");
            }
        }
        n_->ensure_grad();
        n_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* node = *it;
            if (node->backfn) node->backfn(*node);
        }
    }

    std::shared_ptr<Node>& node() { return n_; }
    const std::shared_ptr<Node>& node() const { return n_; }

    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  private:
    static std::shared_ptr<Node> make_node(std::vector<std::int64_t> shape, std::vector<T> data, bool zero_fill) {
        std::int64_t count = 1;
        for (auto e : shape) {
            if (e <= 0) throw DimensionError("non-positive extent in shape " + shape_str(shape));
            count *= e;
        }
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        if (zero_fill) {
            n->data.assign(static_cast<std::size_t>(count), T(0));
        } else {
            if (static_cast<std::int64_t>(data.size()) != count) {
                throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                                     shape_str(n->shape));
            }
            n->data = std::move(data);
        }
        return n;
    }

    void require_2d(const char* what) const {
        throw DimensionError(std::string(what) + "() on tensor of shape " + shape_str(n_->shape));
    }

    static std::vector<Node*> topo_order(Node* root) {
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        // iterative post-order; graphs can be thousands of nodes deep
        std::vector<std::pair<Node*, std::size_t>> stack;
        stack.emplace_back(root, 0);
        seen.insert(root);
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            bool descended = false;
            while (next < node->parents.size()) {
                Node* p = node->parents[next++].get();
                if (p->requires_grad && seen.insert(p).second) {
                    stack.emplace_back(p, 0);
                    descended = true;
                    break;
                }
            }
            if (!descended && stack.back().second >= stack.back().first->parents.size()) {
                order.push_back(stack.back().first);
                stack.pop_back();
            }
        }
        return order;
    }

    std::shared_ptr<Node> n_;
};

/// Suppresses graph recording for pure evaluation (RAII).
class NoGradGuard {
  public:
    NoGradGuard() : prev_(detail::no_grad_flag()) { detail::no_grad_flag() = true; }
    ~NoGradGuard() { detail::no_grad_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

template <typename T>
void zero_grads(std::span<Tensor<T>> params) {
    for (auto& p : params) p.zero_grad();
}

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params) {
    for (auto& p : params) p.zero_grad();
}

// =====================================================================
//  Operations
// =====================================================================

namespace detail {

template <typename T>
Tensor<T> make_op(std::vector<std::int64_t> shape, std::vector<T> data,
                  std::vector<Tensor<T>> inputs, std::function<void(TensorNode<T>&)> backfn,
                  const char* opname) {
    check_finite(data, opname);
    auto out = Tensor<T>::from(std::move(shape), std::move(data));
    bool needs = false;
    if (!no_grad_flag()) {
        for (const auto& in : inputs) needs = needs || in.requires_grad();
    }
    if (needs) {
        auto& n = *out.node();
        n.requires_grad = true;
        n.parents.reserve(inputs.size());
        for (auto& in : inputs) n.parents.push_back(in.node());
        n.backfn = std::move(backfn);
    }
    return out;
}

template <typename T>
void require_2d(const Tensor<T>& t, const char* op) {
    if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

}  // namespace detail

/// c[i,j] = sum_t a[i,t] * b[t,j]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_2d(a, "matmul");
    detail::require_2d(b, "matmul");
    const auto m = a.shape()[0], p = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != p) {
        throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    std::vector<T> out(static_cast<std::size_t>(m * n));
    detail::gemm_nn(m, n, p, a.data().data(), b.data().data(), out.data(), false);
    return detail::make_op<T>(
        {m, n}, std::move(out), {a, b},
        [m, p, n](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            auto& B = *self.parents[1];
            if (A.requires_grad) {
                A.ensure_grad();
                detail::gemm_nt(m, p, n, self.grad.data(), B.data.data(), A.grad.data(), true);
            }
            if (B.requires_grad) {
                B.ensure_grad();
                detail::gemm_tn(p, n, m, A.data.data(), self.grad.data(), B.grad.data(), true);
            }
        },
        "matmul");
}

/// c = a * b^T for row-major operands of shape (m x k) and (n x k).
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_2d(a, "matmul_nt");
    detail::require_2d(b, "matmul_nt");
    const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
    if (b.shape()[1] != k) {
        throw DimensionError("matmul_nt: trailing extents differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()) + "^T");
    }
    std::vector<T> out(static_cast<std::size_t>(m * n));
    detail::gemm_nt(m, n, k, a.data().data(), b.data().data(), out.data(), false);
    return detail::make_op<T>(
        {m, n}, std::move(out), {a, b},
        [m, k, n](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            auto& B = *self.parents[1];
            if (A.requires_grad) {
                A.ensure_grad();
                detail::gemm_nn(m, k, n, self.grad.data(), B.data.data(), A.grad.data(), true);
            }
            if (B.requires_grad) {
                B.ensure_grad();
                detail::gemm_tn(n, k, m, self.grad.data(), A.data.data(), B.grad.data(), true);
            }
        },
        "matmul_nt");
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    std::vector<T> out(a.data());
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    return detail::make_op<T>(
        a.shape(), std::move(out), {a, b},
        [](detail::TensorNode<T>& self) {
            for (int s = 0; s < 2; ++s) {
                auto& par = *self.parents[static_cast<std::size_t>(s)];
                if (!par.requires_grad) continue;
                par.ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i];
            }
        },
        "add");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    std::vector<T> out(a.data());
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
    return detail::make_op<T>(
        a.shape(), std::move(out), {a, b},
        [](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            auto& B = *self.parents[1];
            if (A.requires_grad) {
                A.ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i] * B.data[i];
            }
            if (B.requires_grad) {
                B.ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) B.grad[i] += self.grad[i] * A.data[i];
            }
        },
        "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    std::vector<T> out(a.data());
    for (auto& v : out) v *= c;
    return detail::make_op<T>(
        a.shape(), std::move(out), {a},
        [c](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += c * self.grad[i];
        },
        "scale");
}

/// Exact Gaussian-CDF GeLU: x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    constexpr T inv_sqrt2 = T(0.70710678118654752440);
    std::vector<T> out(a.data().size());
    const auto& x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T phi = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
        out[i] = x[i] * phi;
    }
    return detail::make_op<T>(
        a.shape(), std::move(out), {a},
        [](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            constexpr T inv_sqrt2 = T(0.70710678118654752440);
            constexpr T inv_sqrt2pi = T(0.39894228040143267794);
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const T x = A.data[i];
                const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
                const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
                A.grad[i] += self.grad[i] * (cdf + x * pdf);
            }
        },
        "gelu");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    std::vector<T> out(a.data());
    for (auto& v : out) v = v > T(0) ? v : T(0);
    return detail::make_op<T>(
        a.shape(), std::move(out), {a},
        [](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                if (A.data[i] > T(0)) A.grad[i] += self.grad[i];
            }
        },
        "relu");
}

/// Max-stabilized softmax along the given axis of a rank-2 tensor.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis) {
    detail::require_2d(a, "softmax");
    if (axis != 0 && axis != 1) throw DimensionError("softmax: axis must be 0 or 1");
    const auto r = a.shape()[0], c = a.shape()[1];
    const auto slices = (axis == 1) ? r : c;
    const auto len = (axis == 1) ? c : r;
    const auto stride = (axis == 1) ? std::int64_t{1} : c;
    const auto slice_step = (axis == 1) ? c : std::int64_t{1};

    std::vector<T> out(a.data().size());
    const T* x = a.data().data();
    for (std::int64_t s = 0; s < slices; ++s) {
        const T* xs = x + s * slice_step;
        T* ys = out.data() + s * slice_step;
        T mx = xs[0];
        for (std::int64_t i = 1; i < len; ++i) mx = std::max(mx, xs[i * stride]);
        T sum = 0;
        for (std::int64_t i = 0; i < len; ++i) {
            const T e = std::exp(xs[i * stride] - mx);
            ys[i * stride] = e;
            sum += e;
        }
        const T inv = T(1) / sum;
        for (std::int64_t i = 0; i < len; ++i) ys[i * stride] *= inv;
    }
    return detail::make_op<T>(
        a.shape(), std::move(out), {a},
        [slices, len, stride, slice_step](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            for (std::int64_t s = 0; s < slices; ++s) {
                const T* y = self.data.data() + s * slice_step;
                const T* dy = self.grad.data() + s * slice_step;
                T* dx = A.grad.data() + s * slice_step;
                T dot = 0;
                for (std::int64_t i = 0; i < len; ++i) dot += dy[i * stride] * y[i * stride];
                for (std::int64_t i = 0; i < len; ++i) {
                    dx[i * stride] += y[i * stride] * (dy[i * stride] - dot);
                }
            }
        },
        "softmax");
}

/// Per-row normalization over the trailing extent, population variance.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    detail::require_2d(x, "layer_norm");
    const auto r = x.shape()[0], d = x.shape()[1];
    if (gamma.numel() != d || beta.numel() != d) {
        throw DimensionError("layer_norm: feature extent " + std::to_string(d) + " does not match gamma " +
                             shape_str(gamma.shape()) + " / beta " + shape_str(beta.shape()));
    }
    if (eps <= T(0)) throw ConfigError("layer_norm: eps must be positive");
    std::vector<T> out(x.data().size());
    const T* xd = x.data().data();
    const T* g = gamma.data().data();
    const T* b = beta.data().data();
    for (std::int64_t i = 0; i < r; ++i) {
        const T* row = xd + i * d;
        T* orow = out.data() + i * d;
        T mean = 0;
        for (std::int64_t j = 0; j < d; ++j) mean += row[j];
        mean /= T(d);
        T var = 0;
        for (std::int64_t j = 0; j < d; ++j) {
            const T c = row[j] - mean;
            var += c * c;
        }
        var /= T(d);
        const T inv = T(1) / std::sqrt(var + eps);
        for (std::int64_t j = 0; j < d; ++j) orow[j] = g[j] * ((row[j] - mean) * inv) + b[j];
    }
    return detail::make_op<T>(
        x.shape(), std::move(out), {x, gamma, beta},
        [r, d, eps](detail::TensorNode<T>& self) {
            auto& X = *self.parents[0];
            auto& G = *self.parents[1];
            auto& B = *self.parents[2];
            if (X.requires_grad) X.ensure_grad();
            if (G.requires_grad) G.ensure_grad();
            if (B.requires_grad) B.ensure_grad();
            std::vector<T> xhat(static_cast<std::size_t>(d));
            for (std::int64_t i = 0; i < r; ++i) {
                const T* row = X.data.data() + i * d;
                const T* dy = self.grad.data() + i * d;
                T mean = 0;
                for (std::int64_t j = 0; j < d; ++j) mean += row[j];
                mean /= T(d);
                T var = 0;
                for (std::int64_t j = 0; j < d; ++j) {
                    const T c = row[j] - mean;
                    var += c * c;
                }
                var /= T(d);
                const T inv = T(1) / std::sqrt(var + eps);
                for (std::int64_t j = 0; j < d; ++j) xhat[static_cast<std::size_t>(j)] = (row[j] - mean) * inv;
                if (G.requires_grad) {
                    for (std::int64_t j = 0; j < d; ++j) G.grad[static_cast<std::size_t>(j)] += dy[j] * xhat[static_cast<std::size_t>(j)];
                }
                if (B.requires_grad) {
                    for (std::int64_t j = 0; j < d; ++j) B.grad[static_cast<std::size_t>(j)] += dy[j];
                }
                if (X.requires_grad) {
                    // dL/dx = inv * (g - mean(g) - xhat * mean(g .* xhat)), g = dy .* gamma
                    T gmean = 0, gxmean = 0;
                    for (std::int64_t j = 0; j < d; ++j) {
                        const T gj = dy[j] * G.data[static_cast<std::size_t>(j)];
                        gmean += gj;
                        gxmean += gj * xhat[static_cast<std::size_t>(j)];
                    }
                    gmean /= T(d);
                    gxmean /= T(d);
                    T* dx = X.grad.data() + i * d;
                    for (std::int64_t j = 0; j < d; ++j) {
                        const T gj = dy[j] * G.data[static_cast<std::size_t>(j)];
                        dx[j] += inv * (gj - gmean - xhat[static_cast<std::size_t>(j)] * gxmean);
                    }
                }
            }
        },
        "layer_norm");
}

/// y = x * W^T + b with W of shape (out x in), broadcast over rows.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    detail::require_2d(x, "linear");
    detail::require_2d(w, "linear");
    const auto r = x.shape()[0], in = x.shape()[1];
    const auto out_dim = w.shape()[0];
    if (w.shape()[1] != in) {
        throw DimensionError("linear: input extent " + shape_str(x.shape()) + " does not match weight " +
                             shape_str(w.shape()));
    }
    if (b.numel() != out_dim) {
        throw DimensionError("linear: bias " + shape_str(b.shape()) + " does not match weight " +
                             shape_str(w.shape()));
    }
    std::vector<T> out(static_cast<std::size_t>(r * out_dim));
    detail::gemm_nt(r, out_dim, in, x.data().data(), w.data().data(), out.data(), false);
    const T* bias = b.data().data();
    for (std::int64_t i = 0; i < r; ++i) {
        T* row = out.data() + i * out_dim;
        for (std::int64_t j = 0; j < out_dim; ++j) row[j] += bias[j];
    }
    return detail::make_op<T>(
        {r, out_dim}, std::move(out), {x, w, b},
        [r, in, out_dim](detail::TensorNode<T>& self) {
            auto& X = *self.parents[0];
            auto& W = *self.parents[1];
            auto& B = *self.parents[2];
            if (X.requires_grad) {
                X.ensure_grad();
                detail::gemm_nn(r, in, out_dim, self.grad.data(), W.data.data(), X.grad.data(), true);
            }
            if (W.requires_grad) {
                W.ensure_grad();
                detail::gemm_tn(out_dim, in, r, self.grad.data(), X.data.data(), W.grad.data(), true);
            }
            if (B.requires_grad) {
                B.ensure_grad();
                for (std::int64_t i = 0; i < r; ++i) {
                    const T* row = self.grad.data() + i * out_dim;
                    for (std::int64_t j = 0; j < out_dim; ++j) B.grad[static_cast<std::size_t>(j)] += row[j];
                }
            }
        },
        "linear");
}

/// Mean over the batch of -log softmax(logits)[label], in log space.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::int64_t>& labels) {
    detail::require_2d(logits, "cross_entropy");
    const auto batch = logits.shape()[0], classes = logits.shape()[1];
    if (static_cast<std::int64_t>(labels.size()) != batch) {
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                             std::to_string(batch));
    }
    for (std::int64_t i = 0; i < batch; ++i) {
        if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= classes) {
            throw IndexError("cross_entropy: label " + std::to_string(labels[static_cast<std::size_t>(i)]) +
                             " out of range [0, " + std::to_string(classes) + ") at row " + std::to_string(i));
        }
    }
    const T* z = logits.data().data();
    T loss = 0;
    for (std::int64_t i = 0; i < batch; ++i) {
        const T* row = z + i * classes;
        T mx = row[0];
        for (std::int64_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
        T sum = 0;
        for (std::int64_t j = 0; j < classes; ++j) sum += std::exp(row[j] - mx);
        const T lse = mx + std::log(sum);
        loss += lse - row[labels[static_cast<std::size_t>(i)]];
    }
    loss /= T(batch);
    return detail::make_op<T>(
        {1}, {loss}, {logits},
        [batch, classes, labels](detail::TensorNode<T>& self) {
            auto& L = *self.parents[0];
            if (!L.requires_grad) return;
            L.ensure_grad();
            const T upstream = self.grad[0] / T(batch);
            for (std::int64_t i = 0; i < batch; ++i) {
                const T* row = L.data.data() + i * classes;
                T* drow = L.grad.data() + i * classes;
                T mx = row[0];
                for (std::int64_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
                T sum = 0;
                for (std::int64_t j = 0; j < classes; ++j) sum += std::exp(row[j] - mx);
                const T inv = T(1) / sum;
                for (std::int64_t j = 0; j < classes; ++j) {
                    T p = std::exp(row[j] - mx) * inv;
                    if (j == labels[static_cast<std::size_t>(i)]) p -= T(1);
                    drow[j] += upstream * p;
                }
            }
        },
        "cross_entropy");
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
    T s = 0;
    for (const T v : a.data()) s += v;
    return detail::make_op<T>(
        {1}, {s}, {a},
        [](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            const T g = self.grad[0];
            for (auto& v : A.grad) v += g;
        },
        "sum_all");
}

/// Column means of a rank-2 tensor -> (1 x cols).
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& a) {
    detail::require_2d(a, "mean_rows");
    const auto r = a.shape()[0], c = a.shape()[1];
    std::vector<T> out(static_cast<std::size_t>(c), T(0));
    const T* x = a.data().data();
    for (std::int64_t i = 0; i < r; ++i) {
        for (std::int64_t j = 0; j < c; ++j) out[static_cast<std::size_t>(j)] += x[i * c + j];
    }
    for (auto& v : out) v /= T(r);
    return detail::make_op<T>(
        {1, c}, std::move(out), {a},
        [r, c](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            for (std::int64_t i = 0; i < r; ++i) {
                for (std::int64_t j = 0; j < c; ++j) A.grad[static_cast<std::size_t>(i * c + j)] += self.grad[static_cast<std::size_t>(j)] / T(r);
            }
        },
        "mean_rows");
}

/// Sums consecutive runs of group_size rows; a short trailing run sums
/// whatever it contains. (T x D) -> (ceil(T/g) x D).
template <typename T>
Tensor<T> group_sum_rows(const Tensor<T>& a, std::int64_t group_size) {
    detail::require_2d(a, "group_sum_rows");
    if (group_size < 1) throw DimensionError("group_sum_rows: group size must be >= 1");
    const auto r = a.shape()[0], c = a.shape()[1];
    const auto groups = (r + group_size - 1) / group_size;
    std::vector<T> out(static_cast<std::size_t>(groups * c), T(0));
    const T* x = a.data().data();
    for (std::int64_t i = 0; i < r; ++i) {
        T* orow = out.data() + (i / group_size) * c;
        const T* row = x + i * c;
        for (std::int64_t j = 0; j < c; ++j) orow[j] += row[j];
    }
    return detail::make_op<T>(
        {groups, c}, std::move(out), {a},
        [r, c, group_size](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            for (std::int64_t i = 0; i < r; ++i) {
                const T* grow = self.grad.data() + (i / group_size) * c;
                T* drow = A.grad.data() + i * c;
                for (std::int64_t j = 0; j < c; ++j) drow[j] += grow[j];
            }
        },
        "group_sum_rows");
}

/// Elementwise max over consecutive runs of group_size rows. Ties take
/// the earliest row, so the subgradient is exact away from ties.
template <typename T>
Tensor<T> group_max_rows(const Tensor<T>& a, std::int64_t group_size) {
    detail::require_2d(a, "group_max_rows");
    if (group_size < 1) throw DimensionError("group_max_rows: group size must be >= 1");
    const auto r = a.shape()[0], c = a.shape()[1];
    const auto groups = (r + group_size - 1) / group_size;
    std::vector<T> out(static_cast<std::size_t>(groups * c));
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(groups * c));
    const T* x = a.data().data();
    for (std::int64_t g = 0; g < groups; ++g) {
        const auto lo = g * group_size;
        const auto hi = std::min(r, lo + group_size);
        T* orow = out.data() + g * c;
        std::int64_t* arow = argmax.data() + g * c;
        for (std::int64_t j = 0; j < c; ++j) {
            T best = x[lo * c + j];
            std::int64_t best_i = lo;
            for (std::int64_t i = lo + 1; i < hi; ++i) {
                if (x[i * c + j] > best) {
                    best = x[i * c + j];
                    best_i = i;
                }
            }
            orow[j] = best;
            arow[j] = best_i;
        }
    }
    return detail::make_op<T>(
        {groups, c}, std::move(out), {a},
        [groups, c, argmax = std::move(argmax)](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            for (std::int64_t g = 0; g < groups; ++g) {
                for (std::int64_t j = 0; j < c; ++j) {
                    A.grad[static_cast<std::size_t>(argmax[static_cast<std::size_t>(g * c + j)] * c + j)] +=
                        self.grad[static_cast<std::size_t>(g * c + j)];
                }
            }
        },
        "group_max_rows");
}

/// Appends zero rows up to new_rows.
template <typename T>
Tensor<T> pad_rows(const Tensor<T>& a, std::int64_t new_rows) {
    detail::require_2d(a, "pad_rows");
    const auto r = a.shape()[0], c = a.shape()[1];
    if (new_rows < r) throw DimensionError("pad_rows: cannot shrink " + shape_str(a.shape()));
    std::vector<T> out(static_cast<std::size_t>(new_rows * c), T(0));
    std::copy(a.data().begin(), a.data().end(), out.begin());
    return detail::make_op<T>(
        {new_rows, c}, std::move(out), {a},
        [r, c](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            for (std::int64_t i = 0; i < r * c; ++i) A.grad[static_cast<std::size_t>(i)] += self.grad[static_cast<std::size_t>(i)];
        },
        "pad_rows");
}

/// Row-major reinterpretation; element order is unchanged.
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<std::int64_t> shape) {
    std::int64_t count = 1;
    for (auto e : shape) count *= e;
    if (count != a.numel()) {
        throw DimensionError("reshape: " + shape_str(a.shape()) + " cannot become " + shape_str(shape));
    }
    std::vector<T> out(a.data());
    return detail::make_op<T>(
        std::move(shape), std::move(out), {a},
        [](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i];
        },
        "reshape");
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::int64_t start, std::int64_t len) {
    detail::require_2d(a, "slice_cols");
    const auto r = a.shape()[0], c = a.shape()[1];
    if (start < 0 || len < 1 || start + len > c) {
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                             ") out of " + shape_str(a.shape()));
    }
    std::vector<T> out(static_cast<std::size_t>(r * len));
    const T* x = a.data().data();
    for (std::int64_t i = 0; i < r; ++i) {
        std::copy(x + i * c + start, x + i * c + start + len, out.data() + i * len);
    }
    return detail::make_op<T>(
        {r, len}, std::move(out), {a},
        [r, c, start, len](detail::TensorNode<T>& self) {
            auto& A = *self.parents[0];
            if (!A.requires_grad) return;
            A.ensure_grad();
            for (std::int64_t i = 0; i < r; ++i) {
                const T* grow = self.grad.data() + i * len;
                T* drow = A.grad.data() + i * c + start;
                for (std::int64_t j = 0; j < len; ++j) drow[j] += grow[j];
            }
        },
        "slice_cols");
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const auto r = parts[0].shape()[0];
    std::int64_t total = 0;
    for (const auto& p : parts) {
        detail::require_2d(p, "concat_cols");
        if (p.shape()[0] != r) {
            throw DimensionError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                                 shape_str(p.shape()));
        }
        total += p.shape()[1];
    }
    std::vector<T> out(static_cast<std::size_t>(r * total));
    std::int64_t off = 0;
    std::vector<std::int64_t> widths;
    widths.reserve(parts.size());
    for (const auto& p : parts) {
        const auto w = p.shape()[1];
        widths.push_back(w);
        const T* x = p.data().data();
        for (std::int64_t i = 0; i < r; ++i) {
            std::copy(x + i * w, x + (i + 1) * w, out.data() + i * total + off);
        }
        off += w;
    }
    return detail::make_op<T>(
        {r, total}, std::move(out), parts,
        [r, total, widths = std::move(widths)](detail::TensorNode<T>& self) {
            std::int64_t off = 0;
            for (std::size_t k = 0; k < self.parents.size(); ++k) {
                auto& P = *self.parents[k];
                const auto w = widths[k];
                if (P.requires_grad) {
                    P.ensure_grad();
                    for (std::int64_t i = 0; i < r; ++i) {
                        const T* grow = self.grad.data() + i * total + off;
                        T* drow = P.grad.data() + i * w;
                        for (std::int64_t j = 0; j < w; ++j) drow[j] += grow[j];
                    }
                }
                off += w;
            }
        },
        "concat_cols");
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const auto c = parts[0].shape()[1];
    std::int64_t total = 0;
    for (const auto& p : parts) {
        detail::require_2d(p, "concat_rows");
        if (p.shape()[1] != c) {
            throw DimensionError("concat_rows: column mismatch " + shape_str(parts[0].shape()) + " vs " +
                                 shape_str(p.shape()));
        }
        total += p.shape()[0];
    }
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(total * c));
    std::vector<std::int64_t> heights;
    heights.reserve(parts.size());
    for (const auto& p : parts) {
        heights.push_back(p.shape()[0]);
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return detail::make_op<T>(
        {total, c}, std::move(out), parts,
        [c, heights = std::move(heights)](detail::TensorNode<T>& self) {
            std::int64_t row = 0;
            for (std::size_t k = 0; k < self.parents.size(); ++k) {
                auto& P = *self.parents[k];
                const auto h = heights[k];
                if (P.requires_grad) {
                    P.ensure_grad();
                    const T* g = self.grad.data() + row * c;
                    for (std::int64_t i = 0; i < h * c; ++i) P.grad[static_cast<std::size_t>(i)] += g[i];
                }
                row += h;
            }
        },
        "concat_rows");
}

}  // namespace pointy
