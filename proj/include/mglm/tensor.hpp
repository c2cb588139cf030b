#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mglm/common.hpp"
#include "mglm/rng.hpp"

namespace mglm {

// Dense n-d tensor participating in reverse-mode differentiation. The
// production scalar type is float; double instantiations exist for the
// finite-difference shadow evaluation used by gradient checks.
template <typename T>
class TensorT {
public:
    struct Node {
        std::vector<int> shape;
        std::vector<T> values;
        std::vector<T> grad;
        bool requires_grad = false;
        std::string name;
        std::function<void()> backward_fn;
        std::vector<std::shared_ptr<Node>> parents;

        int64_t numel() const { return static_cast<int64_t>(values.size()); }
        void ensure_grad() {
            if (grad.size() != values.size()) grad.assign(values.size(), T(0));
        }
        void add_grad(int64_t i, T g) {
            ensure_grad();
            grad[static_cast<size_t>(i)] += g;
        }
    };

    TensorT() = default;

    static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }

    static TensorT filled(std::vector<int> shape, T value, bool requires_grad = false) {
        TensorT t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = std::move(shape);
        t.n_->values.assign(static_cast<size_t>(count(t.n_->shape)), value);
        t.n_->requires_grad = requires_grad;
        return t;
    }

    static TensorT from_values(std::vector<int> shape, std::vector<T> values,
                               bool requires_grad = false) {
        if (count(shape) != static_cast<int64_t>(values.size()))
            throw ConfigError("Tensor: data length does not match shape");
        TensorT t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = std::move(shape);
        t.n_->values = std::move(values);
        t.n_->requires_grad = requires_grad;
        return t;
    }

    bool defined() const { return static_cast<bool>(n_); }
    const std::vector<int>& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    int rows() const { return n_->shape.size() == 2 ? n_->shape[0] : dim(0); }
    int cols() const { return n_->shape.size() == 2 ? n_->shape[1] : 1; }
    int64_t numel() const { return n_->numel(); }

    std::vector<T>& values() { return n_->values; }
    const std::vector<T>& values() const { return n_->values; }
    T at(int64_t i) const { return n_->values[static_cast<size_t>(i)]; }
    T at(int r, int c) const { return n_->values[static_cast<size_t>(r) * cols() + c]; }

    std::vector<T>& grad() {
        n_->ensure_grad();
        return n_->grad;
    }
    const std::vector<T>& grad() const {
        n_->ensure_grad();
        return n_->grad;
    }
    void zero_grad() {
        if (!n_->grad.empty()) n_->grad.assign(n_->values.size(), T(0));
    }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool v) { n_->requires_grad = v; }
    const std::string& name() const { return n_->name; }
    void set_name(std::string name) { n_->name = std::move(name); }

    T scalar() const {
        if (numel() != 1) throw ConfigError("Tensor::scalar: tensor is not a scalar");
        return n_->values[0];
    }

    // Reverse-mode sweep from a recorded scalar.
    void backward() {
        if (numel() != 1) throw ConfigError("backward: loss must be a scalar");
        if (!std::isfinite(static_cast<double>(n_->values[0])))
            throw NumericError("backward: loss is not finite");
        std::vector<Node*> order;
        std::unordered_set<Node*> visited;
        std::vector<std::pair<Node*, size_t>> stack;
        stack.emplace_back(n_.get(), 0);
        visited.insert(n_.get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                Node* p = node->parents[next++].get();
                if (visited.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
        n_->ensure_grad();
        n_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if ((*it)->backward_fn) (*it)->backward_fn();
        }
    }

    std::shared_ptr<Node> node() const { return n_; }

    static int64_t count(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ConfigError("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    // Internal: builds an op result wired to its parents.
    static TensorT make_op(std::vector<int> shape, std::vector<T> values,
                           std::vector<TensorT> parents) {
        TensorT t = from_values(std::move(shape), std::move(values));
        for (const auto& p : parents) {
            if (p.requires_grad()) t.n_->requires_grad = true;
            t.n_->parents.push_back(p.n_);
        }
        return t;
    }

    void set_backward(std::function<void()> fn) {
        if (n_->requires_grad) n_->backward_fn = std::move(fn);
    }

private:
    std::shared_ptr<Node> n_;
};

using Tensor = TensorT<float>;

namespace ops {

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* what) {
    if (a.shape() != b.shape()) throw ConfigError(std::string(what) + ": shape mismatch");
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    check_same_shape(a, b, "add");
    std::vector<T> y(a.values());
    for (size_t i = 0; i < y.size(); ++i) y[i] += b.values()[i];
    TensorT<T> out = TensorT<T>::make_op(a.shape(), std::move(y), {a, b});
    auto an = a.node(), bn = b.node(), on = out.node();
    out.set_backward([an, bn, on] {
        for (int64_t i = 0; i < on->numel(); ++i) {
            if (an->requires_grad) an->add_grad(i, on->grad[static_cast<size_t>(i)]);
            if (bn->requires_grad) bn->add_grad(i, on->grad[static_cast<size_t>(i)]);
        }
    });
    return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    check_same_shape(a, b, "sub");
    std::vector<T> y(a.values());
    for (size_t i = 0; i < y.size(); ++i) y[i] -= b.values()[i];
    TensorT<T> out = TensorT<T>::make_op(a.shape(), std::move(y), {a, b});
    auto an = a.node(), bn = b.node(), on = out.node();
    out.set_backward([an, bn, on] {
        for (int64_t i = 0; i < on->numel(); ++i) {
            if (an->requires_grad) an->add_grad(i, on->grad[static_cast<size_t>(i)]);
            if (bn->requires_grad) bn->add_grad(i, -on->grad[static_cast<size_t>(i)]);
        }
    });
    return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    check_same_shape(a, b, "mul");
    std::vector<T> y(a.values());
    for (size_t i = 0; i < y.size(); ++i) y[i] *= b.values()[i];
    TensorT<T> out = TensorT<T>::make_op(a.shape(), std::move(y), {a, b});
    auto an = a.node(), bn = b.node(), on = out.node();
    out.set_backward([an, bn, on] {
        for (int64_t i = 0; i < on->numel(); ++i) {
            const size_t s = static_cast<size_t>(i);
            if (an->requires_grad) an->add_grad(i, on->grad[s] * bn->values[s]);
            if (bn->requires_grad) bn->add_grad(i, on->grad[s] * an->values[s]);
        }
    });
    return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
    std::vector<T> y(a.values());
    for (auto& v : y) v *= s;
    TensorT<T> out = TensorT<T>::make_op(a.shape(), std::move(y), {a});
    auto an = a.node(), on = out.node();
    out.set_backward([an, on, s] {
        for (int64_t i = 0; i < on->numel(); ++i)
            an->add_grad(i, on->grad[static_cast<size_t>(i)] * s);
    });
    return out;
}

template <typename T>
TensorT<T> sum(const TensorT<T>& a) {
    T total = T(0);
    for (T v : a.values()) total += v;
    TensorT<T> out = TensorT<T>::make_op({1}, {total}, {a});
    auto an = a.node(), on = out.node();
    out.set_backward([an, on] {
        for (int64_t i = 0; i < an->numel(); ++i) an->add_grad(i, on->grad[0]);
    });
    return out;
}

template <typename T>
void check_2d(const TensorT<T>& x, const char* what) {
    if (x.shape().size() != 2) throw ConfigError(std::string(what) + ": expected a 2-d tensor");
}

// y[m,n] = x[m,k] * w[k,n]
template <typename T>
TensorT<T> matmul(const TensorT<T>& x, const TensorT<T>& w) {
    check_2d(x, "matmul");
    check_2d(w, "matmul");
    const int m = x.dim(0), k = x.dim(1), n = w.dim(1);
    if (w.dim(0) != k) throw ConfigError("matmul: inner dimension mismatch");
    std::vector<T> y(static_cast<size_t>(m) * n, T(0));
    const auto& xv = x.values();
    const auto& wv = w.values();
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const T xv_il = xv[static_cast<size_t>(i) * k + l];
            const size_t wrow = static_cast<size_t>(l) * n;
            const size_t yrow = static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) y[yrow + j] += xv_il * wv[wrow + j];
        }
    }
    TensorT<T> out = TensorT<T>::make_op({m, n}, std::move(y), {x, w});
    auto xn = x.node(), wn = w.node(), on = out.node();
    out.set_backward([xn, wn, on, m, k, n] {
        const auto& g = on->grad;
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const T gij = g[static_cast<size_t>(i) * n + j];
                    for (int l = 0; l < k; ++l)
                        xn->grad[static_cast<size_t>(i) * k + l] +=
                            gij * wn->values[static_cast<size_t>(l) * n + j];
                }
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int l = 0; l < k; ++l) {
                    const T xil = xn->values[static_cast<size_t>(i) * k + l];
                    for (int j = 0; j < n; ++j)
                        wn->grad[static_cast<size_t>(l) * n + j] +=
                            xil * g[static_cast<size_t>(i) * n + j];
                }
        }
    });
    return out;
}

// y[m,n] = x[m,k] * w[k,n] + b[n]
template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    check_2d(x, "linear");
    check_2d(w, "linear");
    const int m = x.dim(0), k = x.dim(1), n = w.dim(1);
    if (w.dim(0) != k) throw ConfigError("linear: inner dimension mismatch");
    if (b.numel() != n) throw ConfigError("linear: bias length mismatch");
    std::vector<T> y(static_cast<size_t>(m) * n);
    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i) {
        const size_t yrow = static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) y[yrow + j] = bv[static_cast<size_t>(j)];
        for (int l = 0; l < k; ++l) {
            const T xv_il = xv[static_cast<size_t>(i) * k + l];
            const size_t wrow = static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) y[yrow + j] += xv_il * wv[wrow + j];
        }
    }
    TensorT<T> out = TensorT<T>::make_op({m, n}, std::move(y), {x, w, b});
    auto xn = x.node(), wn = w.node(), bn = b.node(), on = out.node();
    out.set_backward([xn, wn, bn, on, m, k, n] {
        const auto& g = on->grad;
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    bn->grad[static_cast<size_t>(j)] += g[static_cast<size_t>(i) * n + j];
        }
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const T gij = g[static_cast<size_t>(i) * n + j];
                    for (int l = 0; l < k; ++l)
                        xn->grad[static_cast<size_t>(i) * k + l] +=
                            gij * wn->values[static_cast<size_t>(l) * n + j];
                }
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int l = 0; l < k; ++l) {
                    const T xil = xn->values[static_cast<size_t>(i) * k + l];
                    for (int j = 0; j < n; ++j)
                        wn->grad[static_cast<size_t>(l) * n + j] +=
                            xil * g[static_cast<size_t>(i) * n + j];
                }
        }
    });
    return out;
}

// y[m,n] = x[m,k] * e[n,k]^T + b[n]; used when the output projection is
// tied to an embedding table.
template <typename T>
TensorT<T> linear_tied(const TensorT<T>& x, const TensorT<T>& e, const TensorT<T>& b) {
    check_2d(x, "linear_tied");
    check_2d(e, "linear_tied");
    const int m = x.dim(0), k = x.dim(1), n = e.dim(0);
    if (e.dim(1) != k) throw ConfigError("linear_tied: embedding width mismatch");
    if (b.numel() != n) throw ConfigError("linear_tied: bias length mismatch");
    std::vector<T> y(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            T acc = b.values()[static_cast<size_t>(j)];
            for (int l = 0; l < k; ++l)
                acc += x.values()[static_cast<size_t>(i) * k + l] *
                       e.values()[static_cast<size_t>(j) * k + l];
            y[static_cast<size_t>(i) * n + j] = acc;
        }
    TensorT<T> out = TensorT<T>::make_op({m, n}, std::move(y), {x, e, b});
    auto xn = x.node(), en = e.node(), bn = b.node(), on = out.node();
    out.set_backward([xn, en, bn, on, m, k, n] {
        const auto& g = on->grad;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const T gij = g[static_cast<size_t>(i) * n + j];
                if (bn->requires_grad) bn->add_grad(j, gij);
                for (int l = 0; l < k; ++l) {
                    if (xn->requires_grad)
                        xn->add_grad(static_cast<int64_t>(i) * k + l,
                                     gij * en->values[static_cast<size_t>(j) * k + l]);
                    if (en->requires_grad)
                        en->add_grad(static_cast<int64_t>(j) * k + l,
                                     gij * xn->values[static_cast<size_t>(i) * k + l]);
                }
            }
    });
    return out;
}

template <typename T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      T eps = T(1e-5)) {
    check_2d(x, "layer_norm");
    const int m = x.dim(0), n = x.dim(1);
    if (gamma.numel() != n || beta.numel() != n)
        throw ConfigError("layer_norm: scale/shift length mismatch");
    std::vector<T> y(static_cast<size_t>(m) * n);
    std::vector<T> xhat(static_cast<size_t>(m) * n);
    std::vector<T> inv_std(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        const size_t row = static_cast<size_t>(i) * n;
        T mean = T(0);
        for (int j = 0; j < n; ++j) mean += x.values()[row + j];
        mean /= T(n);
        T var = T(0);
        for (int j = 0; j < n; ++j) {
            const T d = x.values()[row + j] - mean;
            var += d * d;
        }
        var /= T(n);
        const T istd = T(1) / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(i)] = istd;
        for (int j = 0; j < n; ++j) {
            const T xh = (x.values()[row + j] - mean) * istd;
            xhat[row + j] = xh;
            y[row + j] = xh * gamma.values()[static_cast<size_t>(j)] +
                         beta.values()[static_cast<size_t>(j)];
        }
    }
    TensorT<T> out = TensorT<T>::make_op({m, n}, std::move(y), {x, gamma, beta});
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    out.set_backward([xn, gn, bn, on, m, n, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)] {
        const auto& g = on->grad;
        for (int i = 0; i < m; ++i) {
            const size_t row = static_cast<size_t>(i) * n;
            if (gn->requires_grad || bn->requires_grad) {
                for (int j = 0; j < n; ++j) {
                    if (bn->requires_grad) bn->add_grad(j, g[row + j]);
                    if (gn->requires_grad) gn->add_grad(j, g[row + j] * xhat[row + j]);
                }
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
                for (int j = 0; j < n; ++j) {
                    const T dxh = g[row + j] * gn->values[static_cast<size_t>(j)];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xhat[row + j];
                }
                const T inv_n = T(1) / T(n);
                for (int j = 0; j < n; ++j) {
                    const T dxh = g[row + j] * gn->values[static_cast<size_t>(j)];
                    xn->grad[row + j] +=
                        inv_std[static_cast<size_t>(i)] *
                        (dxh - inv_n * sum_dxhat - xhat[row + j] * inv_n * sum_dxhat_xhat);
                }
            }
        }
    });
    return out;
}

// tanh-approximated GELU.
template <typename T>
TensorT<T> gelu(const TensorT<T>& x) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    std::vector<T> y(x.values().size());
    std::vector<T> th(x.values().size());
    for (size_t i = 0; i < y.size(); ++i) {
        const T v = x.values()[i];
        const T t = std::tanh(T(kC) * (v + T(kA) * v * v * v));
        th[i] = t;
        y[i] = T(0.5) * v * (T(1) + t);
    }
    TensorT<T> out = TensorT<T>::make_op(x.shape(), std::move(y), {x});
    auto xn = x.node(), on = out.node();
    out.set_backward([xn, on, th = std::move(th)] {
        for (int64_t i = 0; i < on->numel(); ++i) {
            const size_t s = static_cast<size_t>(i);
            const T v = xn->values[s];
            const T t = th[s];
            const T dt = (T(1) - t * t) * T(kC) * (T(1) + T(3) * T(kA) * v * v);
            xn->add_grad(i, on->grad[s] * (T(0.5) * (T(1) + t) + T(0.5) * v * dt));
        }
    });
    return out;
}

// Inverted dropout; the caller only applies it in training mode.
template <typename T>
TensorT<T> dropout(const TensorT<T>& x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
    const T keep_scale = T(1.0 / (1.0 - rate));
    std::vector<T> mask(x.values().size());
    std::vector<T> y(x.values().size());
    for (size_t i = 0; i < y.size(); ++i) {
        mask[i] = rng.uniform_real() >= rate ? keep_scale : T(0);
        y[i] = x.values()[i] * mask[i];
    }
    TensorT<T> out = TensorT<T>::make_op(x.shape(), std::move(y), {x});
    auto xn = x.node(), on = out.node();
    out.set_backward([xn, on, mask = std::move(mask)] {
        for (int64_t i = 0; i < on->numel(); ++i)
            xn->add_grad(i, on->grad[static_cast<size_t>(i)] * mask[static_cast<size_t>(i)]);
    });
    return out;
}

template <typename T>
TensorT<T> gather_rows(const TensorT<T>& x, std::vector<int> rows) {
    check_2d(x, "gather_rows");
    const int m = x.dim(0), n = x.dim(1);
    const int k = static_cast<int>(rows.size());
    std::vector<T> y(static_cast<size_t>(k) * n);
    for (int i = 0; i < k; ++i) {
        const int r = rows[static_cast<size_t>(i)];
        if (r < 0 || r >= m) throw DataError("gather_rows: row index out of range");
        for (int j = 0; j < n; ++j)
            y[static_cast<size_t>(i) * n + j] = x.values()[static_cast<size_t>(r) * n + j];
    }
    TensorT<T> out = TensorT<T>::make_op({k, n}, std::move(y), {x});
    auto xn = x.node(), on = out.node();
    out.set_backward([xn, on, rows = std::move(rows), n] {
        for (size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < n; ++j)
                xn->add_grad(static_cast<int64_t>(rows[i]) * n + j,
                             on->grad[i * static_cast<size_t>(n) + j]);
    });
    return out;
}

// Column j of x viewed as a [1, m] row; used by the span heads.
template <typename T>
TensorT<T> col_as_row(const TensorT<T>& x, int j) {
    check_2d(x, "col_as_row");
    const int m = x.dim(0), n = x.dim(1);
    if (j < 0 || j >= n) throw ConfigError("col_as_row: column out of range");
    std::vector<T> y(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) y[static_cast<size_t>(i)] = x.values()[static_cast<size_t>(i) * n + j];
    TensorT<T> out = TensorT<T>::make_op({1, m}, std::move(y), {x});
    auto xn = x.node(), on = out.node();
    out.set_backward([xn, on, j, m, n] {
        for (int i = 0; i < m; ++i)
            xn->add_grad(static_cast<int64_t>(i) * n + j, on->grad[static_cast<size_t>(i)]);
    });
    return out;
}

// Mean negative log-likelihood over all rows; labels must be valid class
// indices for every row.
template <typename T>
TensorT<T> cross_entropy_mean(const TensorT<T>& logits, std::vector<int> labels) {
    check_2d(logits, "cross_entropy_mean");
    const int m = logits.dim(0), n = logits.dim(1);
    if (static_cast<int>(labels.size()) != m)
        throw ConfigError("cross_entropy_mean: one label per row required");
    if (m == 0) throw ConfigError("cross_entropy_mean: no rows");
    std::vector<T> probs(static_cast<size_t>(m) * n);
    T loss = T(0);
    for (int i = 0; i < m; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= n) throw DataError("cross_entropy_mean: label out of range");
        const size_t row = static_cast<size_t>(i) * n;
        T mx = logits.values()[row];
        for (int j = 1; j < n; ++j) mx = std::max(mx, logits.values()[row + j]);
        T sum = T(0);
        for (int j = 0; j < n; ++j) {
            const T e = std::exp(logits.values()[row + j] - mx);
            probs[row + j] = e;
            sum += e;
        }
        const T inv_sum = T(1) / sum;
        for (int j = 0; j < n; ++j) probs[row + j] *= inv_sum;
        loss += std::log(sum) + mx - logits.values()[row + y];
    }
    loss /= T(m);
    TensorT<T> out = TensorT<T>::make_op({1}, {loss}, {logits});
    auto ln = logits.node(), on = out.node();
    out.set_backward([ln, on, probs = std::move(probs), labels = std::move(labels), m, n] {
        const T g = on->grad[0] / T(m);
        ln->ensure_grad();
        for (int i = 0; i < m; ++i) {
            const size_t row = static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) ln->grad[row + j] += g * probs[row + j];
            ln->grad[row + labels[static_cast<size_t>(i)]] -= g;
        }
    });
    return out;
}

}  // namespace ops

// Pairwise visibility for attention; visible(i, p) == row i may attend to
// column p.
struct AttnMask {
    int len = 0;
    std::vector<uint8_t> visible;  // len * len, row-major

    static AttnMask full(int len) {
        AttnMask m;
        m.len = len;
        m.visible.assign(static_cast<size_t>(len) * len, 1);
        return m;
    }

    static AttnMask none(int len) {
        AttnMask m;
        m.len = len;
        m.visible.assign(static_cast<size_t>(len) * len, 0);
        return m;
    }

    bool at(int i, int p) const { return visible[static_cast<size_t>(i) * len + p] != 0; }
    void set(int i, int p, bool v) { visible[static_cast<size_t>(i) * len + p] = v ? 1 : 0; }
};

namespace ops {

// Multi-head scaled dot-product attention over a single sequence.
// Invisible pairs get exactly zero probability; a row with no visible
// position yields a zero context vector. probe_out, when given, receives
// the post-softmax attention weights as [head][i*len+p].
template <typename T>
TensorT<T> multi_head_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                                const AttnMask& mask, int n_heads,
                                std::vector<std::vector<T>>* probe_out = nullptr) {
    check_2d(q, "attention");
    check_2d(k, "attention");
    check_2d(v, "attention");
    const int len = q.dim(0), d = q.dim(1);
    if (k.dim(0) != len || v.dim(0) != len || k.dim(1) != d || v.dim(1) != d)
        throw ConfigError("attention: q/k/v shape mismatch");
    if (mask.len != len) throw ConfigError("attention: mask length mismatch");
    if (n_heads <= 0 || d % n_heads != 0)
        throw ConfigError("attention: d_model must be divisible by n_heads");
    const int dh = d / n_heads;
    const T att_scale = T(1) / std::sqrt(T(dh));

    std::vector<std::vector<T>> probs(static_cast<size_t>(n_heads));
    std::vector<T> y(static_cast<size_t>(len) * d, T(0));
    for (int h = 0; h < n_heads; ++h) {
        auto& a = probs[static_cast<size_t>(h)];
        a.assign(static_cast<size_t>(len) * len, T(0));
        const int off = h * dh;
        for (int i = 0; i < len; ++i) {
            // Scores over visible positions only.
            T mx = T(0);
            bool any = false;
            for (int p = 0; p < len; ++p) {
                if (!mask.at(i, p)) continue;
                T s = T(0);
                for (int x = 0; x < dh; ++x)
                    s += q.values()[static_cast<size_t>(i) * d + off + x] *
                         k.values()[static_cast<size_t>(p) * d + off + x];
                s *= att_scale;
                a[static_cast<size_t>(i) * len + p] = s;
                mx = any ? std::max(mx, s) : s;
                any = true;
            }
            if (!any) continue;  // fully masked row: zero context
            T sum = T(0);
            for (int p = 0; p < len; ++p) {
                if (!mask.at(i, p)) continue;
                const T e = std::exp(a[static_cast<size_t>(i) * len + p] - mx);
                a[static_cast<size_t>(i) * len + p] = e;
                sum += e;
            }
            const T inv = T(1) / sum;
            for (int p = 0; p < len; ++p) {
                if (!mask.at(i, p)) {
                    a[static_cast<size_t>(i) * len + p] = T(0);
                    continue;
                }
                const T w = a[static_cast<size_t>(i) * len + p] * inv;
                a[static_cast<size_t>(i) * len + p] = w;
                for (int x = 0; x < dh; ++x)
                    y[static_cast<size_t>(i) * d + off + x] +=
                        w * v.values()[static_cast<size_t>(p) * d + off + x];
            }
        }
    }
    if (probe_out) *probe_out = probs;

    TensorT<T> out = TensorT<T>::make_op({len, d}, std::move(y), {q, k, v});
    auto qn = q.node(), kn = k.node(), vn = v.node(), on = out.node();
    out.set_backward([qn, kn, vn, on, probs = std::move(probs), n_heads, len, d, dh,
                      att_scale] {
        const auto& g = on->grad;
        qn->ensure_grad();
        kn->ensure_grad();
        vn->ensure_grad();
        std::vector<T> da(static_cast<size_t>(len) * len);
        for (int h = 0; h < n_heads; ++h) {
            const auto& a = probs[static_cast<size_t>(h)];
            const int off = h * dh;
            // dV and dA
            for (int i = 0; i < len; ++i) {
                for (int p = 0; p < len; ++p) {
                    const T w = a[static_cast<size_t>(i) * len + p];
                    T dot = T(0);
                    for (int x = 0; x < dh; ++x) {
                        const T gix = g[static_cast<size_t>(i) * d + off + x];
                        vn->grad[static_cast<size_t>(p) * d + off + x] += w * gix;
                        dot += gix * vn->values[static_cast<size_t>(p) * d + off + x];
                    }
                    da[static_cast<size_t>(i) * len + p] = dot;
                }
            }
            // Softmax backward, then dQ/dK. a[i][p] == 0 exactly for
            // invisible pairs, which keeps their contributions at zero.
            for (int i = 0; i < len; ++i) {
                T row_dot = T(0);
                for (int p = 0; p < len; ++p)
                    row_dot += a[static_cast<size_t>(i) * len + p] *
                               da[static_cast<size_t>(i) * len + p];
                for (int p = 0; p < len; ++p) {
                    const T w = a[static_cast<size_t>(i) * len + p];
                    if (w == T(0)) continue;
                    const T ds = w * (da[static_cast<size_t>(i) * len + p] - row_dot) * att_scale;
                    for (int x = 0; x < dh; ++x) {
                        qn->grad[static_cast<size_t>(i) * d + off + x] +=
                            ds * kn->values[static_cast<size_t>(p) * d + off + x];
                        kn->grad[static_cast<size_t>(p) * d + off + x] +=
                            ds * qn->values[static_cast<size_t>(i) * d + off + x];
                    }
                }
            }
        }
    });
    return out;
}

}  // namespace ops

}  // namespace mglm
