#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "spellbee/common.hpp"

namespace spellbee {

// Dense tensor with reverse-mode autodiff. Real is float for training and
// double for verification; the full model is templated on it.
//
// Graph model: every op returns a fresh Tensor whose impl records its parents
// and a backward closure. Values are written once; the tape for one step is
// rebuilt from scratch each step and dropped afterwards.

template <class Real>
struct TensorImpl {
    std::vector<std::size_t> shape;
    std::vector<Real> value;
    std::vector<Real> grad;  // sized iff requires_grad
    bool requires_grad = false;
    std::string label;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    // Distributes impl.grad into the parents' grads.
    std::function<void(TensorImpl&)> backward_fn;
};

template <class Real>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<Real>>();
        t.impl_->shape = std::move(shape);
        t.impl_->value.assign(t.numel_of(t.impl_->shape), Real(0));
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor from(std::vector<std::size_t> shape, std::vector<Real> data,
                       bool requires_grad = false) {
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<Real>>();
        check(numel_of(shape) == data.size(), "Tensor::from: data length does not match shape");
        t.impl_->shape = std::move(shape);
        t.impl_->value = std::move(data);
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor scalar(Real v) { return from({}, {v}); }

    bool defined() const { return impl_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return impl_->shape; }
    std::size_t numel() const { return impl_->value.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
    std::size_t rank() const { return impl_->shape.size(); }

    std::vector<Real>& value() { return impl_->value; }
    const std::vector<Real>& value() const { return impl_->value; }
    std::vector<Real>& grad() {
        check(impl_->requires_grad, "Tensor::grad: tensor does not require grad");
        return impl_->grad;
    }
    const std::vector<Real>& grad() const {
        check(impl_->requires_grad, "Tensor::grad: tensor does not require grad");
        return impl_->grad;
    }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    void set_requires_grad(bool rg) {
        impl_->requires_grad = rg;
        if (rg)
            impl_->grad.assign(impl_->value.size(), Real(0));
        else
            impl_->grad.clear();
    }

    const std::string& label() const { return impl_->label; }
    Tensor& set_label(std::string name) {
        impl_->label = std::move(name);
        return *this;
    }

    Real item() const {
        check(numel() == 1, "Tensor::item: tensor is not a scalar");
        return impl_->value[0];
    }

    void zero_grad() {
        if (impl_ && impl_->requires_grad)
            std::fill(impl_->grad.begin(), impl_->grad.end(), Real(0));
    }

    // Reverse pass from a scalar root. Seeds d(root)/d(root) = 1 and walks the
    // tape in reverse topological order. Single-threaded by contract.
    void backward() {
        check(numel() == 1, "Tensor::backward: root must be a scalar");
        check(impl_->requires_grad, "Tensor::backward: root does not require grad");
        std::vector<TensorImpl<Real>*> order;
        std::unordered_set<TensorImpl<Real>*> seen;
        topo(impl_.get(), seen, order);
        impl_->grad[0] += Real(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if ((*it)->backward_fn) (*it)->backward_fn(**it);
        }
    }

    std::shared_ptr<TensorImpl<Real>> impl() const { return impl_; }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }

private:
    static void topo(TensorImpl<Real>* node, std::unordered_set<TensorImpl<Real>*>& seen,
                     std::vector<TensorImpl<Real>*>& order) {
        // Iterative DFS; graphs can be deep (one node per op per layer).
        struct Frame {
            TensorImpl<Real>* node;
            std::size_t next_child;
        };
        std::vector<Frame> stack{{node, 0}};
        seen.insert(node);
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next_child < f.node->parents.size()) {
                TensorImpl<Real>* p = f.node->parents[f.next_child++].get();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(f.node);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<TensorImpl<Real>> impl_;
};

namespace detail {

template <class Real>
Tensor<Real> make_op(std::vector<std::size_t> shape,
                     std::vector<Tensor<Real>> parents,
                     std::function<void(TensorImpl<Real>&)> backward_fn) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    Tensor<Real> out = Tensor<Real>::zeros(std::move(shape), rg);
    if (rg) {
        for (auto& p : parents) out.impl()->parents.push_back(p.impl());
        out.impl()->backward_fn = std::move(backward_fn);
    }
    return out;
}

// C[m x n] += A[m x k] * B[k x n]. i-k-j order; the j loop is contiguous and
// auto-vectorizes. Row-parallel, fixed reduction order per element.
template <class Real>
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
             std::size_t n) {
    parallel_for(m, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            Real* crow = c + i * n;
            const Real* arow = a + i * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                Real av = arow[kk];
                const Real* brow = b + kk * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// C[m x n] += A[m x k] * B^T where B is [n x k]. Dot products over contiguous
// rows; four fixed-order partial sums so the loop vectorizes deterministically.
template <class Real>
void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
             std::size_t n) {
    parallel_for(m, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const Real* arow = a + i * k;
            Real* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const Real* brow = b + j * k;
                Real s0 = 0, s1 = 0, s2 = 0, s3 = 0;
                std::size_t kk = 0;
                for (; kk + 4 <= k; kk += 4) {
                    s0 += arow[kk] * brow[kk];
                    s1 += arow[kk + 1] * brow[kk + 1];
                    s2 += arow[kk + 2] * brow[kk + 2];
                    s3 += arow[kk + 3] * brow[kk + 3];
                }
                Real s = (s0 + s1) + (s2 + s3);
                for (; kk < k; ++kk) s += arow[kk] * brow[kk];
                crow[j] += s;
            }
        }
    });
}

// C[k x n] += A^T * B where A is [m x k], B is [m x n]. k-parallel.
template <class Real>
void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
             std::size_t n) {
    parallel_for(k, [&](std::size_t k0, std::size_t k1) {
        for (std::size_t i = 0; i < m; ++i) {
            const Real* arow = a + i * k;
            const Real* brow = b + i * n;
            for (std::size_t kk = k0; kk < k1; ++kk) {
                Real av = arow[kk];
                Real* crow = c + kk * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

template <class Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    check(a.rank() == 2 && b.rank() == 2, "matmul: both operands must be rank 2");
    check(a.dim(1) == b.dim(0), "matmul: inner extents differ, " +
                                    detail::shape_str(a.shape()) + " vs " +
                                    detail::shape_str(b.shape()));
    std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto ai = a.impl();
    auto bi = b.impl();
    Tensor<Real> out = detail::make_op<Real>(
        {m, n}, {a, b}, [ai, bi, m, k, n](TensorImpl<Real>& self) {
            if (ai->requires_grad)
                detail::gemm_nt(self.grad.data(), bi->value.data(), ai->grad.data(), m, n, k);
            if (bi->requires_grad)
                detail::gemm_tn(ai->value.data(), self.grad.data(), bi->grad.data(), m, k, n);
        });
    detail::gemm_nn(a.value().data(), b.value().data(), out.value().data(), m, k, n);
    return out;
}

template <class Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    check(a.shape() == b.shape(), "add: shape mismatch");
    auto ai = a.impl();
    auto bi = b.impl();
    Tensor<Real> out =
        detail::make_op<Real>(a.shape(), {a, b}, [ai, bi](TensorImpl<Real>& self) {
            if (ai->requires_grad)
                for (std::size_t i = 0; i < self.grad.size(); ++i) ai->grad[i] += self.grad[i];
            if (bi->requires_grad)
                for (std::size_t i = 0; i < self.grad.size(); ++i) bi->grad[i] += self.grad[i];
        });
    for (std::size_t i = 0; i < out.numel(); ++i) out.value()[i] = a.value()[i] + b.value()[i];
    return out;
}

template <class Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    check(a.shape() == b.shape(), "mul: shape mismatch");
    auto ai = a.impl();
    auto bi = b.impl();
    Tensor<Real> out =
        detail::make_op<Real>(a.shape(), {a, b}, [ai, bi](TensorImpl<Real>& self) {
            if (ai->requires_grad)
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    ai->grad[i] += self.grad[i] * bi->value[i];
            if (bi->requires_grad)
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    bi->grad[i] += self.grad[i] * ai->value[i];
        });
    for (std::size_t i = 0; i < out.numel(); ++i) out.value()[i] = a.value()[i] * b.value()[i];
    return out;
}

// Multiply by a compile-time-known constant (not a learned parameter).
template <class Real>
Tensor<Real> scale(const Tensor<Real>& a, Real c) {
    auto ai = a.impl();
    Tensor<Real> out = detail::make_op<Real>(a.shape(), {a}, [ai, c](TensorImpl<Real>& self) {
        if (ai->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i) ai->grad[i] += self.grad[i] * c;
    });
    for (std::size_t i = 0; i < out.numel(); ++i) out.value()[i] = a.value()[i] * c;
    return out;
}

// x[rows x d] + bias[d] broadcast over rows.
template <class Real>
Tensor<Real> add_row_broadcast(const Tensor<Real>& x, const Tensor<Real>& bias) {
    check(x.rank() == 2 && bias.rank() == 1, "add_row_broadcast: expects [n x d] and [d]");
    check(x.dim(1) == bias.dim(0), "add_row_broadcast: width mismatch");
    std::size_t rows = x.dim(0), d = x.dim(1);
    auto xi = x.impl();
    auto bi = bias.impl();
    Tensor<Real> out =
        detail::make_op<Real>(x.shape(), {x, bias}, [xi, bi, rows, d](TensorImpl<Real>& self) {
            if (xi->requires_grad)
                for (std::size_t i = 0; i < self.grad.size(); ++i) xi->grad[i] += self.grad[i];
            if (bi->requires_grad)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) bi->grad[j] += self.grad[r * d + j];
        });
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j)
            out.value()[r * d + j] = x.value()[r * d + j] + bias.value()[j];
    return out;
}

template <class Real>
Tensor<Real> silu(const Tensor<Real>& x) {
    auto xi = x.impl();
    Tensor<Real> out = detail::make_op<Real>(x.shape(), {x}, [xi](TensorImpl<Real>& self) {
        if (!xi->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            Real v = xi->value[i];
            Real s = Real(1) / (Real(1) + std::exp(-v));
            xi->grad[i] += self.grad[i] * s * (Real(1) + v * (Real(1) - s));
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        Real v = x.value()[i];
        out.value()[i] = v / (Real(1) + std::exp(-v));
    }
    return out;
}

// Exact (erf-based) GELU.
template <class Real>
Tensor<Real> gelu(const Tensor<Real>& x) {
    constexpr Real inv_sqrt2 = Real(0.70710678118654752440084436210485);
    constexpr Real inv_sqrt2pi = Real(0.39894228040143267793994605993438);
    auto xi = x.impl();
    Tensor<Real> out = detail::make_op<Real>(x.shape(), {x}, [xi](TensorImpl<Real>& self) {
        if (!xi->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            Real v = xi->value[i];
            Real cdf = Real(0.5) * (Real(1) + std::erf(v * inv_sqrt2));
            Real pdf = inv_sqrt2pi * std::exp(Real(-0.5) * v * v);
            xi->grad[i] += self.grad[i] * (cdf + v * pdf);
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        Real v = x.value()[i];
        out.value()[i] = v * Real(0.5) * (Real(1) + std::erf(v * inv_sqrt2));
    }
    return out;
}

template <class Real>
Tensor<Real> relu(const Tensor<Real>& x) {
    auto xi = x.impl();
    Tensor<Real> out = detail::make_op<Real>(x.shape(), {x}, [xi](TensorImpl<Real>& self) {
        if (!xi->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (xi->value[i] > Real(0)) xi->grad[i] += self.grad[i];
    });
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.value()[i] = x.value()[i] > Real(0) ? x.value()[i] : Real(0);
    return out;
}

// Weight-only layer norm over the last axis: standardize, then scale. No bias.
template <class Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& weight,
                        Real eps = Real(1e-5)) {
    check(x.rank() >= 1 && weight.rank() == 1, "layer_norm: expects [... x d] and [d]");
    std::size_t d = x.shape().back();
    check(d == weight.dim(0), "layer_norm: weight width mismatch");
    check(d >= 1, "layer_norm: d must be >= 1");
    std::size_t rows = x.numel() / d;
    auto xi = x.impl();
    auto wi = weight.impl();
    // Standardized activations are cached for the backward pass.
    auto xhat = std::make_shared<std::vector<Real>>(x.numel());
    auto inv_std = std::make_shared<std::vector<Real>>(rows);
    Tensor<Real> out = detail::make_op<Real>(
        x.shape(), {x, weight},
        [xi, wi, xhat, inv_std, rows, d](TensorImpl<Real>& self) {
            if (wi->requires_grad) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j)
                        wi->grad[j] += self.grad[r * d + j] * (*xhat)[r * d + j];
            }
            if (!xi->requires_grad) return;
            for (std::size_t r = 0; r < rows; ++r) {
                const Real* g = self.grad.data() + r * d;
                const Real* xh = xhat->data() + r * d;
                Real sum_gw = 0, sum_gwx = 0;
                for (std::size_t j = 0; j < d; ++j) {
                    Real gw = g[j] * wi->value[j];
                    sum_gw += gw;
                    sum_gwx += gw * xh[j];
                }
                Real inv_d = Real(1) / static_cast<Real>(d);
                Real* gx = xi->grad.data() + r * d;
                for (std::size_t j = 0; j < d; ++j) {
                    Real gw = g[j] * wi->value[j];
                    gx[j] += (*inv_std)[r] * (gw - inv_d * sum_gw - inv_d * xh[j] * sum_gwx);
                }
            }
        });
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* xr = x.value().data() + r * d;
        Real mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<Real>(d);
        Real var = 0;
        for (std::size_t j = 0; j < d; ++j) {
            Real c = xr[j] - mean;
            var += c * c;
        }
        var /= static_cast<Real>(d);
        Real is = Real(1) / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t j = 0; j < d; ++j) {
            Real h = (xr[j] - mean) * is;
            (*xhat)[r * d + j] = h;
            out.value()[r * d + j] = h * weight.value()[j];
        }
    }
    return out;
}

// Gated MLP: (silu(x W_gate) . (x W_up)) W_down.
template <class Real>
Tensor<Real> swiglu(const Tensor<Real>& x, const Tensor<Real>& w_up,
                    const Tensor<Real>& w_gate, const Tensor<Real>& w_down) {
    return matmul(mul(silu(matmul(x, w_gate)), matmul(x, w_up)), w_down);
}

// Row gather: out[i, :] = table[ids[i], :]. Backward scatter-adds; the scatter
// is serialized because different rows may hit the same table row.
template <class Real>
Tensor<Real> gather_rows(const Tensor<Real>& table, std::span<const std::int32_t> ids) {
    check(table.rank() == 2, "gather_rows: table must be rank 2");
    std::size_t v = table.dim(0), d = table.dim(1), n = ids.size();
    for (auto id : ids)
        check(id >= 0 && static_cast<std::size_t>(id) < v,
              "gather_rows: token id " + std::to_string(id) + " out of range [0, " +
                  std::to_string(v) + ")");
    auto ti = table.impl();
    auto ids_copy = std::make_shared<std::vector<std::int32_t>>(ids.begin(), ids.end());
    Tensor<Real> out =
        detail::make_op<Real>({n, d}, {table}, [ti, ids_copy, d](TensorImpl<Real>& self) {
            if (!ti->requires_grad) return;
            for (std::size_t i = 0; i < ids_copy->size(); ++i) {
                Real* dst = ti->grad.data() + static_cast<std::size_t>((*ids_copy)[i]) * d;
                const Real* src = self.grad.data() + i * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        });
    for (std::size_t i = 0; i < n; ++i) {
        const Real* src = table.value().data() + static_cast<std::size_t>(ids[i]) * d;
        Real* dst = out.value().data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
    }
    return out;
}

// Mean over rows of -log softmax(logits)[target]. Max-subtraction stabilized;
// the backward recomputes probabilities from cached log-sum-exp values.
template <class Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, std::span<const std::int32_t> targets) {
    check(logits.rank() == 2, "cross_entropy: logits must be [n x V]");
    std::size_t n = logits.dim(0), vocab = logits.dim(1);
    check(targets.size() == n, "cross_entropy: one target per row required");
    for (auto t : targets)
        check(t >= 0 && static_cast<std::size_t>(t) < vocab,
              "cross_entropy: target " + std::to_string(t) + " out of range [0, " +
                  std::to_string(vocab) + ")");
    auto li = logits.impl();
    auto tgt = std::make_shared<std::vector<std::int32_t>>(targets.begin(), targets.end());
    auto lse = std::make_shared<std::vector<Real>>(n);
    Tensor<Real> out = detail::make_op<Real>(
        {}, {logits}, [li, tgt, lse, n, vocab](TensorImpl<Real>& self) {
            if (!li->requires_grad) return;
            Real g = self.grad[0] / static_cast<Real>(n);
            parallel_for(n, [&](std::size_t r0, std::size_t r1) {
                for (std::size_t r = r0; r < r1; ++r) {
                    const Real* row = li->value.data() + r * vocab;
                    Real* grow = li->grad.data() + r * vocab;
                    for (std::size_t j = 0; j < vocab; ++j)
                        grow[j] += g * std::exp(row[j] - (*lse)[r]);
                    grow[static_cast<std::size_t>((*tgt)[r])] -= g;
                }
            });
        });
    Real loss = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const Real* row = logits.value().data() + r * vocab;
        Real mx = row[0];
        for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
        Real sum = 0;
        for (std::size_t j = 0; j < vocab; ++j) sum += std::exp(row[j] - mx);
        Real l = mx + std::log(sum);
        (*lse)[r] = l;
        loss += l - row[static_cast<std::size_t>(targets[r])];
    }
    out.value()[0] = loss / static_cast<Real>(n);
    return out;
}

// Sum of all elements, as a scalar.
template <class Real>
Tensor<Real> sum(const Tensor<Real>& a) {
    auto ai = a.impl();
    Tensor<Real> out = detail::make_op<Real>({}, {a}, [ai](TensorImpl<Real>& self) {
        if (!ai->requires_grad) return;
        for (auto& g : ai->grad) g += self.grad[0];
    });
    Real s = 0;
    for (auto v : a.value()) s += v;
    out.value()[0] = s;
    return out;
}

// Row-wise softmax on raw values (no autograd); used by greedy decoding and
// in tests of the attention invariants.
template <class Real>
std::vector<Real> softmax_rows(const std::vector<Real>& x, std::size_t cols) {
    check(cols > 0 && x.size() % cols == 0, "softmax_rows: bad column count");
    std::vector<Real> out(x.size());
    std::size_t rows = x.size() / cols;
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* src = x.data() + r * cols;
        Real* dst = out.data() + r * cols;
        Real mx = src[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, src[j]);
        Real sum = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            dst[j] = std::exp(src[j] - mx);
            sum += dst[j];
        }
        for (std::size_t j = 0; j < cols; ++j) dst[j] /= sum;
    }
    return out;
}

}  // namespace spellbee
