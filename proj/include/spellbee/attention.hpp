#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

#include "spellbee/common.hpp"
#include "spellbee/tensor.hpp"

namespace spellbee {

// Scaled dot-product attention with grouped KV heads and optional causal mask.
//
// Layout: q is [(batch*seq) x (n_heads*head_dim)], k and v are
// [(batch*seq) x (n_kv_heads*head_dim)]. Each KV head serves
// n_heads/n_kv_heads query heads. Softmax probabilities are cached for the
// backward pass. Work parallelizes over (batch, kv-head) tasks; all query
// heads of one group run inside a single task so KV gradient accumulation
// stays ordered and deterministic.
template <class Real>
Tensor<Real> attention(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>& v,
                       std::size_t batch, std::size_t seq, std::size_t n_heads,
                       std::size_t n_kv_heads, bool causal) {
    check(n_kv_heads >= 1 && n_heads % n_kv_heads == 0,
          "attention: n_heads (" + std::to_string(n_heads) +
              ") must be divisible by n_kv_heads (" + std::to_string(n_kv_heads) + ")");
    check(q.rank() == 2 && k.rank() == 2 && v.rank() == 2, "attention: q,k,v must be rank 2");
    check(q.dim(0) == batch * seq && k.dim(0) == batch * seq && v.dim(0) == batch * seq,
          "attention: row counts must equal batch*seq");
    check(q.dim(1) % n_heads == 0, "attention: q width not divisible by n_heads");
    std::size_t head_dim = q.dim(1) / n_heads;
    check(k.dim(1) == n_kv_heads * head_dim && v.dim(1) == n_kv_heads * head_dim,
          "attention: k/v width must be n_kv_heads*head_dim");

    std::size_t group = n_heads / n_kv_heads;
    std::size_t qw = q.dim(1), kw = k.dim(1);
    Real scale = Real(1) / static_cast<Real>(std::sqrt(static_cast<double>(head_dim)));

    // probs[((b*n_heads + h)*seq + i)*seq + j]
    auto probs = std::make_shared<std::vector<Real>>(batch * n_heads * seq * seq, Real(0));

    auto qi = q.impl();
    auto ki = k.impl();
    auto vi = v.impl();
    Tensor<Real> out = detail::make_op<Real>(
        {batch * seq, qw}, {q, k, v},
        [qi, ki, vi, probs, batch, seq, n_heads, n_kv_heads, head_dim, group, qw, kw,
         scale, causal](TensorImpl<Real>& self) {
            bool need_q = qi->requires_grad, need_kv = ki->requires_grad || vi->requires_grad;
            if (!need_q && !need_kv) return;
            parallel_for(batch * n_kv_heads, [&](std::size_t t0, std::size_t t1) {
                std::vector<Real> dp(seq);
                for (std::size_t t = t0; t < t1; ++t) {
                    std::size_t b = t / n_kv_heads, g = t % n_kv_heads;
                    for (std::size_t m = 0; m < group; ++m) {
                        std::size_t h = g * group + m;
                        const Real* p = probs->data() + ((b * n_heads + h) * seq) * seq;
                        for (std::size_t i = 0; i < seq; ++i) {
                            std::size_t limit = causal ? i + 1 : seq;
                            const Real* go = self.grad.data() + (b * seq + i) * qw + h * head_dim;
                            const Real* prow = p + i * seq;
                            // dprobs[i][j] = <dout_i, v_j>; softmax backward in place.
                            Real dot_pp = 0;
                            for (std::size_t j = 0; j < limit; ++j) {
                                const Real* vj = vi->value.data() + (b * seq + j) * kw + g * head_dim;
                                Real s = 0;
                                for (std::size_t c = 0; c < head_dim; ++c) s += go[c] * vj[c];
                                dp[j] = s;
                                dot_pp += prow[j] * s;
                            }
                            for (std::size_t j = 0; j < limit; ++j) {
                                Real pij = prow[j];
                                if (pij == Real(0)) continue;
                                Real dscore = pij * (dp[j] - dot_pp) * scale;
                                const Real* qrow =
                                    qi->value.data() + (b * seq + i) * qw + h * head_dim;
                                const Real* krow =
                                    ki->value.data() + (b * seq + j) * kw + g * head_dim;
                                if (qi->requires_grad) {
                                    Real* gq = qi->grad.data() + (b * seq + i) * qw + h * head_dim;
                                    for (std::size_t c = 0; c < head_dim; ++c)
                                        gq[c] += dscore * krow[c];
                                }
                                if (ki->requires_grad) {
                                    Real* gk = ki->grad.data() + (b * seq + j) * kw + g * head_dim;
                                    for (std::size_t c = 0; c < head_dim; ++c)
                                        gk[c] += dscore * qrow[c];
                                }
                                if (vi->requires_grad) {
                                    Real* gv = vi->grad.data() + (b * seq + j) * kw + g * head_dim;
                                    for (std::size_t c = 0; c < head_dim; ++c)
                                        gv[c] += pij * go[c];
                                }
                            }
                        }
                    }
                }
            });
        });

    parallel_for(batch * n_kv_heads, [&](std::size_t t0, std::size_t t1) {
        std::vector<Real> scores(seq);
        for (std::size_t t = t0; t < t1; ++t) {
            std::size_t b = t / n_kv_heads, g = t % n_kv_heads;
            for (std::size_t m = 0; m < group; ++m) {
                std::size_t h = g * group + m;
                Real* p = probs->data() + ((b * n_heads + h) * seq) * seq;
                for (std::size_t i = 0; i < seq; ++i) {
                    std::size_t limit = causal ? i + 1 : seq;
                    const Real* qrow = q.value().data() + (b * seq + i) * qw + h * head_dim;
                    Real mx = -std::numeric_limits<Real>::infinity();
                    for (std::size_t j = 0; j < limit; ++j) {
                        const Real* krow = k.value().data() + (b * seq + j) * kw + g * head_dim;
                        Real s = 0;
                        for (std::size_t c = 0; c < head_dim; ++c) s += qrow[c] * krow[c];
                        s *= scale;
                        scores[j] = s;
                        if (s > mx) mx = s;
                    }
                    Real sum = 0;
                    for (std::size_t j = 0; j < limit; ++j) {
                        Real e = std::exp(scores[j] - mx);
                        scores[j] = e;
                        sum += e;
                    }
                    Real* prow = p + i * seq;
                    for (std::size_t j = 0; j < limit; ++j) prow[j] = scores[j] / sum;
                    Real* orow = out.value().data() + (b * seq + i) * qw + h * head_dim;
                    for (std::size_t j = 0; j < limit; ++j) {
                        Real pij = prow[j];
                        const Real* vrow = v.value().data() + (b * seq + j) * kw + g * head_dim;
                        for (std::size_t c = 0; c < head_dim; ++c) orow[c] += pij * vrow[c];
                    }
                }
            }
        }
    });
    return out;
}

}  // namespace spellbee
