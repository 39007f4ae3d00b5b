#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "spellbee/common.hpp"
#include "spellbee/tensor.hpp"

namespace spellbee {

// Rotary position encoding: adjacent pairs (v[2k], v[2k+1]) are rotated by
// angle pos * base^(-2k/d). Used in two places with the same math: byte
// positions inside a token (0..15) and token positions inside a sequence.

// Angle frequencies for a given width; freq[k] = base^(-2k/d), k < d/2.
template <class Real>
std::vector<Real> rope_frequencies(std::size_t d, double base) {
    check(d % 2 == 0, "rope: dimension must be even, got " + std::to_string(d));
    std::vector<Real> freq(d / 2);
    for (std::size_t k = 0; k < d / 2; ++k)
        freq[k] = static_cast<Real>(std::pow(base, -2.0 * static_cast<double>(k) /
                                                       static_cast<double>(d)));
    return freq;
}

// In-place rotation of one d-vector by position pos. dir=+1 rotates forward,
// dir=-1 applies the transpose (used by backward passes).
template <class Real>
void rope_apply(Real* v, std::size_t d, double pos, const std::vector<Real>& freq,
                int dir = 1) {
    for (std::size_t k = 0; k < d / 2; ++k) {
        double angle = pos * static_cast<double>(freq[k]) * dir;
        Real c = static_cast<Real>(std::cos(angle));
        Real s = static_cast<Real>(std::sin(angle));
        Real v0 = v[2 * k];
        Real v1 = v[2 * k + 1];
        v[2 * k] = v0 * c - v1 * s;
        v[2 * k + 1] = v0 * s + v1 * c;
    }
}

// Out-of-line convenience form matching the embedding construction: rotate a
// copy of v by its position.
template <class Real>
std::vector<Real> rope_rotate(const std::vector<Real>& v, std::size_t pos, double base) {
    std::vector<Real> out = v;
    auto freq = rope_frequencies<Real>(v.size(), base);
    rope_apply(out.data(), out.size(), static_cast<double>(pos), freq);
    return out;
}

// Differentiable sequence-level RoPE over per-head slices. x is
// [(batch*seq) x (n_heads*head_dim)]; row b*seq + s is rotated by position s
// independently within each head. The transpose of a rotation is the rotation
// by the negative angle, which is all the backward pass needs.
template <class Real>
Tensor<Real> rope_sequence(const Tensor<Real>& x, std::size_t batch, std::size_t seq,
                           std::size_t n_heads, double base) {
    check(x.rank() == 2, "rope_sequence: expects [(batch*seq) x width]");
    check(x.dim(0) == batch * seq, "rope_sequence: row count != batch*seq");
    check(x.dim(1) % n_heads == 0, "rope_sequence: width not divisible by head count");
    std::size_t head_dim = x.dim(1) / n_heads;
    auto freq = std::make_shared<std::vector<Real>>(rope_frequencies<Real>(head_dim, base));
    std::size_t width = x.dim(1);
    auto xi = x.impl();
    Tensor<Real> out = detail::make_op<Real>(
        x.shape(), {x}, [xi, freq, batch, seq, n_heads, head_dim, width](TensorImpl<Real>& self) {
            if (!xi->requires_grad) return;
            std::vector<Real> tmp(head_dim);
            for (std::size_t r = 0; r < batch * seq; ++r) {
                double pos = static_cast<double>(r % seq);
                for (std::size_t h = 0; h < n_heads; ++h) {
                    const Real* g = self.grad.data() + r * width + h * head_dim;
                    std::copy(g, g + head_dim, tmp.data());
                    rope_apply(tmp.data(), head_dim, pos, *freq, -1);
                    Real* dst = xi->grad.data() + r * width + h * head_dim;
                    for (std::size_t j = 0; j < head_dim; ++j) dst[j] += tmp[j];
                }
            }
        });
    out.value() = x.value();
    parallel_for(batch * seq, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            double pos = static_cast<double>(r % seq);
            for (std::size_t h = 0; h < n_heads; ++h)
                rope_apply(out.value().data() + r * width + h * head_dim, head_dim, pos, *freq);
        }
    });
    return out;
}

}  // namespace spellbee
