#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "spellbee/common.hpp"
#include "spellbee/tensor.hpp"

namespace spellbee {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Compares reverse-mode gradients against central differences. Meant to run
// in 64-bit mode; the loss closure must rebuild the graph on every call so
// that perturbed parameter values are picked up.
//
// Tensors with more than sample_cap elements are probed at a seeded sample of
// indices instead of exhaustively.
inline GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn,
                                  std::vector<Tensor<double>> params,
                                  std::size_t sample_cap = 64, double h = 1e-5,
                                  std::uint64_t seed = 0x5eedbee5) {
    for (auto& p : params) p.zero_grad();
    Tensor<double> loss = loss_fn();
    loss.backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    GradCheckReport report;
    Rng rng(seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        std::size_t n = p.numel();
        std::vector<std::size_t> indices;
        if (n <= sample_cap) {
            indices.resize(n);
            for (std::size_t i = 0; i < n; ++i) indices[i] = i;
        } else {
            indices.reserve(sample_cap);
            for (std::size_t i = 0; i < sample_cap; ++i) indices.push_back(rng.uniform_index(n));
        }
        for (std::size_t idx : indices) {
            double orig = p.value()[idx];
            p.value()[idx] = orig + h;
            double up = loss_fn().item();
            p.value()[idx] = orig - h;
            double down = loss_fn().item();
            p.value()[idx] = orig;
            double numeric = (up - down) / (2.0 * h);
            double a = analytic[pi][idx];
            double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
            double rel = std::abs(a - numeric) / scale;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p.label().empty() ? ("param" + std::to_string(pi)) : p.label();
                report.worst_index = idx;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace spellbee
