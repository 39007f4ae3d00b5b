#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "spellbee/common.hpp"

namespace spellbee {

// One training run on the compute-loss plane.
struct ScalingPoint {
    double flops = 0.0;      // 6pn
    double test_loss = 0.0;
    std::string variant = "baseline";
};

// Shifted power law L(C) = a * C^(-b) + c.
struct ScalingFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double residual_rms = 0.0;
    bool degenerate = false;  // constant losses: no decay to fit

    double operator()(double flops) const { return a * std::pow(flops, -b) + c; }
};

// Tuned learning rates per named model size (the published size-to-LR table).
inline double lr_for_size(const std::string& model_name) {
    static const std::map<std::string, double> table = {
        {"44m", 0.005},  {"74m", 0.004},  {"90m", 0.003},   {"106m", 0.003},
        {"117m", 0.003}, {"140m", 0.0025}, {"163m", 0.0025}, {"196m", 0.002},
        {"251m", 0.002}, {"306m", 0.0012}, {"425m", 0.0012}, {"489m", 0.0012},
        {"632m", 0.0007}, {"816m", 0.0007}};
    auto it = table.find(model_name);
    if (it == table.end()) {
        std::string known;
        for (const auto& [name, lr] : table) known += (known.empty() ? "" : ", ") + name;
        fail("lr_for_size: unknown model name '" + model_name + "' (known: " + known + ")");
    }
    return it->second;
}

namespace detail {

// For fixed b, (a, c) solve a 2x2 linear least-squares problem in raw loss
// space; c is clamped to 0 when the unconstrained solution goes negative.
struct InnerFit {
    double a = 0.0, c = 0.0, sse = 0.0;
};

inline InnerFit solve_a_c(const std::vector<ScalingPoint>& pts, double b) {
    double sxx = 0, sx = 0, sxy = 0, sy = 0;
    double n = static_cast<double>(pts.size());
    for (const auto& p : pts) {
        double x = std::pow(p.flops, -b);
        sxx += x * x;
        sx += x;
        sxy += x * p.test_loss;
        sy += p.test_loss;
    }
    double det = sxx * n - sx * sx;
    InnerFit fit;
    if (std::abs(det) < 1e-300) {
        fit.a = 0.0;
        fit.c = sy / n;
    } else {
        fit.a = (sxy * n - sx * sy) / det;
        fit.c = (sxx * sy - sx * sxy) / det;
        if (fit.c < 0.0) {  // clamp and re-solve a alone
            fit.c = 0.0;
            fit.a = sxx > 0 ? sxy / sxx : 0.0;
        }
        if (fit.a < 0.0) {  // loss increasing with compute: no valid decay
            fit.a = 0.0;
            fit.c = sy / n;
        }
    }
    fit.sse = 0.0;
    for (const auto& p : pts) {
        double r = fit.a * std::pow(p.flops, -b) + fit.c - p.test_loss;
        fit.sse += r * r;
    }
    return fit;
}

inline double log_space_sse(const std::vector<ScalingPoint>& pts, double a, double b, double c) {
    double sse = 0.0;
    for (const auto& p : pts) {
        double model = a * std::pow(p.flops, -b) + c;
        if (model <= 0.0) return 1e300;
        double r = std::log(model) - std::log(p.test_loss);
        sse += r * r;
    }
    return sse;
}

// Deterministic golden-section minimization over [lo, hi].
template <class F>
double golden_min(F&& f, double lo, double hi, int iters) {
    const double phi = 0.6180339887498949;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Least-squares fit of (a, b, c), deterministic: a coarse log-spaced grid
// over the decay exponent b (a and c solve in closed form per grid point)
// followed by golden-section refinement of b with a fixed iteration budget.
// With log_space=true the refined fit instead minimizes squared log-loss
// residuals around the raw-space solution.
inline ScalingFit fit_shifted_power_law(const std::vector<ScalingPoint>& points,
                                        bool log_space = false) {
    check(points.size() >= 4, "fit_shifted_power_law: need at least 4 points");
    for (const auto& p : points) {
        check(p.flops > 0.0, "fit_shifted_power_law: flops must be positive");
        check(std::isfinite(p.test_loss), "fit_shifted_power_law: loss must be finite");
    }
    {
        std::vector<double> fl;
        for (const auto& p : points) fl.push_back(p.flops);
        std::sort(fl.begin(), fl.end());
        for (std::size_t i = 1; i < fl.size(); ++i)
            check(fl[i] != fl[i - 1], "fit_shifted_power_law: flops values must be distinct");
    }

    double lo_loss = points[0].test_loss, hi_loss = points[0].test_loss;
    for (const auto& p : points) {
        lo_loss = std::min(lo_loss, p.test_loss);
        hi_loss = std::max(hi_loss, p.test_loss);
    }
    ScalingFit fit;
    if (hi_loss - lo_loss <= 1e-12 * std::max(1.0, std::abs(hi_loss))) {
        fit.degenerate = true;
        fit.a = 0.0;
        fit.b = 0.0;
        fit.c = 0.5 * (lo_loss + hi_loss);
        fit.residual_rms = 0.0;
        return fit;
    }

    // coarse grid over b in log space
    const int grid_n = 256;
    const double b_min = 1e-4, b_max = 4.0;
    double best_b = b_min;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_n; ++i) {
        double t = static_cast<double>(i) / (grid_n - 1);
        double b = b_min * std::pow(b_max / b_min, t);
        auto inner = detail::solve_a_c(points, b);
        if (inner.sse < best_sse) {
            best_sse = inner.sse;
            best_b = b;
        }
    }
    // local refinement between the grid neighbours
    double step = std::pow(b_max / b_min, 1.0 / (grid_n - 1));
    double lo = best_b / step, hi = best_b * step;
    double b_star = detail::golden_min(
        [&](double b) { return detail::solve_a_c(points, b).sse; }, lo, hi, 200);
    auto inner = detail::solve_a_c(points, b_star);
    fit.a = inner.a;
    fit.b = b_star;
    fit.c = inner.c;

    if (log_space) {
        // coordinate refinement of the log-loss objective, seeded from the
        // raw-space solution; fixed budget, deterministic
        double a = std::max(fit.a, 1e-12), b = fit.b, c = std::max(fit.c, 0.0);
        for (int round = 0; round < 30; ++round) {
            a = std::exp(detail::golden_min(
                [&](double la) { return detail::log_space_sse(points, std::exp(la), b, c); },
                std::log(a) - 2.0, std::log(a) + 2.0, 80));
            b = detail::golden_min(
                [&](double bb) { return detail::log_space_sse(points, a, bb, c); },
                std::max(1e-6, b * 0.25), b * 4.0, 80);
            double c_hi = std::max(1e-12, 0.999999 * lo_loss);
            c = detail::golden_min(
                [&](double cc) { return detail::log_space_sse(points, a, b, cc); }, 0.0, c_hi,
                80);
        }
        fit.a = a;
        fit.b = b;
        fit.c = c;
    }

    double sse = 0.0;
    for (const auto& p : points) {
        double r = fit(p.flops) - p.test_loss;
        sse += r * r;
    }
    fit.residual_rms = std::sqrt(sse / static_cast<double>(points.size()));
    fit.degenerate = fit.a <= 0.0 || fit.b <= 0.0;
    return fit;
}

// Relative FLOPs savings of a variant run against the baseline fit: solve
// L_base(C') = variant_loss, return 1 - variant_flops / C'.
inline double compute_advantage(const ScalingFit& baseline_fit, double variant_loss,
                                double variant_flops) {
    check(!baseline_fit.degenerate, "compute_advantage: baseline fit is degenerate");
    check(baseline_fit.a > 0 && baseline_fit.b > 0, "compute_advantage: invalid baseline fit");
    check(variant_flops > 0, "compute_advantage: variant flops must be positive");
    check(variant_loss > baseline_fit.c,
          "compute_advantage: variant loss " + std::to_string(variant_loss) +
              " is at or below the fit asymptote c=" + std::to_string(baseline_fit.c) +
              " and is unreachable by the baseline");
    double c_prime =
        std::pow(baseline_fit.a / (variant_loss - baseline_fit.c), 1.0 / baseline_fit.b);
    return 1.0 - variant_flops / c_prime;
}

// ---------------------------------------------------------------------------
// CSV interfaces: points in, fit report + plot-ready sampled curve out.
// ---------------------------------------------------------------------------

inline std::vector<ScalingPoint> load_scaling_points(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "cannot open points file: " + path);
    std::vector<ScalingPoint> points;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (lineno == 1 && t.rfind("flops", 0) == 0) continue;  // header
        std::istringstream ss(t);
        ScalingPoint p;
        std::string field;
        check(static_cast<bool>(std::getline(ss, field, ',')),
              path + ":" + std::to_string(lineno) + ": missing flops");
        try {
            p.flops = std::stod(field);
        } catch (...) {
            fail(path + ":" + std::to_string(lineno) + ": bad flops value '" + field + "'");
        }
        check(static_cast<bool>(std::getline(ss, field, ',')),
              path + ":" + std::to_string(lineno) + ": missing test_loss");
        try {
            p.test_loss = std::stod(field);
        } catch (...) {
            fail(path + ":" + std::to_string(lineno) + ": bad loss value '" + field + "'");
        }
        if (std::getline(ss, field, ',')) p.variant = trim(field);
        points.push_back(p);
    }
    return points;
}

inline std::string fit_report_csv(const std::map<std::string, ScalingFit>& fits) {
    std::ostringstream os;
    os.precision(10);
    os << "variant,a,b,c,residual_rms,degenerate\n";
    for (const auto& [variant, fit] : fits)
        os << variant << "," << fit.a << "," << fit.b << "," << fit.c << "," << fit.residual_rms
           << "," << (fit.degenerate ? 1 : 0) << "\n";
    return os.str();
}

inline std::string sampled_curve_csv(const std::map<std::string, ScalingFit>& fits,
                                     double flops_min, double flops_max, int samples = 64) {
    check(flops_min > 0 && flops_max > flops_min, "sampled_curve_csv: bad flops range");
    std::ostringstream os;
    os.precision(10);
    os << "variant,flops,fitted_loss\n";
    for (const auto& [variant, fit] : fits)
        for (int i = 0; i < samples; ++i) {
            double t = static_cast<double>(i) / (samples - 1);
            double f = flops_min * std::pow(flops_max / flops_min, t);
            os << variant << "," << f << "," << fit(f) << "\n";
        }
    return os.str();
}

}  // namespace spellbee
