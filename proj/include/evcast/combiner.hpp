#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "evcast/errors.hpp"

namespace evcast {

/// Convex combination of the temporal and spatial predictions,
/// (y_tp + lambda * e_sp) / (1 + lambda). lambda = 0 is pure temporal;
/// lambda -> inf approaches pure spatial.
inline double combine(double y_tp, double e_sp, double lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("combine: lambda must be >= 0");
    return (y_tp + lambda * e_sp) / (1.0 + lambda);
}

inline std::vector<double> combine(std::span<const double> y_tp, std::span<const double> e_sp,
                                   double lambda) {
    if (y_tp.size() != e_sp.size()) throw DataError("combine: series lengths differ");
    std::vector<double> out(y_tp.size());
    for (std::size_t i = 0; i < y_tp.size(); ++i) out[i] = combine(y_tp[i], e_sp[i], lambda);
    return out;
}

/// Mean squared error normalized by the truth's mean square:
/// sum (pred - truth)^2 / sum truth^2.
inline double nmse(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw DataError("nmse: series lengths differ");
    if (pred.empty()) throw DataError("nmse: empty series");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - truth[i];
        num += e * e;
        den += truth[i] * truth[i];
    }
    if (den <= 0.0) throw DataError("nmse: ground truth is identically zero");
    return num / den;
}

/// Aligned truth / spatial / temporal series for one region.
struct RegionTriples {
    int region = 0;
    std::vector<double> truth; // E
    std::vector<double> sp;    // spatial prediction
    std::vector<double> tp;    // temporal prediction
};

struct LambdaResult {
    double lambda_star = 0.0;
    double w_star = 0.0;      // lambda / (1 + lambda)
    double objective = 0.0;   // summed per-region NMSE at the optimum
};

namespace detail {

// Summed NMSE of (1-w)*tp + w*sp, evaluated directly from the series.
inline double combined_objective(std::span<const RegionTriples> regions, double w) {
    double total = 0.0;
    for (const auto& reg : regions) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < reg.truth.size(); ++i) {
            const double pred = (1.0 - w) * reg.tp[i] + w * reg.sp[i];
            const double e = pred - reg.truth[i];
            num += e * e;
            den += reg.truth[i] * reg.truth[i];
        }
        total += num / den;
    }
    return total;
}

} // namespace detail

/// Finds the single coefficient lambda* whose combined prediction minimizes
/// the summed per-region NMSE. Substituting w = lambda/(1+lambda) makes the
/// objective an exact quadratic a*w^2 + b*w + c, which is minimized in closed
/// form, clamped to [0, 1 - 1e-9], and cross-checked against a 1001-point
/// direct evaluation grid. Ties resolve toward the smallest w. Regions whose
/// truth is identically zero carry no NMSE and are skipped; at least one
/// region must remain.
inline LambdaResult optimize_lambda(std::span<const RegionTriples> regions) {
    constexpr double w_cap = 1.0 - 1e-9;
    std::vector<RegionTriples> usable;
    for (const auto& reg : regions) {
        const std::size_t n = reg.truth.size();
        if (n == 0 || reg.sp.size() != n || reg.tp.size() != n)
            throw DataError("optimize_lambda: region " + std::to_string(reg.region) +
                            " has mismatched or empty series");
        double den = 0.0;
        for (double t : reg.truth) den += t * t;
        if (den > 0.0) usable.push_back(reg);
    }
    if (usable.empty()) throw DataError("optimize_lambda: every region has zero ground truth");

    // error = (tp - truth) + w * (sp - tp), so the objective is quadratic in w
    double a = 0.0, b = 0.0;
    for (const auto& reg : usable) {
        double den = 0.0, dd = 0.0, rd = 0.0;
        for (std::size_t i = 0; i < reg.truth.size(); ++i) {
            const double r = reg.tp[i] - reg.truth[i];
            const double d = reg.sp[i] - reg.tp[i];
            den += reg.truth[i] * reg.truth[i];
            dd += d * d;
            rd += r * d;
        }
        a += dd / den;
        b += 2.0 * rd / den;
    }
    double w = 0.0;
    if (a > 0.0) {
        w = std::clamp(-b / (2.0 * a), 0.0, w_cap);
    } else {
        w = b < 0.0 ? w_cap : 0.0; // linear objective: pick the better endpoint
    }

    double best_w = w;
    double best_f = detail::combined_objective(usable, w);
    double grid_best = best_f;
    for (int i = 0; i <= 1000; ++i) {
        const double wi = w_cap * static_cast<double>(i) / 1000.0;
        const double fi = detail::combined_objective(usable, wi);
        grid_best = std::min(grid_best, fi);
        if (fi < best_f || (fi == best_f && wi < best_w)) {
            best_f = fi;
            best_w = wi;
        }
    }
    // The closed form minimizes the same quadratic the grid samples, so it can
    // trail the best grid point only by floating-point noise.
    if (detail::combined_objective(usable, w) >
        grid_best + 1e-9 * std::max(1.0, std::abs(grid_best)))
        throw NumericError("optimize_lambda: closed-form minimum disagrees with grid search");

    LambdaResult res;
    res.w_star = best_w;
    res.lambda_star = best_w / (1.0 - best_w);
    res.objective = best_f;
    return res;
}

} // namespace evcast
