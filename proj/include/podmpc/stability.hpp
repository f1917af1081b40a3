// SPDX-License-Identifier: MIT
//
// Exponential-controllability constants for the feedback u = -K y, the
// relaxed dynamic programming suboptimality degree alpha^N(K), its
// reduced-order variant, admissible gain intervals, gain optimization and
// the minimal stabilizing horizon.

#pragma once

#include "podmpc/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace podmpc {

struct StabilityOptions {
    double eps = 1e-3;           // gamma(K) >= eps
    int grid_points = 1000;      // dense scan before refinement
    double k_tol = 1e-3;         // golden-section bracket width
    double safety = 0.999;       // shrink factor applied to finite gain bounds
    double unbounded_cap = 100.0;  // scan limit when no gain bound exists
    int n_max = 200;
};

struct StabilityConstants {
    double K = 0.0;
    double gamma = 0.0;
    double C = 1.0;
    double sigma_step = 0.0;
    double dt = 0.0;
};

/// gamma(K) = K + theta pi^2 - rho.
inline double decay_rate(const ModelParams& params, double K) {
    return K + params.theta * kPi * kPi - params.rho;
}

inline StabilityConstants controllability_constants(const ModelParams& params, double K,
                                                    double eps = 1e-3) {
    if (!(K >= 0.0)) throw InvalidArgument("controllability_constants: K must be nonnegative");
    const double gamma = decay_rate(params, K);
    if (gamma < eps) {
        throw InfeasibleError("controllability_constants: gamma(K) = " + std::to_string(gamma) +
                              " is below eps = " + std::to_string(eps));
    }
    StabilityConstants c;
    c.K = K;
    c.gamma = gamma;
    c.C = 1.0 + params.lambda * K * K;
    c.sigma_step = std::exp(-2.0 * gamma * params.dt);
    c.dt = params.dt;
    return c;
}

/// alpha^N from the overshoot C and per-step decay sigma, with
/// eta_i = C (1 - sigma^i) / (1 - sigma). The product ratio
/// prod (eta_i - 1) / prod eta_i is accumulated as a sum of logarithms.
inline double alpha_from(double C, double sigma, int N) {
    if (N < 2) throw InvalidArgument("alpha_horizon: N must be at least 2");
    if (!(C >= 1.0) || !(sigma > 0.0) || !(sigma < 1.0)) {
        throw InvalidArgument("alpha_horizon: need C >= 1 and 0 < sigma < 1");
    }
    const auto eta = [&](int i) { return C * (-std::expm1(i * std::log(sigma))) / (1.0 - sigma); };
    double log_ratio = 0.0;
    for (int i = 2; i <= N; ++i) log_ratio += std::log1p(-1.0 / eta(i));
    const double ratio = std::exp(log_ratio);
    const double denom = -std::expm1(log_ratio);  // 1 - ratio
    if (!(denom > 0.0)) {
        throw LinearAlgebraError("alpha_horizon: formula breakdown (nonpositive denominator)");
    }
    return 1.0 - (eta(N) - 1.0) * ratio / denom;
}

inline double alpha_horizon(const StabilityConstants& c, int N) {
    return alpha_from(c.C, c.sigma_step, N);
}

/// C^l = C + 2 err + err^2.
inline double rom_overshoot(double C, double err_sup) { return C + 2.0 * err_sup + err_sup * err_sup; }

inline double alpha_horizon_rom(const StabilityConstants& c, int N, double err_sup) {
    if (!(err_sup >= 0.0)) throw InvalidArgument("alpha_horizon_rom: err_sup must be nonnegative");
    return alpha_from(rom_overshoot(c.C, err_sup), c.sigma_step, N);
}

// ---------------------------------------------------------------------------
// Gain bounds
// ---------------------------------------------------------------------------

enum class GainRegime {
    Unconstrained,   // no finite bound applies
    UpperFromLower,  // K <= |u_a| / y_b        (min y0 >= 0, max y0 > 0)
    UpperFromUpper,  // K <= u_b / |y_b|        (max y0 < 0)
    UpperFromBoth,   // K <= min(|u_a|/y_b, u_b/|y_a|)
};

struct FeedbackBounds {
    double y_min = 0.0;
    double y_max = 0.0;
    double upper = kInf;  // before the safety factor
    GainRegime regime = GainRegime::Unconstrained;

    [[nodiscard]] bool bounded() const noexcept { return std::isfinite(upper); }
};

/// Case split on the sign pattern of y0 for u_a <= -K y <= u_b.
inline FeedbackBounds feedback_bounds(const Vector& y0, const ModelParams& params) {
    FeedbackBounds b;
    if (params.unconstrained()) return b;
    if (y0.size() == 0 || !y0.allFinite()) {
        throw InvalidArgument("feedback_bounds: initial state must be finite and nonempty");
    }
    b.y_min = y0.minCoeff();
    b.y_max = y0.maxCoeff();
    const double ya = b.y_min;
    const double yb = b.y_max;
    const double abs_ua = std::abs(params.u_a);
    if (yb == 0.0) {
        if (ya < 0.0) return b;
        throw InvalidArgument("feedback_bounds: y0 = 0 is not considered (no gain to certify)");
    }
    if (yb < 0.0) {
        if (ya >= 0.0) throw InvalidArgument("feedback_bounds: impossible sign pattern");
        b.upper = params.u_b / std::abs(yb);
        b.regime = GainRegime::UpperFromUpper;
    } else if (ya < 0.0) {
        b.upper = std::min(abs_ua / yb, params.u_b / std::abs(ya));
        b.regime = GainRegime::UpperFromBoth;
    } else {
        b.upper = abs_ua / yb;
        b.regime = GainRegime::UpperFromLower;
    }
    if (!std::isfinite(b.upper)) b.regime = GainRegime::Unconstrained;
    return b;
}

struct GainInterval {
    double low = 0.0;
    double high = 0.0;
    bool bound_applies = false;  // high comes from the control bounds
};

inline GainInterval gain_interval(const ModelParams& params, const Vector& y0,
                                  const StabilityOptions& opt = {}) {
    GainInterval iv;
    iv.low = std::max(0.0, params.rho - params.theta * kPi * kPi + opt.eps);
    const FeedbackBounds b = feedback_bounds(y0, params);
    if (b.bounded()) {
        iv.high = b.upper * opt.safety;
        iv.bound_applies = true;
    } else {
        iv.high = std::max(opt.unbounded_cap, iv.low);
    }
    if (iv.high < iv.low) {
        throw InfeasibleError("gain interval is empty: need K >= " + std::to_string(iv.low) +
                              " for decay but control bounds allow K <= " +
                              std::to_string(iv.high));
    }
    return iv;
}

struct GainOptimum {
    double K_star = 0.0;
    double alpha = 0.0;
    bool bound_active = false;
};

namespace detail {

inline double safe_alpha(const ModelParams& params, double K, int N, std::optional<double> err,
                         double eps) {
    try {
        const StabilityConstants c = controllability_constants(params, K, eps);
        const double a = err ? alpha_horizon_rom(c, N, *err) : alpha_horizon(c, N);
        return std::isfinite(a) ? a : -kInf;
    } catch (const Error&) {
        return -kInf;
    }
}

}  // namespace detail

/// Maximize alpha^N(K) (or alpha^{N,l}(K) when rom_err is set) over the
/// admissible gain interval: dense scan, then golden-section refinement in
/// the bracket around the best grid point. Ties go to the smaller gain.
inline GainOptimum optimize_feedback_gain(const ModelParams& params, const Vector& y0, int N,
                                          std::optional<double> rom_err = std::nullopt,
                                          const StabilityOptions& opt = {}) {
    const GainInterval iv = gain_interval(params, y0, opt);
    const auto f = [&](double K) { return detail::safe_alpha(params, K, N, rom_err, opt.eps); };

    const int m = std::max(2, opt.grid_points);
    const double h = (iv.high - iv.low) / static_cast<double>(m - 1);
    int best = 0;
    double best_val = f(iv.low);
    for (int i = 1; i < m; ++i) {
        const double v = f(iv.low + h * i);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }

    double a = iv.low + h * std::max(0, best - 1);
    double b = iv.low + h * std::min(m - 1, best + 1);
    GainOptimum out{iv.low + h * best, best_val, false};
    if (std::isfinite(best_val) && b - a > opt.k_tol) {
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = b - inv_phi * (b - a);
        double x2 = a + inv_phi * (b - a);
        double f1 = f(x1);
        double f2 = f(x2);
        while (b - a > opt.k_tol) {
            if (f1 >= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = f(x2);
            }
        }
        for (double K : {a, 0.5 * (a + b), b}) {
            const double v = f(K);
            if (v > out.alpha || (v == out.alpha && K < out.K_star)) out = {K, v, false};
        }
    }
    out.bound_active = iv.bound_applies && out.K_star >= iv.high - opt.k_tol;
    return out;
}

struct HorizonResult {
    int N_min = 0;
    double K_star = 0.0;
    double alpha = 0.0;
    double alpha_previous = -kInf;  // optimized alpha at N_min - 1 (-inf when N_min = 2)
    bool constraint_active = false;
    std::optional<double> rom_err_bound;
};

/// Smallest N in [2, n_max] whose optimized alpha is positive.
inline HorizonResult minimal_horizon(const ModelParams& params, const Vector& y0,
                                     std::optional<double> rom_err = std::nullopt,
                                     const StabilityOptions& opt = {}) {
    double previous = -kInf;
    for (int N = 2; N <= opt.n_max; ++N) {
        const GainOptimum g = optimize_feedback_gain(params, y0, N, rom_err, opt);
        if (g.alpha > 0.0) {
            HorizonResult r;
            r.N_min = N;
            r.K_star = g.K_star;
            r.alpha = g.alpha;
            r.alpha_previous = previous;
            r.constraint_active = g.bound_active;
            r.rom_err_bound = rom_err;
            return r;
        }
        previous = g.alpha;
    }
    throw HorizonNotFound("minimal_horizon: no stabilizing horizon up to N = " +
                          std::to_string(opt.n_max));
}

// ---------------------------------------------------------------------------
// Reduced-order error term
// ---------------------------------------------------------------------------

inline constexpr double kErrorFloor = 1e-12;

/// ||plant - predicted||_H / ||predicted||_H; NaN below the floor.
inline double relative_gap(const SpatialGrid& grid, const Vector& plant, const Vector& predicted) {
    const double den = h_norm(grid, predicted);
    if (!(den >= kErrorFloor)) return std::numeric_limits<double>::quiet_NaN();
    return h_norm(grid, plant - predicted) / den;
}

struct ErrorTerm {
    Vector ratio;                 // per time level; NaN where excluded
    std::vector<int> excluded;    // time levels with ||y^l||_H below the floor
    double sup = 0.0;
};

/// Err(t) = ||y(t) - y^l(t)||_H / ||y^l(t)||_H on every time level.
inline ErrorTerm rom_error_term(const SpatialGrid& grid, const Trajectory& full,
                                const Trajectory& rom) {
    if (full.rows() != rom.rows() || full.dim() != rom.dim()) {
        throw InvalidArgument("rom_error_term: trajectory windows do not match");
    }
    ErrorTerm e;
    e.ratio = Vector::Constant(full.rows(), std::numeric_limits<double>::quiet_NaN());
    bool any = false;
    for (Eigen::Index k = 0; k < full.rows(); ++k) {
        const double r = relative_gap(grid, full.values.row(k).transpose(),
                                      rom.values.row(k).transpose());
        if (std::isnan(r)) {
            e.excluded.push_back(static_cast<int>(k));
            continue;
        }
        e.ratio(k) = r;
        e.sup = std::max(e.sup, e.ratio(k));
        any = true;
    }
    if (!any) throw InvalidArgument("rom_error_term: reduced state vanishes on the whole window");
    return e;
}

}  // namespace podmpc
