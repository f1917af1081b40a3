// SPDX-License-Identifier: MIT
//
// Compiled-in experiment presets: model constants, grid, final time, initial
// state descriptor, the two reduced-model settings of each run and the
// reference values the pipeline gates against.

#pragma once

#include "podmpc/core.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace podmpc {

/// Named initial states: a sin(pi x) or a sgn(x - c).
struct InitialShape {
    enum class Kind { Sin, Sgn };
    Kind kind = Kind::Sin;
    double amplitude = 0.2;
    double center = 0.5;  // used by Sgn only

    [[nodiscard]] Vector evaluate(const SpatialGrid& grid) const {
        Vector y(grid.size());
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double x = grid.nodes(i);
            if (kind == Kind::Sin) {
                y(i) = amplitude * std::sin(kPi * x);
            } else {
                // nodes within rounding of the jump take sgn(0) = 0
                const double s = x - center;
                y(i) = std::abs(s) <= 1e-12 ? 0.0 : amplitude * (s > 0.0 ? 1.0 : -1.0);
            }
        }
        return y;
    }
};

inline std::string to_string(InitialShape::Kind k) {
    return k == InitialShape::Kind::Sin ? "sin" : "sgn";
}

/// Where a reference value comes from: a published table or an independent
/// computation.
enum class ReferenceSource { Published, Derived };

struct ReferenceValue {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    ReferenceSource source = ReferenceSource::Published;

    [[nodiscard]] bool contains(double x) const noexcept { return x >= lo && x <= hi; }

    static ReferenceValue relative(double v, double frac,
                                   ReferenceSource src = ReferenceSource::Published) {
        const double w = std::abs(v) * frac;
        return {v, v - w, v + w, src};
    }
    static ReferenceValue absolute(double v, double tol,
                                   ReferenceSource src = ReferenceSource::Published) {
        return {v, v - tol, v + tol, src};
    }
    static ReferenceValue range(double v, double lo, double hi,
                                ReferenceSource src = ReferenceSource::Published) {
        return {v, lo, hi, src};
    }
};

struct RomRanks {
    int pod = 0;
    int deim = 0;
};

/// Reference values of one run. Costs: closed loop under -K y, full NMPC and
/// POD-NMPC at the high and low ranks. Errors: L2(t;H) distance to the full
/// NMPC state for -K y and both POD variants.
struct RunReference {
    int horizon = 0;
    ReferenceValue gain;
    bool gain_bound_active = false;
    ReferenceValue cost_feedback, cost_nmpc, cost_pod_high, cost_pod_low;
    ReferenceValue err_feedback, err_pod_high, err_pod_low;
};

inline constexpr double kCostTolerance = 0.25;
inline constexpr double kErrorTolerance = 0.40;
inline constexpr double kPodVsNmpcCost = 0.10;

struct RunPreset {
    std::string name;
    ModelParams params;
    int n_interior = 99;
    double T = 0.5;
    InitialShape y0;
    RomRanks rom_high;
    RomRanks rom_low;
    RunReference reference;

    [[nodiscard]] SpatialGrid grid() const { return build_grid(n_interior); }
    [[nodiscard]] Vector initial_state() const { return y0.evaluate(grid()); }
};

namespace detail {

inline RunReference make_reference(int N, ReferenceValue K, bool bound, std::array<double, 4> costs,
                                   std::array<double, 3> errs) {
    RunReference r;
    r.horizon = N;
    r.gain = K;
    r.gain_bound_active = bound;
    r.cost_feedback = ReferenceValue::relative(costs[0], kCostTolerance);
    r.cost_nmpc = ReferenceValue::relative(costs[1], kCostTolerance);
    r.cost_pod_high = ReferenceValue::relative(costs[2], kCostTolerance);
    r.cost_pod_low = ReferenceValue::relative(costs[3], kCostTolerance);
    r.err_feedback = ReferenceValue::relative(errs[0], kErrorTolerance);
    r.err_pod_high = ReferenceValue::relative(errs[1], kErrorTolerance);
    r.err_pod_low = ReferenceValue::relative(errs[2], kErrorTolerance);
    return r;
}

inline ModelParams make_params(double theta, double rho, double u_a, double u_b) {
    ModelParams p;
    p.theta = theta;
    p.rho = rho;
    p.lambda = 0.01;
    p.dt = 0.01;
    p.u_a = u_a;
    p.u_b = u_b;
    return p;
}

}  // namespace detail

/// Run 1: unconstrained, theta = 1, rho = 11, 0.2 sin(pi x).
inline RunPreset preset_run1() {
    RunPreset p;
    p.name = "run1";
    p.params = detail::make_params(1.0, 11.0, -kInf, kInf);
    p.y0 = {InitialShape::Kind::Sin, 0.2, 0.5};
    p.rom_high = {13, 15};
    p.rom_low = {3, 2};
    p.reference = detail::make_reference(10, ReferenceValue::absolute(2.46, 0.05), false,
                                         {0.0025, 0.0015, 0.0016, 0.0016},
                                         {0.0145, 0.0047, 0.0058});
    return p;
}

/// Run 2: as Run 1 with u in [-0.3, 0].
inline RunPreset preset_run2() {
    RunPreset p;
    p.name = "run2";
    p.params = detail::make_params(1.0, 11.0, -0.3, 0.0);
    p.y0 = {InitialShape::Kind::Sin, 0.2, 0.5};
    p.rom_high = {13, 15};
    p.rom_low = {3, 2};
    p.reference = detail::make_reference(14, ReferenceValue::absolute(1.50, 0.01), true,
                                         {0.0035, 0.0027, 0.0032, 0.0033},
                                         {0.0089, 0.0054, 0.0055});
    return p;
}

/// Run 3: theta = 1/sqrt(2), rho = 10, u in [-1, 0].
inline RunPreset preset_run3() {
    RunPreset p;
    p.name = "run3";
    p.params = detail::make_params(1.0 / std::sqrt(2.0), 10.0, -1.0, 0.0);
    p.y0 = {InitialShape::Kind::Sin, 0.2, 0.5};
    p.rom_high = {16, 16};
    p.rom_low = {2, 3};
    p.reference = detail::make_reference(30, ReferenceValue::absolute(5.00, 0.01), true,
                                         {0.0021, 0.0016, 0.0017, 0.0018},
                                         {0.0208, 0.0092, 0.0093});
    return p;
}

/// Run 4: theta = 0.5, u in [-1, 1], 0.1 sgn(x - 0.3). The reaction
/// coefficient defaults to 10 and may be overridden.
inline RunPreset preset_run4(double rho = 10.0) {
    RunPreset p;
    p.name = "run4";
    p.params = detail::make_params(0.5, rho, -1.0, 1.0);
    p.y0 = {InitialShape::Kind::Sgn, 0.1, 0.3};
    p.rom_high = {17, 19};
    p.rom_low = {3, 4};
    p.reference = detail::make_reference(43, ReferenceValue::range(9.99, 9.90, 10.00), true,
                                         {4.7e-4, 4.1e-4, 4.4e-4, 4.4e-4},
                                         {0.0060, 0.0034, 0.0035});
    return p;
}

inline std::vector<std::string> preset_names() { return {"run1", "run2", "run3", "run4"}; }

inline std::optional<RunPreset> find_preset(std::string_view name) {
    if (name == "run1") return preset_run1();
    if (name == "run2") return preset_run2();
    if (name == "run3") return preset_run3();
    if (name == "run4") return preset_run4();
    return std::nullopt;
}

inline RunPreset preset(std::string_view name) {
    auto p = find_preset(name);
    if (!p) throw InvalidArgument("unknown preset '" + std::string(name) + "'");
    return *p;
}

}  // namespace podmpc
