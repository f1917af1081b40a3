// SPDX-License-Identifier: MIT
//
// Receding-horizon drivers on the full model and on the POD reduced model,
// initial-condition noise, the -Ky reference closed loop and closed-loop
// metrics.

#pragma once

#include "podmpc/core.hpp"
#include "podmpc/fd_model.hpp"
#include "podmpc/openloop.hpp"
#include "podmpc/pod.hpp"
#include "podmpc/rom.hpp"
#include "podmpc/stability.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace podmpc {

struct RomSettings {
    int pod_rank = 0;     // 0: choose from tau_pod
    int deim_rank = 0;    // 0: exact nonlinearity
    double tau_pod = 0.0;
    SpaceChoice space = SpaceChoice::H;
    EnergyScale energy_scale = EnergyScale::Relative;
    SnapshotConfig snapshots;
};

struct MpcConfig {
    ModelParams params;
    SpatialGrid grid;
    Vector y0;
    double T = 0.5;
    int N = 2;
    std::optional<RomSettings> rom;
    double noise_level = 0.0;
    std::uint64_t rng_seed = 0;
    OpenLoopOptions solver;

    [[nodiscard]] int steps() const {
        const double m = T / params.dt;
        const long r = std::lround(m);
        if (r < 1 || std::abs(m - static_cast<double>(r)) > 1e-9 * std::max(1.0, m)) {
            throw InvalidArgument("MpcConfig: T must be a positive multiple of dt");
        }
        return static_cast<int>(r);
    }
    void validate() const {
        params.validate();
        if (N < 2) throw InvalidArgument("MpcConfig: horizon N must be at least 2");
        if (y0.size() != grid.size()) throw InvalidArgument("MpcConfig: y0 does not match grid");
        if (!(noise_level >= 0.0 && noise_level < 1.0)) {
            throw InvalidArgument("MpcConfig: noise level must lie in [0, 1)");
        }
        (void)steps();
    }
};

struct RomOffline {
    PodBasis basis;
    int pod_rank = 0;
    int deim_rank = 0;
    double wall_time = 0.0;
};

struct MpcResult {
    Trajectory state;       // plant, M + 1 levels
    Trajectory control;     // applied, M intervals
    double closed_loop_cost = 0.0;
    std::optional<double> err_vs_reference;
    Trajectory prediction;  // lifted reduced prediction of levels 1..M
    std::vector<double> err_term_history;
    double wall_time_total = 0.0;
    std::vector<double> wall_time_per_step;
    int solver_iterations = 0;
    bool all_converged = true;
    std::optional<RomOffline> offline;
};

/// y_i (1 + delta_i), delta_i ~ U[-level, level].
inline Vector perturb_initial(const Vector& y, double noise_level, std::mt19937_64& rng) {
    if (!(noise_level >= 0.0 && noise_level < 1.0)) {
        throw InvalidArgument("perturb_initial: noise level must lie in [0, 1)");
    }
    if (noise_level == 0.0) return y;
    std::uniform_real_distribution<double> dist(-noise_level, noise_level);
    Vector out = y;
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) *= 1.0 + dist(rng);
    return out;
}

namespace detail {

template <OpenLoopModel M>
MpcResult receding_horizon(const MpcConfig& cfg, const M& model, const FullOrderModel& plant,
                           bool record_prediction) {
    const int steps = cfg.steps();
    const SpatialGrid& grid = cfg.grid;
    const double dt = cfg.params.dt;
    std::mt19937_64 rng(cfg.rng_seed);

    MpcResult res;
    res.state = Trajectory(0.0, dt, steps + 1, grid.size());
    res.control = Trajectory::control(0.0, dt, steps, grid.size());
    if (record_prediction) res.prediction = Trajectory(dt, dt, steps, grid.size());
    res.state.values.row(0) = cfg.y0.transpose();

    Vector y = cfg.y0;
    Trajectory warm = Trajectory::control(0.0, dt, cfg.N, grid.size());
    for (int n = 0; n < steps; ++n) {
        const double t_n = n * dt;
        const Vector measured = perturb_initial(y, cfg.noise_level, rng);
        OpenLoopSolution sol;
        const auto t_start = std::chrono::steady_clock::now();
        try {
            const OpenLoopProblem<M> problem(model, t_n, cfg.N, measured);
            warm.t0 = t_n;
            sol = solve_open_loop(problem, warm, cfg.solver);
        } catch (const DivergenceError& e) {
            throw DivergenceError("MPC step " + std::to_string(n) + ": " + e.what(), n);
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        res.wall_time_per_step.push_back(elapsed);
        res.wall_time_total += elapsed;
        res.solver_iterations += sol.iterations;
        res.all_converged = res.all_converged && sol.converged;

        const Vector u0 = sol.u_opt.values.row(0).transpose();
        res.control.values.row(n) = u0.transpose();
        try {
            y = plant.implicit_step(y, &u0, 0.0, n + 1);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string("plant advance: ") + e.what(), n);
        }
        res.state.values.row(n + 1) = y.transpose();
        if (record_prediction) {
            const Vector predicted = sol.y_opt.values.row(1).transpose();
            res.prediction.values.row(n) = predicted.transpose();
            res.err_term_history.push_back(relative_gap(grid, y, predicted));
        }
        warm = shift_warm_start(sol.u_opt);
    }
    res.closed_loop_cost = trajectory_cost(cfg.params, grid, res.state, res.control);
    return res;
}

}  // namespace detail

/// Receding-horizon control with the full model as predictor.
inline MpcResult run_nmpc(const MpcConfig& cfg) {
    cfg.validate();
    if (cfg.rom) throw InvalidArgument("run_nmpc: config carries reduced-model settings");
    const FullOrderModel plant(cfg.params, cfg.grid);
    return detail::receding_horizon(cfg, plant, plant, false);
}

/// Offline stage: snapshots of the uncontrolled system, POD basis, rank
/// choice and DEIM. Requested ranks above the available rank are clamped.
inline std::pair<ReducedModel, RomOffline> build_offline_rom(const MpcConfig& cfg) {
    const RomSettings& rs = *cfg.rom;
    const auto t_start = std::chrono::steady_clock::now();
    const SnapshotSet snaps =
        collect_snapshots(cfg.params, cfg.grid, 0.0, cfg.T, cfg.y0, rs.snapshots);
    RomOffline off;
    off.basis = compute_pod_basis(snaps, rs.space, cfg.grid);
    if (rs.pod_rank > 0) {
        off.pod_rank = std::min(rs.pod_rank, off.basis.rank());
    } else {
        off.pod_rank = std::max(1, choose_rank(off.basis, rs.tau_pod, rs.energy_scale));
    }
    std::optional<DeimData> deim;
    if (rs.deim_rank > 0) {
        const Matrix f = nonlinear_snapshots(snaps, cfg.params.rho);
        off.deim_rank = std::min(rs.deim_rank, numerical_rank(f));
        deim = build_deim(f, off.deim_rank);
    }
    ReducedModel rom(cfg.params, cfg.grid, off.basis, off.pod_rank, std::move(deim));
    off.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(rom), std::move(off)};
}

/// Receding-horizon control with the POD model as predictor and the full
/// model as plant.
inline MpcResult run_pod_nmpc(const MpcConfig& cfg) {
    cfg.validate();
    if (!cfg.rom) throw InvalidArgument("run_pod_nmpc: reduced-model settings missing");
    auto [rom, offline] = build_offline_rom(cfg);
    const FullOrderModel plant(cfg.params, cfg.grid);
    MpcResult res = detail::receding_horizon(cfg, rom, plant, true);
    res.offline = std::move(offline);
    return res;
}

/// Closed loop under u = -K y on the full model over [0, T].
inline MpcResult run_feedback(const MpcConfig& cfg, double gain) {
    cfg.validate();
    const FullOrderModel plant(cfg.params, cfg.grid);
    const FeedbackRollout roll = plant.feedback_rollout(0.0, cfg.steps(), cfg.y0, gain);
    MpcResult res;
    res.state = roll.state;
    res.control = roll.control;
    res.closed_loop_cost = trajectory_cost(cfg.params, cfg.grid, res.state, res.control);
    return res;
}

struct MetricRecord {
    double cost = 0.0;
    std::optional<double> err_l2;
    std::optional<double> err_sup;
    double wall_time = 0.0;
    std::optional<double> speedup;
};

inline MetricRecord evaluate_metrics(const MpcConfig& cfg, const MpcResult& result,
                                     const MpcResult* reference = nullptr) {
    MetricRecord m;
    m.cost = trajectory_cost(cfg.params, cfg.grid, result.state, result.control);
    m.wall_time = result.wall_time_total;
    if (reference != nullptr) {
        m.err_l2 = l2_time_h_distance(cfg.grid, result.state, reference->state);
        if (result.wall_time_total > 0.0 && reference->wall_time_total > 0.0) {
            m.speedup = reference->wall_time_total / result.wall_time_total;
        }
    }
    if (!result.err_term_history.empty()) {
        double s = 0.0;
        for (double e : result.err_term_history) {
            if (std::isfinite(e)) s = std::max(s, e);
        }
        m.err_sup = s;
    }
    return m;
}

}  // namespace podmpc
