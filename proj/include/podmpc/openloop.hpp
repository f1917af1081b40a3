// SPDX-License-Identifier: MIT
//
// Finite-horizon open-loop problem: cost, adjoint gradient, box projection
// and a projected-gradient solver. The solver is written against the
// OpenLoopModel concept so it runs unchanged on the full FD model and on the
// POD reduced model.

#pragma once

#include "podmpc/core.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <vector>

namespace podmpc {

template <class M>
concept OpenLoopModel = requires(const M& m, const Vector& y, const Trajectory& traj,
                                 const typename M::State& s, double t0) {
    { m.params() } -> std::convertible_to<const ModelParams&>;
    { m.grid() } -> std::convertible_to<const SpatialGrid&>;
    { m.initial_state(y) } -> std::same_as<typename M::State>;
    { m.forward(t0, s, traj) } -> std::same_as<Trajectory>;
    { m.tracking_cost(traj) } -> std::convertible_to<double>;
    { m.adjoint_lifted(traj) } -> std::same_as<Trajectory>;
    { m.lift(traj) } -> std::same_as<Trajectory>;
};

template <OpenLoopModel M>
struct OpenLoopProblem {
    const M* model = nullptr;
    double t0 = 0.0;
    int horizon_steps = 1;
    typename M::State y0;

    OpenLoopProblem(const M& m, double t0_, int n, const Vector& y0_full)
        : model(&m), t0(t0_), horizon_steps(n), y0(m.initial_state(y0_full)) {
        if (n < 1) throw InvalidArgument("OpenLoopProblem: horizon must be at least one step");
    }

    [[nodiscard]] const ModelParams& params() const { return model->params(); }
    [[nodiscard]] const SpatialGrid& grid() const { return model->grid(); }
    [[nodiscard]] Trajectory zero_control() const {
        return Trajectory::control(t0, params().dt, horizon_steps, grid().size());
    }
};

struct OpenLoopOptions {
    double tol_opt = 1e-6;
    int max_outer = 500;
    double armijo_c = 1e-4;
    int max_backtracks = 40;
    double initial_step = 0.0;  // 0 selects 1/lambda
};

struct OpenLoopSolution {
    Trajectory u_opt;
    Trajectory y_opt;         // lifted to the full grid
    Trajectory y_model;       // in model coordinates (reduced for the ROM)
    double cost = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> cost_history;
};

/// l(y, u) = 0.5 (||y - y_d||_H^2 + lambda ||u||_H^2).
inline double running_cost(const ModelParams& params, const SpatialGrid& grid, const Vector& y,
                           const Vector& u) {
    const double dy = params.has_target() ? h_norm_sq(grid, Vector(y - params.y_d))
                                          : h_norm_sq(grid, y);
    return 0.5 * (dy + params.lambda * h_norm_sq(grid, u));
}

/// Left-rectangle quadrature of the running cost pairing state level k with
/// control interval k. `y` carries one more row than `u`.
inline double trajectory_cost(const ModelParams& params, const SpatialGrid& grid,
                              const Trajectory& y, const Trajectory& u) {
    if (y.rows() != u.rows() + 1) throw InvalidArgument("trajectory_cost: window mismatch");
    double s = 0.0;
    for (Eigen::Index k = 0; k < u.rows(); ++k) {
        s += running_cost(params, grid, y.values.row(k).transpose(), u.values.row(k).transpose());
    }
    return params.dt * s;
}

inline double control_cost(const ModelParams& params, const SpatialGrid& grid, const Trajectory& u) {
    return 0.5 * params.lambda * l2_time_h_sq(grid, u);
}

template <OpenLoopModel M>
double horizon_cost(const OpenLoopProblem<M>& problem, const Trajectory& u) {
    const Trajectory y = problem.model->forward(problem.t0, problem.y0, u);
    return problem.model->tracking_cost(y) + control_cost(problem.params(), problem.grid(), u);
}

/// g_k = lambda u_k - p_{k+1}: control interval k pairs with the adjoint at
/// its right end, the level where the implicit step consumes u_k.
inline Trajectory reduced_gradient(const ModelParams& params, const Trajectory& u,
                                   const Trajectory& p) {
    if (p.rows() != u.rows() + 1 || p.dim() != u.dim()) {
        throw InvalidArgument("reduced_gradient: adjoint/control window mismatch");
    }
    Trajectory g = u;
    g.values = params.lambda * u.values - p.values.bottomRows(u.rows());
    return g;
}

inline Trajectory project_box(const ModelParams& params, const Trajectory& u) {
    Trajectory out = u;
    out.values = u.values.cwiseMax(params.u_a).cwiseMin(params.u_b);
    return out;
}

/// Previous optimum shifted by one interval, padded with its last row.
inline Trajectory shift_warm_start(const Trajectory& u) {
    Trajectory out = u;
    const Eigen::Index n = u.rows();
    out.t0 = u.t0 + u.dt;
    if (n > 1) out.values.topRows(n - 1) = u.values.bottomRows(n - 1);
    return out;
}

/// Projected gradient with Armijo backtracking on the reduced cost.
template <OpenLoopModel M>
OpenLoopSolution solve_open_loop(const OpenLoopProblem<M>& problem, const Trajectory& u_init,
                                 const OpenLoopOptions& opt = {}) {
    const M& model = *problem.model;
    const ModelParams& params = problem.params();
    const SpatialGrid& grid = problem.grid();
    if (u_init.rows() != problem.horizon_steps || u_init.dim() != grid.size()) {
        throw InvalidArgument("solve_open_loop: initial control has wrong shape");
    }
    const double step0 = opt.initial_step > 0.0 ? opt.initial_step : 1.0 / params.lambda;

    Trajectory u = project_box(params, u_init);
    u.t0 = problem.t0;
    Trajectory y = model.forward(problem.t0, problem.y0, u);
    double cost = model.tracking_cost(y) + control_cost(params, grid, u);

    OpenLoopSolution sol;
    sol.cost_history.push_back(cost);

    const double quad = params.dt * grid.dx;  // L2(t;H) weight of one entry
    Trajectory trial = u;
    Trajectory g;
    int it = 0;
    double residual = 0.0;
    for (;; ++it) {
        g = reduced_gradient(params, u, model.adjoint_lifted(y));

        residual = std::sqrt(
            quad * ((u.values - g.values).cwiseMax(params.u_a).cwiseMin(params.u_b) - u.values)
                       .squaredNorm());
        if (residual <= opt.tol_opt) {
            sol.converged = true;
            break;
        }
        if (it >= opt.max_outer) break;

        double step = step0;
        bool accepted = false;
        for (int bt = 0; bt < opt.max_backtracks; ++bt, step *= 0.5) {
            trial.values = (u.values - step * g.values).cwiseMax(params.u_a).cwiseMin(params.u_b);
            const double decrease = quad * g.values.cwiseProduct(trial.values - u.values).sum();
            Trajectory y_trial = model.forward(problem.t0, problem.y0, trial);
            const double c_trial = model.tracking_cost(y_trial) + control_cost(params, grid, trial);
            if (c_trial <= cost + opt.armijo_c * decrease) {
                std::swap(u, trial);
                y = std::move(y_trial);
                cost = c_trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        sol.cost_history.push_back(cost);
    }

    sol.u_opt = u;
    sol.y_model = y;
    sol.y_opt = model.lift(y);
    sol.cost = cost;
    sol.kkt_residual = residual;
    sol.iterations = it;
    return sol;
}

}  // namespace podmpc
