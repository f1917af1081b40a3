// SPDX-License-Identifier: MIT
//
// Full-order model: second-order central finite differences in space and
// implicit Euler in time for
//
//     y_t - theta y_xx + y_x + rho (y^3 - y) = u   on (0,1),  y(0) = y(1) = 0,
//
// plus the discrete adjoint that yields the exact gradient of the
// left-rectangle horizon cost.

#pragma once

#include "podmpc/core.hpp"
#include "podmpc/tridiagonal.hpp"

#include <cmath>
#include <optional>
#include <utility>

namespace podmpc {

struct NewtonOptions {
    double tol = 1e-10;  // residual infinity norm
    int max_iter = 25;
};

/// Cubic reaction f(y) = rho (y^3 - y) and its derivative, applied entrywise.
struct CubicReaction {
    double rho;

    [[nodiscard]] double value(double y) const noexcept { return rho * (y * y * y - y); }
    [[nodiscard]] double slope(double y) const noexcept { return rho * (3.0 * y * y - 1.0); }

    template <class Derived>
    [[nodiscard]] Vector operator()(const Eigen::MatrixBase<Derived>& y) const {
        return y.unaryExpr([this](double v) { return value(v); });
    }
    template <class Derived>
    [[nodiscard]] Vector derivative(const Eigen::MatrixBase<Derived>& y) const {
        return y.unaryExpr([this](double v) { return slope(v); });
    }
};

/// A = theta*L + B, with L the three-point negative Laplacian and B the central
/// first derivative, both with homogeneous Dirichlet closure.
inline Tridiagonal transport_operator(const ModelParams& p, const SpatialGrid& g) {
    const Eigen::Index n = g.size();
    const double h2 = g.dx * g.dx;
    Tridiagonal a(n);
    a.lower.setConstant(-p.theta / h2 - 0.5 / g.dx);
    a.diag.setConstant(2.0 * p.theta / h2);
    a.upper.setConstant(-p.theta / h2 + 0.5 / g.dx);
    a.lower(0) = 0.0;
    a.upper(n - 1) = 0.0;
    return a;
}

inline Tridiagonal diffusion_operator(const ModelParams& p, const SpatialGrid& g) {
    const Eigen::Index n = g.size();
    const double h2 = g.dx * g.dx;
    Tridiagonal a(n);
    a.lower.setConstant(-p.theta / h2);
    a.diag.setConstant(2.0 * p.theta / h2);
    a.upper.setConstant(-p.theta / h2);
    a.lower(0) = 0.0;
    a.upper(n - 1) = 0.0;
    return a;
}

inline Tridiagonal advection_operator(const SpatialGrid& g) {
    const Eigen::Index n = g.size();
    Tridiagonal a(n);
    a.lower.setConstant(-0.5 / g.dx);
    a.upper.setConstant(0.5 / g.dx);
    a.lower(0) = 0.0;
    a.upper(n - 1) = 0.0;
    return a;
}

struct FeedbackRollout {
    Trajectory state;
    Trajectory control;
    bool bound_violation = false;
};

class FullOrderModel {
public:
    using State = Vector;

    FullOrderModel(ModelParams params, SpatialGrid grid, NewtonOptions newton = {})
        : params_(std::move(params)), grid_(std::move(grid)), newton_(newton),
          reaction_{params_.rho} {
        params_.validate();
        if (params_.has_target() && params_.y_d.size() != grid_.size()) {
            throw InvalidArgument("FullOrderModel: y_d size does not match grid");
        }
        transport_ = transport_operator(params_, grid_);
        transport_t_ = transport_.transposed();
    }

    [[nodiscard]] const ModelParams& params() const noexcept { return params_; }
    [[nodiscard]] const SpatialGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return grid_.size(); }
    [[nodiscard]] const Tridiagonal& transport() const noexcept { return transport_; }

    /// One implicit Euler step
    ///   (y - y_prev)/dt + A y + K y + f(y) = u.
    /// `u` may be null (zero control). Throws DivergenceError tagged with `step`.
    [[nodiscard]] Vector implicit_step(const Vector& y_prev, const Vector* u, double gain,
                                       int step) const {
        const Eigen::Index n = dim();
        const double inv_dt = 1.0 / params_.dt;
        Vector z = y_prev;
        Tridiagonal jac = transport_;
        for (int it = 0; it <= newton_.max_iter; ++it) {
            Vector r = transport_.apply(z);
            for (Eigen::Index i = 0; i < n; ++i) {
                r(i) += inv_dt * (z(i) - y_prev(i)) + gain * z(i) + reaction_.value(z(i));
            }
            if (u != nullptr) r -= *u;
            const double res = r.lpNorm<Eigen::Infinity>();
            if (!std::isfinite(res)) break;
            if (res <= newton_.tol) return z;
            if (it == newton_.max_iter) break;
            for (Eigen::Index i = 0; i < n; ++i) {
                jac.diag(i) = transport_.diag(i) + inv_dt + gain + reaction_.slope(z(i));
            }
            z -= solve_tridiagonal(jac, r);
        }
        throw DivergenceError("Newton iteration did not converge", step);
    }

    /// State trajectory with u.rows() steps starting at y0.
    [[nodiscard]] Trajectory forward(double t0, const Vector& y0, const Trajectory& u) const {
        check_initial(y0);
        if (u.dim() != dim()) throw InvalidArgument("forward: control dimension mismatch");
        const Eigen::Index steps = u.rows();
        Trajectory y(t0, params_.dt, steps + 1, dim());
        y.values.row(0) = y0.transpose();
        Vector prev = y0;
        for (Eigen::Index k = 0; k < steps; ++k) {
            const Vector uk = u.values.row(k).transpose();
            prev = implicit_step(prev, &uk, 0.0, static_cast<int>(k + 1));
            y.values.row(k + 1) = prev.transpose();
        }
        return y;
    }

    [[nodiscard]] Trajectory forward_uncontrolled(double t0, int steps, const Vector& y0) const {
        check_initial(y0);
        Trajectory y(t0, params_.dt, steps + 1, dim());
        y.values.row(0) = y0.transpose();
        Vector prev = y0;
        for (int k = 0; k < steps; ++k) {
            prev = implicit_step(prev, nullptr, 0.0, k + 1);
            y.values.row(k + 1) = prev.transpose();
        }
        return y;
    }

    /// Discrete adjoint for the state trajectory `y` (rows 0..N):
    ///   p_N = 0,
    ///   (I/dt + A^T + f'(y_j)) p_j = p_{j+1}/dt + (y_d - y_j),  j = N-1..0.
    /// The reaction is linearized at y_j, the level being solved for.
    [[nodiscard]] Trajectory adjoint(const Trajectory& y) const {
        const Eigen::Index levels = y.rows();
        Trajectory p(y.t0, y.dt, levels, dim());
        if (levels == 0) return p;
        const double inv_dt = 1.0 / params_.dt;
        Tridiagonal sys = transport_t_;
        Vector next = Vector::Zero(dim());
        for (Eigen::Index j = levels - 2; j >= 0; --j) {
            const Vector yj = y.values.row(j).transpose();
            for (Eigen::Index i = 0; i < dim(); ++i) {
                sys.diag(i) = transport_t_.diag(i) + inv_dt + reaction_.slope(yj(i));
            }
            Vector rhs = inv_dt * next - yj;
            if (params_.has_target()) rhs += params_.y_d;
            next = solve_tridiagonal(sys, rhs);
            p.values.row(j) = next.transpose();
        }
        return p;
    }

    /// Closed-loop rollout of u = -K y with the feedback folded into the
    /// implicit step. Control row k records -K y_k.
    [[nodiscard]] FeedbackRollout feedback_rollout(double t0, int steps, const Vector& y0,
                                                   double gain) const {
        check_initial(y0);
        if (gain < 0.0) throw InvalidArgument("feedback_rollout: gain must be nonnegative");
        FeedbackRollout out;
        out.state = Trajectory(t0, params_.dt, steps + 1, dim());
        out.control = Trajectory::control(t0, params_.dt, steps, dim());
        out.state.values.row(0) = y0.transpose();
        Vector prev = y0;
        for (int k = 0; k < steps; ++k) {
            prev = implicit_step(prev, nullptr, gain, k + 1);
            out.state.values.row(k + 1) = prev.transpose();
        }
        for (int k = 0; k < steps; ++k) {
            out.control.values.row(k) = -gain * out.state.values.row(k);
        }
        out.bound_violation = (out.control.values.array() < params_.u_a).any() ||
                              (out.control.values.array() > params_.u_b).any();
        return out;
    }

    // Open-loop model interface (see openloop.hpp).

    [[nodiscard]] State initial_state(const Vector& y_full) const { return y_full; }
    [[nodiscard]] Trajectory lift(const Trajectory& y) const { return y; }
    [[nodiscard]] Trajectory adjoint_lifted(const Trajectory& y) const { return adjoint(y); }

    /// dt * sum_{k<N} 0.5 ||y_k - y_d||_H^2.
    [[nodiscard]] double tracking_cost(const Trajectory& y) const {
        double s = 0.0;
        for (Eigen::Index k = 0; k < y.intervals(); ++k) {
            if (params_.has_target()) {
                s += (y.values.row(k).transpose() - params_.y_d).squaredNorm();
            } else {
                s += y.values.row(k).squaredNorm();
            }
        }
        return 0.5 * params_.dt * grid_.dx * s;
    }

private:
    void check_initial(const Vector& y0) const {
        if (y0.size() != dim()) throw InvalidArgument("initial state dimension mismatch");
        if (!y0.allFinite()) throw InvalidArgument("initial state is not finite");
    }

    ModelParams params_;
    SpatialGrid grid_;
    NewtonOptions newton_;
    CubicReaction reaction_;
    Tridiagonal transport_;
    Tridiagonal transport_t_;
};

// Free-function entry points.

inline Trajectory solve_state(const ModelParams& params, const SpatialGrid& grid, double t0,
                              int n_steps, const Vector& y0) {
    return FullOrderModel(params, grid).forward_uncontrolled(t0, n_steps, y0);
}

inline Trajectory solve_state(const ModelParams& params, const SpatialGrid& grid, double t0,
                              int n_steps, const Vector& y0, const Trajectory& u) {
    if (u.rows() != n_steps) throw InvalidArgument("solve_state: control window mismatch");
    return FullOrderModel(params, grid).forward(t0, y0, u);
}

inline Trajectory solve_adjoint(const ModelParams& params, const SpatialGrid& grid,
                                const Trajectory& ybar) {
    return FullOrderModel(params, grid).adjoint(ybar);
}

inline FeedbackRollout feedback_rollout(const ModelParams& params, const SpatialGrid& grid,
                                        double t0, int n_steps, const Vector& y0, double gain) {
    return FullOrderModel(params, grid).feedback_rollout(t0, n_steps, y0, gain);
}

}  // namespace podmpc
