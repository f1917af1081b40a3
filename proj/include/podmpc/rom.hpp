// SPDX-License-Identifier: MIT
//
// POD Galerkin reduced model. With y = Psi a, M = dx I and A the transport
// operator, the implicit Euler scheme in reduced coordinates reads
//
//     Mr (a_{k+1} - a_k)/dt + Ar a_{k+1} + n(a_{k+1}) = Psi^T M u_k,
//
// Mr = Psi^T M Psi, Ar = Psi^T M A Psi, and n(a) = Psi^T M f(Psi a) or its
// DEIM approximation W f(Ps a) with W = Psi^T M U (P^T U)^{-1}, Ps = P^T Psi.

#pragma once

#include "podmpc/core.hpp"
#include "podmpc/fd_model.hpp"
#include "podmpc/pod.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace podmpc {

namespace detail {

/// Gaussian elimination with partial pivoting, in place; `b` returns the
/// solution. Intended for the small dense systems of the reduced model.
template <class Mat, class Vec>
void solve_small_in_place(Mat& a, Vec& b) {
    const Eigen::Index n = a.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index p = k;
        double best = std::abs(a(k, k));
        for (Eigen::Index i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > best) {
                best = std::abs(a(i, k));
                p = i;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best)) {
            throw LinearAlgebraError("reduced system is singular");
        }
        if (p != k) {
            a.row(k).swap(a.row(p));
            std::swap(b(k), b(p));
        }
        const double inv = 1.0 / a(k, k);
        for (Eigen::Index i = k + 1; i < n; ++i) {
            const double f = a(i, k) * inv;
            if (f == 0.0) continue;
            for (Eigen::Index j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
            b(i) -= f * b(k);
        }
    }
    for (Eigen::Index k = n - 1; k >= 0; --k) {
        double acc = b(k);
        for (Eigen::Index j = k + 1; j < n; ++j) acc -= a(k, j) * b(j);
        b(k) = acc / a(k, k);
    }
}

}  // namespace detail

struct RomFeedbackRollout {
    Trajectory reduced;  // reduced coordinates, one row per time level
    Trajectory state;    // lifted
    Trajectory applied;  // control consumed by step k: -K Psi a_{k+1}
};

class ReducedModel {
public:
    using State = Vector;

    ReducedModel(const ModelParams& params, const SpatialGrid& grid, const PodBasis& basis, int ell,
                 std::optional<DeimData> deim = std::nullopt, NewtonOptions newton = {})
        : params_(params), grid_(grid), space_(basis.space), newton_(newton),
          reaction_{params.rho}, deim_(std::move(deim)) {
        params_.validate();
        if (basis.modes.rows() != grid_.size()) {
            throw InvalidArgument("ReducedModel: basis dimension does not match grid");
        }
        if (ell < 1) throw InvalidArgument("ReducedModel: rank must be at least 1");
        if (params_.has_target() && params_.y_d.size() != grid_.size()) {
            throw InvalidArgument("ReducedModel: y_d size does not match grid");
        }
        psi_ = basis.leading(ell);
        m_psi_ = grid_.dx * psi_;
        mass_ = psi_.transpose() * m_psi_;

        const Tridiagonal transport = transport_operator(params_, grid_);
        const Tridiagonal diffusion = diffusion_operator(params_, grid_);
        Matrix a_psi(psi_.rows(), ell);
        Matrix l_psi(psi_.rows(), ell);
        for (int j = 0; j < ell; ++j) {
            a_psi.col(j) = transport.apply(psi_.col(j));
            l_psi.col(j) = diffusion.apply(psi_.col(j));
        }
        transport_r_ = m_psi_.transpose() * a_psi;
        diffusion_r_ = m_psi_.transpose() * l_psi;
        advection_r_ = transport_r_ - diffusion_r_;
        check_operators();
        step_matrix_ = mass_ / params_.dt + transport_r_;
        adjoint_matrix_ = mass_ / params_.dt + transport_r_.transpose();

        // Restriction to coefficients: X-orthogonal projection.
        restrict_ = apply_inner_product(space_, grid_, psi_);
        const Matrix gram = psi_.transpose() * restrict_;
        restrict_ = restrict_ * Eigen::LDLT<Matrix>(gram).solve(Matrix::Identity(ell, ell));

        if (params_.has_target()) {
            target_r_ = m_psi_.transpose() * params_.y_d;
            target_sq_ = h_norm_sq(grid_, params_.y_d);
        } else {
            target_r_ = Vector::Zero(ell);
        }

        if (deim_) {
            if (deim_->modes.rows() != grid_.size()) {
                throw InvalidArgument("ReducedModel: DEIM modes do not match grid");
            }
            const Matrix u_coupling = m_psi_.transpose() * deim_->modes;
            // W = Psi^T M U (P^T U)^{-1}
            const Matrix wt = deim_->interpolation.transpose().solve(Matrix(u_coupling.transpose()));
            deim_weight_ = wt.transpose();
            sampled_psi_.resize(deim_->size(), ell);
            for (int j = 0; j < deim_->size(); ++j) sampled_psi_.row(j) = psi_.row(deim_->indices[j]);
        }
    }

    [[nodiscard]] const ModelParams& params() const noexcept { return params_; }
    [[nodiscard]] const SpatialGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] int rank() const noexcept { return static_cast<int>(psi_.cols()); }
    [[nodiscard]] bool uses_deim() const noexcept { return deim_.has_value(); }
    [[nodiscard]] const Matrix& modes() const noexcept { return psi_; }
    [[nodiscard]] const Matrix& mass() const noexcept { return mass_; }
    [[nodiscard]] const Matrix& transport() const noexcept { return transport_r_; }
    [[nodiscard]] const Matrix& diffusion() const noexcept { return diffusion_r_; }
    [[nodiscard]] const Matrix& advection() const noexcept { return advection_r_; }

    /// X-projection coefficients of a full grid function.
    [[nodiscard]] Vector restrict_state(const Vector& y) const {
        if (y.size() != grid_.size()) throw InvalidArgument("restrict_state: dimension mismatch");
        return restrict_.transpose() * y;
    }
    [[nodiscard]] Vector lift_state(const Vector& a) const { return psi_ * a; }

    /// Reduced nonlinearity n(a) and its Jacobian.
    [[nodiscard]] Vector nonlinear(const Vector& a) const {
        Vector out(rank());
        Matrix unused;
        eval_nonlinear(a, out, unused, false);
        return out;
    }
    [[nodiscard]] Matrix nonlinear_jacobian(const Vector& a) const {
        Vector unused(rank());
        Matrix jac(rank(), rank());
        eval_nonlinear(a, unused, jac, true);
        return jac;
    }

    /// Implicit Euler step in reduced coordinates with forcing `b` (already
    /// restricted) and a feedback gain folded in as K Mr a.
    [[nodiscard]] Vector implicit_step(const Vector& a_prev, const Vector* b, double gain,
                                       int step) const {
        if (small()) return step_kernel<kStackRank>(a_prev, b, gain, step);
        return step_kernel<Eigen::Dynamic>(a_prev, b, gain, step);
    }

    /// Reduced trajectory driven by a full-space control.
    [[nodiscard]] Trajectory forward(double t0, const Vector& a0, const Trajectory& u) const {
        check_reduced(a0);
        if (u.dim() != grid_.size()) throw InvalidArgument("forward: control dimension mismatch");
        const Eigen::Index steps = u.rows();
        const RowMatrix forcing = u.values * m_psi_;
        Trajectory a(t0, params_.dt, steps + 1, rank());
        a.values.row(0) = a0.transpose();
        Vector prev = a0;
        for (Eigen::Index k = 0; k < steps; ++k) {
            const Vector bk = forcing.row(k).transpose();
            prev = implicit_step(prev, &bk, 0.0, static_cast<int>(k + 1));
            a.values.row(k + 1) = prev.transpose();
        }
        return a;
    }

    [[nodiscard]] Trajectory forward_uncontrolled(double t0, int steps, const Vector& a0) const {
        check_reduced(a0);
        Trajectory a(t0, params_.dt, steps + 1, rank());
        a.values.row(0) = a0.transpose();
        Vector prev = a0;
        for (int k = 0; k < steps; ++k) {
            prev = implicit_step(prev, nullptr, 0.0, k + 1);
            a.values.row(k + 1) = prev.transpose();
        }
        return a;
    }

    /// Reduced closed loop under u = -K Psi a with the feedback folded into
    /// the implicit step.
    [[nodiscard]] RomFeedbackRollout feedback_rollout(double t0, int steps, const Vector& a0,
                                                      double gain) const {
        check_reduced(a0);
        if (gain < 0.0) throw InvalidArgument("feedback_rollout: gain must be nonnegative");
        RomFeedbackRollout out;
        out.reduced = Trajectory(t0, params_.dt, steps + 1, rank());
        out.reduced.values.row(0) = a0.transpose();
        Vector prev = a0;
        for (int k = 0; k < steps; ++k) {
            prev = implicit_step(prev, nullptr, gain, k + 1);
            out.reduced.values.row(k + 1) = prev.transpose();
        }
        out.state = lift(out.reduced);
        out.applied = Trajectory::control(t0, params_.dt, steps, grid_.size());
        out.applied.values = -gain * out.state.values.bottomRows(steps);
        return out;
    }

    /// Reduced adjoint, terminal value zero:
    ///   (Mr/dt + Ar^T + J(a_j)^T) q_j = Mr q_{j+1}/dt + Psi^T M (y_d - Psi a_j).
    [[nodiscard]] Trajectory adjoint(const Trajectory& a) const {
        if (a.dim() != rank()) throw InvalidArgument("adjoint: reduced dimension mismatch");
        if (small()) return adjoint_kernel<kStackRank>(a);
        return adjoint_kernel<Eigen::Dynamic>(a);
    }

    // Open-loop model interface (see openloop.hpp).

    [[nodiscard]] State initial_state(const Vector& y_full) const { return restrict_state(y_full); }

    [[nodiscard]] Trajectory lift(const Trajectory& a) const {
        Trajectory y;
        y.t0 = a.t0;
        y.dt = a.dt;
        y.piecewise_constant = a.piecewise_constant;
        y.values.noalias() = a.values * psi_.transpose();
        return y;
    }
    [[nodiscard]] Trajectory adjoint_lifted(const Trajectory& a) const { return lift(adjoint(a)); }

    /// dt * sum_{k<N} 0.5 ||Psi a_k - y_d||_H^2, evaluated in reduced form.
    [[nodiscard]] double tracking_cost(const Trajectory& a) const {
        double s = 0.0;
        for (Eigen::Index k = 0; k < a.intervals(); ++k) {
            const Vector ak = a.values.row(k).transpose();
            s += ak.dot(mass_ * ak) - 2.0 * ak.dot(target_r_) + target_sq_;
        }
        return 0.5 * params_.dt * s;
    }

private:
    // Reduced quantities up to this size live on the stack.
    static constexpr int kStackRank = 32;
    template <int Cap>
    using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, Cap, 1>;
    template <int Cap>
    using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, Cap, Cap>;

    [[nodiscard]] bool small() const noexcept {
        return rank() <= kStackRank && (!deim_ || deim_->size() <= kStackRank);
    }

    template <class Vec, class Mat>
    void eval_nonlinear(const Vec& a, Vec& out, Mat& jac, bool want_jacobian) const {
        const Eigen::Index l = rank();
        if (deim_) {
            // Explicit loops: these sizes are tiny and product dispatch dominates.
            const Eigen::Index m = deim_->size();
            out.setZero(l);
            if (want_jacobian) jac.setZero(l, l);
            for (Eigen::Index j = 0; j < m; ++j) {
                double s = 0.0;
                for (Eigen::Index c = 0; c < l; ++c) s += sampled_psi_(j, c) * a(c);
                const double f = reaction_.value(s);
                for (Eigen::Index r = 0; r < l; ++r) out(r) += deim_weight_(r, j) * f;
                if (want_jacobian) {
                    const double d = reaction_.slope(s);
                    for (Eigen::Index c = 0; c < l; ++c) {
                        const double w = d * sampled_psi_(j, c);
                        for (Eigen::Index r = 0; r < l; ++r) jac(r, c) += deim_weight_(r, j) * w;
                    }
                }
            }
            return;
        }
        const Vector y = psi_ * a;
        out.noalias() = m_psi_.transpose() * reaction_(y);
        if (want_jacobian) {
            const Vector d = reaction_.derivative(y);
            jac.noalias() = m_psi_.transpose() * (d.asDiagonal() * psi_);
        }
    }

    template <int Cap>
    Vector step_kernel(const Vector& a_prev, const Vector* b, double gain, int step) const {
        using Vec = SmallVector<Cap>;
        using Mat = SmallMatrix<Cap>;
        const Eigen::Index l = rank();
        Mat lin = step_matrix_;
        if (gain != 0.0) lin += gain * mass_;
        Vec rhs(l);
        rhs.noalias() = (1.0 / params_.dt) * mass_ * a_prev;
        if (b != nullptr) rhs += *b;
        Vec z = a_prev;
        Vec nl(l);
        Vec r(l);
        Mat jac(l, l);
        for (int it = 0; it <= newton_.max_iter; ++it) {
            eval_nonlinear(z, nl, jac, true);
            r.noalias() = lin * z;
            r += nl - rhs;
            const double res = r.template lpNorm<Eigen::Infinity>();
            if (!std::isfinite(res)) break;
            if (res <= newton_.tol) return Vector(z);
            if (it == newton_.max_iter) break;
            jac += lin;
            detail::solve_small_in_place(jac, r);
            z -= r;
        }
        throw DivergenceError("reduced Newton iteration did not converge", step);
    }

    template <int Cap>
    Trajectory adjoint_kernel(const Trajectory& a) const {
        using Vec = SmallVector<Cap>;
        using Mat = SmallMatrix<Cap>;
        const Eigen::Index l = rank();
        const Eigen::Index levels = a.rows();
        Trajectory q(a.t0, a.dt, levels, l);
        if (levels == 0) return q;
        const double inv_dt = 1.0 / params_.dt;
        Vec next = Vec::Zero(l);
        Vec aj(l);
        Vec unused(l);
        Vec rhs(l);
        Mat jac(l, l);
        Mat sys(l, l);
        for (Eigen::Index j = levels - 2; j >= 0; --j) {
            aj = a.values.row(j).transpose();
            eval_nonlinear(aj, unused, jac, true);
            sys = adjoint_matrix_;
            sys += jac.transpose();
            rhs.noalias() = inv_dt * mass_ * next;
            rhs += target_r_;
            rhs.noalias() -= mass_ * aj;
            detail::solve_small_in_place(sys, rhs);
            next = rhs;
            q.values.row(j) = next.transpose();
        }
        return q;
    }

    void check_reduced(const Vector& a0) const {
        if (a0.size() != rank()) throw InvalidArgument("reduced initial state dimension mismatch");
        if (!a0.allFinite()) throw InvalidArgument("reduced initial state is not finite");
    }

    void check_operators() const {
        const double scale = std::max(1.0, diffusion_r_.cwiseAbs().maxCoeff());
        if ((diffusion_r_ - diffusion_r_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw LinearAlgebraError("ReducedModel: reduced diffusion is not symmetric");
        }
        Eigen::LLT<Matrix> llt(0.5 * (diffusion_r_ + diffusion_r_.transpose()));
        if (llt.info() != Eigen::Success) {
            throw LinearAlgebraError("ReducedModel: reduced diffusion is not positive definite");
        }
        Eigen::LLT<Matrix> mass_llt(mass_);
        if (mass_llt.info() != Eigen::Success) {
            throw LinearAlgebraError("ReducedModel: reduced mass matrix is singular");
        }
    }

    ModelParams params_;
    SpatialGrid grid_;
    SpaceChoice space_;
    NewtonOptions newton_;
    CubicReaction reaction_;
    std::optional<DeimData> deim_;

    Matrix psi_;
    Matrix m_psi_;  // M Psi
    Matrix mass_;
    Matrix transport_r_;
    Matrix diffusion_r_;
    Matrix advection_r_;
    Matrix restrict_;  // y -> coefficients
    Vector target_r_;
    double target_sq_ = 0.0;
    Matrix deim_weight_;
    Matrix sampled_psi_;
    Matrix step_matrix_;     // Mr/dt + Ar
    Matrix adjoint_matrix_;  // Mr/dt + Ar^T
};

/// Full-order state driven open loop by the control a reduced closed loop
/// produced, alongside that reduced closed loop.
struct FeedbackComparison {
    RomFeedbackRollout rom;
    Trajectory full;
};

inline FeedbackComparison compare_feedback(const FullOrderModel& full, const ReducedModel& rom,
                                           double t0, int steps, const Vector& y0, double gain) {
    FeedbackComparison out;
    out.rom = rom.feedback_rollout(t0, steps, rom.initial_state(y0), gain);
    out.full = full.forward(t0, y0, out.rom.applied);
    return out;
}

// Free-function entry points.

inline ReducedModel build_rom(const PodBasis& basis, int ell, std::optional<DeimData> deim,
                              const ModelParams& params, const SpatialGrid& grid) {
    return ReducedModel(params, grid, basis, ell, std::move(deim));
}

inline Trajectory solve_rom_state(const ReducedModel& rom, double t0, int n_steps,
                                  const Vector& a0, const Trajectory& u) {
    if (u.rows() != n_steps) throw InvalidArgument("solve_rom_state: control window mismatch");
    return rom.forward(t0, a0, u);
}

inline Trajectory solve_rom_adjoint(const ReducedModel& rom, const Trajectory& a) {
    return rom.adjoint(a);
}

}  // namespace podmpc
