// SPDX-License-Identifier: MIT
//
// Core value types shared by every podmpc module: the spatial grid, the
// problem constants, space-time trajectories, discrete norms and the error
// hierarchy.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace podmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Newton iteration failed in an implicit time step.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int step)
        : Error(what + " (time step " + std::to_string(step) + ")"), step_(step) {}
    [[nodiscard]] int step() const noexcept { return step_; }

private:
    int step_;
};

class LinearAlgebraError : public Error {
public:
    using Error::Error;
};

/// No admissible feedback gain (empty K interval or gamma(K) < eps).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

class HorizonNotFound : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Grid and parameters
// ---------------------------------------------------------------------------

/// Equidistant interior nodes x_i = i*dx, i = 1..n, dx = 1/(n+1) on (0,1).
/// Dirichlet boundary values are zero and never stored.
struct SpatialGrid {
    int n_interior = 0;
    double dx = 0.0;
    Vector nodes;

    [[nodiscard]] int size() const noexcept { return n_interior; }
};

inline SpatialGrid build_grid(int n_interior) {
    if (n_interior < 2) {
        throw InvalidArgument("build_grid: need at least 2 interior nodes, got " +
                              std::to_string(n_interior));
    }
    SpatialGrid g;
    g.n_interior = n_interior;
    g.dx = 1.0 / static_cast<double>(n_interior + 1);
    g.nodes.resize(n_interior);
    for (int i = 0; i < n_interior; ++i) g.nodes[i] = static_cast<double>(i + 1) * g.dx;
    return g;
}

struct ModelParams {
    double theta = 1.0;   // diffusion
    double rho = 11.0;    // reaction
    double lambda = 0.01; // control weight
    double u_a = -kInf;
    double u_b = kInf;
    double dt = 0.01;
    Vector y_d;  // desired state; empty means zero

    void validate() const {
        if (!(theta > 0.0)) throw InvalidArgument("ModelParams: theta must be positive");
        if (!(rho > 0.0)) throw InvalidArgument("ModelParams: rho must be positive");
        if (!(lambda > 0.0)) throw InvalidArgument("ModelParams: lambda must be positive");
        if (!(dt > 0.0)) throw InvalidArgument("ModelParams: dt must be positive");
        if (std::isnan(u_a) || std::isnan(u_b) || !(u_a <= 0.0) || !(u_b >= 0.0)) {
            throw InvalidArgument("ModelParams: control bounds must satisfy u_a <= 0 <= u_b");
        }
    }

    [[nodiscard]] bool has_target() const noexcept { return y_d.size() > 0; }
    [[nodiscard]] bool unconstrained() const noexcept {
        return std::isinf(u_a) && std::isinf(u_b);
    }
};

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

/// Space-time grid function. Row k holds the values at t0 + k*dt.
///
/// State and adjoint trajectories are sampled at time levels (M+1 rows for M
/// steps). Control trajectories are piecewise constant: row k is the value on
/// the interval (t_k, t_{k+1}], so M steps give M rows.
struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    RowMatrix values;
    bool piecewise_constant = false;

    Trajectory() = default;
    Trajectory(double t0_, double dt_, Eigen::Index rows, Eigen::Index cols, bool pwc = false)
        : t0(t0_), dt(dt_), values(RowMatrix::Zero(rows, cols)), piecewise_constant(pwc) {}

    static Trajectory control(double t0, double dt, Eigen::Index steps, Eigen::Index n) {
        return Trajectory(t0, dt, steps, n, true);
    }

    [[nodiscard]] Eigen::Index rows() const noexcept { return values.rows(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return values.cols(); }
    [[nodiscard]] double time(Eigen::Index k) const noexcept {
        return t0 + static_cast<double>(k) * dt;
    }
    /// Number of rows that open a quadrature interval (left-rectangle rule).
    [[nodiscard]] Eigen::Index intervals() const noexcept {
        if (piecewise_constant) return values.rows();
        return values.rows() > 0 ? values.rows() - 1 : 0;
    }
    [[nodiscard]] bool all_finite() const { return values.allFinite(); }
};

// ---------------------------------------------------------------------------
// Discrete norms
// ---------------------------------------------------------------------------

template <class A, class B>
double h_inner(const SpatialGrid& g, const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    return g.dx * a.dot(b);
}

template <class Derived>
double h_norm_sq(const SpatialGrid& g, const Eigen::MatrixBase<Derived>& v) {
    return g.dx * v.squaredNorm();
}

template <class Derived>
double h_norm(const SpatialGrid& g, const Eigen::MatrixBase<Derived>& v) {
    return std::sqrt(h_norm_sq(g, v));
}

/// Squared H^1_0 seminorm with zero boundary values.
template <class Derived>
double v_norm_sq(const SpatialGrid& g, const Eigen::MatrixBase<Derived>& v) {
    const Eigen::Index n = v.size();
    if (n == 0) return 0.0;
    double s = v(0) * v(0) + v(n - 1) * v(n - 1);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double d = v(i + 1) - v(i);
        s += d * d;
    }
    return s / g.dx;
}

/// <a, b>_V = a^T S b with the stiffness matrix S = tridiag(-1, 2, -1) / dx.
inline Vector apply_stiffness(const SpatialGrid& g, const Vector& v) {
    const Eigen::Index n = v.size();
    Vector out(n);
    const double s = 1.0 / g.dx;
    for (Eigen::Index i = 0; i < n; ++i) {
        double acc = 2.0 * v(i);
        if (i > 0) acc -= v(i - 1);
        if (i + 1 < n) acc -= v(i + 1);
        out(i) = s * acc;
    }
    return out;
}

inline Matrix apply_stiffness(const SpatialGrid& g, const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = apply_stiffness(g, Vector(m.col(j)));
    return out;
}

/// ||y||^2_{L^2(t0,T;H)} by the left-rectangle rule.
inline double l2_time_h_sq(const SpatialGrid& g, const Trajectory& y) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < y.intervals(); ++k) s += g.dx * y.values.row(k).squaredNorm();
    return y.dt * s;
}

inline double l2_time_h(const SpatialGrid& g, const Trajectory& y) {
    return std::sqrt(l2_time_h_sq(g, y));
}

/// L^2(t;H) distance between two trajectories on the same time window.
inline double l2_time_h_distance(const SpatialGrid& g, const Trajectory& a, const Trajectory& b) {
    if (a.rows() != b.rows() || a.dim() != b.dim() ||
        a.piecewise_constant != b.piecewise_constant) {
        throw InvalidArgument("l2_time_h_distance: trajectory windows do not match");
    }
    Trajectory d = a;
    d.values -= b.values;
    return l2_time_h(g, d);
}

/// L^2(t;H) inner product of two control trajectories.
inline double l2_time_h_inner(const SpatialGrid& g, const Trajectory& a, const Trajectory& b) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.intervals(); ++k) s += a.values.row(k).dot(b.values.row(k));
    return a.dt * g.dx * s;
}

}  // namespace podmpc
