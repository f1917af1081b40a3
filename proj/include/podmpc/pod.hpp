// SPDX-License-Identifier: MIT
//
// Snapshot collection, POD by the method of snapshots in X = H or X = V,
// energy bookkeeping, V-orthogonal projections and DEIM for the cubic
// reaction term.

#pragma once

#include "podmpc/core.hpp"
#include "podmpc/fd_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace podmpc {

enum class SpaceChoice { H, V };

inline const char* to_string(SpaceChoice s) { return s == SpaceChoice::H ? "H" : "V"; }

enum class SnapshotRole { State, Adjoint, TimeDerivative };

struct SnapshotBlock {
    SnapshotRole role = SnapshotRole::State;
    Trajectory data;
    Vector weights;  // one quadrature weight per row
};

struct SnapshotSet {
    std::vector<SnapshotBlock> blocks;

    [[nodiscard]] Eigen::Index dim() const {
        return blocks.empty() ? 0 : blocks.front().data.dim();
    }
    [[nodiscard]] Eigen::Index count() const {
        Eigen::Index m = 0;
        for (const auto& b : blocks) m += b.data.rows();
        return m;
    }
    /// Snapshots as columns.
    [[nodiscard]] Matrix matrix() const {
        Matrix y(dim(), count());
        Eigen::Index c = 0;
        for (const auto& b : blocks) {
            y.middleCols(c, b.data.rows()) = b.data.values.transpose();
            c += b.data.rows();
        }
        return y;
    }
    [[nodiscard]] Vector weights() const {
        Vector w(count());
        Eigen::Index c = 0;
        for (const auto& b : blocks) {
            w.segment(c, b.weights.size()) = b.weights;
            c += b.weights.size();
        }
        return w;
    }
    [[nodiscard]] const SnapshotBlock* find(SnapshotRole role) const {
        for (const auto& b : blocks) {
            if (b.role == role) return &b;
        }
        return nullptr;
    }
};

struct SnapshotConfig {
    bool include_adjoint = true;
    bool include_derivatives = false;
};

/// Uncontrolled forward solve on [t0, t_final] plus, optionally, its adjoint
/// and backward-difference quotients. Every row carries the weight dt.
inline SnapshotSet collect_snapshots(const ModelParams& params, const SpatialGrid& grid, double t0,
                                     double t_final, const Vector& y0,
                                     const SnapshotConfig& config = {}) {
    const int steps = static_cast<int>(std::lround((t_final - t0) / params.dt));
    if (steps < 1) throw InvalidArgument("collect_snapshots: empty time window");
    const FullOrderModel model(params, grid);
    SnapshotSet set;

    Trajectory y = model.forward_uncontrolled(t0, steps, y0);
    if (config.include_derivatives) {
        Trajectory dy(t0 + params.dt, params.dt, steps, grid.size());
        dy.values = (y.values.bottomRows(steps) - y.values.topRows(steps)) / params.dt;
        set.blocks.push_back({SnapshotRole::TimeDerivative, std::move(dy),
                              Vector::Constant(steps, params.dt)});
    }
    if (config.include_adjoint) {
        Trajectory p = model.adjoint(y);
        set.blocks.insert(set.blocks.begin(), {SnapshotRole::Adjoint, std::move(p),
                                               Vector::Constant(steps + 1, params.dt)});
    }
    set.blocks.insert(set.blocks.begin(),
                      {SnapshotRole::State, std::move(y), Vector::Constant(steps + 1, params.dt)});

    bool nonzero = false;
    for (const auto& b : set.blocks) nonzero = nonzero || b.data.values.cwiseAbs().maxCoeff() > 0.0;
    if (!nonzero) throw InvalidArgument("collect_snapshots: all snapshots are zero");
    return set;
}

/// Reaction term rows f(y_k) = rho (y_k^3 - y_k) of the state block, as columns.
inline Matrix nonlinear_snapshots(const SnapshotSet& set, double rho) {
    const SnapshotBlock* state = set.find(SnapshotRole::State);
    if (state == nullptr) throw InvalidArgument("nonlinear_snapshots: no state block");
    const CubicReaction f{rho};
    Matrix out(state->data.dim(), state->data.rows());
    for (Eigen::Index k = 0; k < state->data.rows(); ++k) {
        out.col(k) = f(state->data.values.row(k).transpose());
    }
    return out;
}

// ---------------------------------------------------------------------------
// POD basis
// ---------------------------------------------------------------------------

struct PodBasis {
    SpaceChoice space = SpaceChoice::H;
    Matrix modes;        // n x d, X-orthonormal columns
    Vector eigenvalues;  // d values, nonincreasing
    double total_energy = 0.0;
    double discarded_energy = 0.0;  // spectrum below the rank threshold

    [[nodiscard]] int rank() const noexcept { return static_cast<int>(eigenvalues.size()); }
    [[nodiscard]] Matrix leading(int ell) const {
        if (ell < 0 || ell > rank()) {
            throw InvalidArgument("PodBasis: requested " + std::to_string(ell) +
                                  " modes, rank is " + std::to_string(rank()));
        }
        return modes.leftCols(ell);
    }
};

inline constexpr double kPodRankThreshold = 1e-13;

/// X-inner product matrix action: H is dx-weighted Euclidean, V is stiffness.
inline Matrix apply_inner_product(SpaceChoice space, const SpatialGrid& grid, const Matrix& m) {
    return space == SpaceChoice::H ? Matrix(grid.dx * m) : apply_stiffness(grid, m);
}

/// R m with W_X = R^T R: sqrt(dx) I for H, the scaled forward-difference
/// operator with Dirichlet closure (one extra row) for V.
inline Matrix apply_inner_product_factor(SpaceChoice space, const SpatialGrid& grid,
                                         const Matrix& m) {
    if (space == SpaceChoice::H) return std::sqrt(grid.dx) * m;
    const Eigen::Index n = m.rows();
    const double s = 1.0 / std::sqrt(grid.dx);
    Matrix out(n + 1, m.cols());
    out.row(0) = s * m.row(0);
    for (Eigen::Index i = 1; i < n; ++i) out.row(i) = s * (m.row(i) - m.row(i - 1));
    out.row(n) = -s * m.row(n - 1);
    return out;
}

/// Method of snapshots. The time Gramian D^{1/2} Y^T W_X Y D^{1/2} equals
/// Z^T Z with Z = R Y D^{1/2}; its eigenpairs are taken from the SVD of Z,
/// which keeps the small eigenvalues accurate to working precision instead
/// of to the square root of it. Modes are the normalized snapshot
/// combinations, re-orthonormalized by two Gram-Schmidt passes in X and
/// rotated once more by an SVD of their snapshot coefficients.
inline PodBasis compute_pod_basis(const SnapshotSet& snapshots, SpaceChoice space,
                                  const SpatialGrid& grid) {
    const Matrix y = snapshots.matrix();
    if (y.rows() != grid.size()) throw InvalidArgument("compute_pod_basis: grid mismatch");
    const Vector sqrt_w = snapshots.weights().cwiseSqrt();
    const Matrix yw = y * sqrt_w.asDiagonal();
    const Matrix z = apply_inner_product_factor(space, grid, yw);

    Eigen::JacobiSVD<Matrix> svd(z, Eigen::ComputeThinV);
    const Vector sv = svd.singularValues();
    if (!(sv.size() > 0 && sv(0) > 0.0)) {
        throw InvalidArgument("compute_pod_basis: snapshots are all zero");
    }

    int d = 0;
    while (d < sv.size() && sv(d) * sv(d) > kPodRankThreshold * sv(0) * sv(0)) ++d;

    PodBasis basis;
    basis.space = space;
    basis.total_energy = z.squaredNorm();
    basis.discarded_energy = sv.tail(sv.size() - d).squaredNorm();
    basis.modes = yw * svd.matrixV().leftCols(d);
    for (int i = 0; i < d; ++i) basis.modes.col(i) /= sv(i);

    for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < d; ++i) {
            Vector col = basis.modes.col(i);
            for (int j = 0; j < i; ++j) {
                const Matrix wj = apply_inner_product(space, grid, Matrix(basis.modes.col(j)));
                col -= (wj.col(0).dot(col)) * basis.modes.col(j);
            }
            const Matrix wc = apply_inner_product(space, grid, Matrix(col));
            col /= std::sqrt(wc.col(0).dot(col));
            basis.modes.col(i) = col;
        }
    }

    // Coefficients <y_k, psi_i>_X of the weighted snapshots; their left
    // singular vectors align the modes with the captured energy.
    const Matrix c = basis.modes.transpose() * apply_inner_product(space, grid, yw);
    Eigen::JacobiSVD<Matrix> ritz(c, Eigen::ComputeFullU);
    basis.eigenvalues = ritz.singularValues().cwiseAbs2();
    basis.modes = basis.modes * ritz.matrixU();
    return basis;
}

/// Gram matrix <psi_j, psi_i>_X of the first `ell` modes in the given space.
inline Matrix mode_gram(const PodBasis& basis, int ell, SpaceChoice space, const SpatialGrid& grid) {
    const Matrix psi = basis.leading(ell);
    return psi.transpose() * apply_inner_product(space, grid, psi);
}

/// E(ell) = sum_{i > ell} lambda_i.
inline double pod_energy(const PodBasis& basis, int ell) {
    if (ell < 0 || ell > basis.rank()) {
        throw InvalidArgument("pod_energy: ell must lie in [0, d]");
    }
    return basis.eigenvalues.tail(basis.rank() - ell).sum();
}

/// sum_k w_k || y_k - sum_{i<=ell} <y_k, psi_i>_X psi_i ||_X^2, recomputed
/// directly from the snapshots.
inline double projection_residual(const PodBasis& basis, int ell, const SnapshotSet& snapshots,
                                  const SpatialGrid& grid) {
    const Matrix y = snapshots.matrix();
    const Vector w = snapshots.weights();
    const Matrix psi = basis.leading(ell);
    const Matrix coeff = psi.transpose() * apply_inner_product(basis.space, grid, y);
    const Matrix r = y - psi * coeff;
    const Matrix xr = apply_inner_product(basis.space, grid, r);
    double s = 0.0;
    for (Eigen::Index k = 0; k < y.cols(); ++k) s += w(k) * r.col(k).dot(xr.col(k));
    return s;
}

struct EnergyReport {
    double tail = 0.0;       // sum_{ell < i <= d} lambda_i
    double discarded = 0.0;  // spectrum beyond d
    double residual = 0.0;   // direct recomputation

    /// Full eigenvalue tail, the quantity the residual equals.
    [[nodiscard]] double spectrum_tail() const noexcept { return tail + discarded; }
};

inline EnergyReport pod_energy(const PodBasis& basis, int ell, const SnapshotSet& snapshots,
                               const SpatialGrid& grid) {
    return {pod_energy(basis, ell), basis.discarded_energy,
            projection_residual(basis, ell, snapshots, grid)};
}

enum class EnergyScale { Relative, Absolute };

/// Smallest ell with E(ell) <= tau (relative to E(0) by default).
inline int choose_rank(const PodBasis& basis, double tau_pod,
                       EnergyScale scale = EnergyScale::Relative) {
    if (tau_pod < 0.0) throw InvalidArgument("choose_rank: tau_pod must be nonnegative");
    if (tau_pod == 0.0) return basis.rank();
    const double total = pod_energy(basis, 0);
    for (int ell = 0; ell <= basis.rank(); ++ell) {
        const double e = pod_energy(basis, ell);
        const double v = scale == EnergyScale::Relative ? e / total : e;
        if (v <= tau_pod) return ell;
    }
    return basis.rank();
}

/// V-orthogonal projection onto the span of the first `ell` modes. V-modes
/// use the explicit expansion; H-modes solve the ell x ell normal equations
/// with matrix <psi_j, psi_i>_V.
inline Vector project_onto_basis(const PodBasis& basis, int ell, const SpatialGrid& grid,
                                 const Vector& phi) {
    if (!phi.allFinite()) throw InvalidArgument("project_onto_basis: input is not finite");
    const Matrix psi = basis.leading(ell);
    const Vector rhs = psi.transpose() * apply_stiffness(grid, phi);
    if (basis.space == SpaceChoice::V) return psi * rhs;
    const Matrix gram = mode_gram(basis, ell, SpaceChoice::V, grid);
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw LinearAlgebraError("project_onto_basis: singular mode Gram matrix");
    }
    return psi * ldlt.solve(rhs);
}

// ---------------------------------------------------------------------------
// DEIM
// ---------------------------------------------------------------------------

inline constexpr double kDeimRankThreshold = 1e-10;

struct DeimData {
    Matrix modes;               // n x m, Euclidean-orthonormal
    std::vector<int> indices;   // m distinct interior nodes
    Eigen::PartialPivLU<Matrix> interpolation;  // factorization of P^T U

    [[nodiscard]] int size() const noexcept { return static_cast<int>(indices.size()); }

    /// U (P^T U)^{-1} f_P, given the nonlinearity sampled at `indices`.
    [[nodiscard]] Vector reconstruct(const Vector& sampled) const {
        return modes * interpolation.solve(sampled);
    }
    [[nodiscard]] Vector sample(const Vector& full) const {
        Vector s(size());
        for (int j = 0; j < size(); ++j) s(j) = full(indices[j]);
        return s;
    }
    [[nodiscard]] Vector approximate(const Vector& full) const { return reconstruct(sample(full)); }
};

/// Numerical rank of a snapshot matrix (singular values above
/// kDeimRankThreshold relative to the largest).
inline int numerical_rank(const Matrix& snapshots) {
    Eigen::BDCSVD<Matrix> svd(snapshots);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || !(s(0) > 0.0)) return 0;
    int r = 0;
    while (r < s.size() && s(r) > kDeimRankThreshold * s(0)) ++r;
    return r;
}

/// POD of the nonlinearity snapshots followed by greedy interpolation-point
/// selection: the first index maximizes |u_1|, each next one maximizes the
/// residual of interpolating the new mode from the previous ones.
inline DeimData build_deim(const Matrix& snapshots, int ell_deim) {
    if (ell_deim < 1) throw InvalidArgument("build_deim: need at least one DEIM mode");
    Eigen::BDCSVD<Matrix> svd(snapshots, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    int rank = 0;
    while (rank < s.size() && s(rank) > kDeimRankThreshold * s(0)) ++rank;
    if (ell_deim > rank) {
        throw InvalidArgument("build_deim: requested " + std::to_string(ell_deim) +
                              " modes, nonlinear snapshot rank is " + std::to_string(rank));
    }
    DeimData deim;
    deim.modes = svd.matrixU().leftCols(ell_deim);

    Eigen::Index first = 0;
    deim.modes.col(0).cwiseAbs().maxCoeff(&first);
    deim.indices.push_back(static_cast<int>(first));
    for (int j = 1; j < ell_deim; ++j) {
        Matrix pu(j, j);
        Vector pv(j);
        for (int a = 0; a < j; ++a) {
            pu.row(a) = deim.modes.row(deim.indices[a]).head(j);
            pv(a) = deim.modes(deim.indices[a], j);
        }
        const Vector c = pu.partialPivLu().solve(pv);
        const Vector r = deim.modes.col(j) - deim.modes.leftCols(j) * c;
        Eigen::Index next = 0;
        r.cwiseAbs().maxCoeff(&next);
        if (std::find(deim.indices.begin(), deim.indices.end(), static_cast<int>(next)) !=
            deim.indices.end()) {
            throw LinearAlgebraError("build_deim: repeated interpolation index");
        }
        deim.indices.push_back(static_cast<int>(next));
    }

    Matrix pu(ell_deim, ell_deim);
    for (int a = 0; a < ell_deim; ++a) pu.row(a) = deim.modes.row(deim.indices[a]);
    deim.interpolation.compute(pu);
    const double rcond = deim.interpolation.rcond();
    if (!(rcond > 1e-14)) throw LinearAlgebraError("build_deim: singular interpolation system");
    return deim;
}

}  // namespace podmpc
