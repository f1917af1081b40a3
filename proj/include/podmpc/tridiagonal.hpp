// SPDX-License-Identifier: MIT

#pragma once

#include "podmpc/core.hpp"

#include <cmath>

namespace podmpc {

/// Tridiagonal matrix stored by diagonals. lower(i) couples row i to i-1
/// (lower(0) unused), upper(i) couples row i to i+1 (upper(n-1) unused).
struct Tridiagonal {
    Vector lower;
    Vector diag;
    Vector upper;

    Tridiagonal() = default;
    explicit Tridiagonal(Eigen::Index n)
        : lower(Vector::Zero(n)), diag(Vector::Zero(n)), upper(Vector::Zero(n)) {}

    [[nodiscard]] Eigen::Index size() const noexcept { return diag.size(); }

    [[nodiscard]] Vector apply(const Vector& x) const {
        const Eigen::Index n = size();
        Vector y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double acc = diag(i) * x(i);
            if (i > 0) acc += lower(i) * x(i - 1);
            if (i + 1 < n) acc += upper(i) * x(i + 1);
            y(i) = acc;
        }
        return y;
    }

    [[nodiscard]] Tridiagonal transposed() const {
        const Eigen::Index n = size();
        Tridiagonal t(n);
        t.diag = diag;
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            t.upper(i) = lower(i + 1);
            t.lower(i + 1) = upper(i);
        }
        return t;
    }

    [[nodiscard]] Matrix dense() const {
        const Eigen::Index n = size();
        Matrix m = Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            m(i, i) = diag(i);
            if (i > 0) m(i, i - 1) = lower(i);
            if (i + 1 < n) m(i, i + 1) = upper(i);
        }
        return m;
    }
};

/// Thomas algorithm. No pivoting; the implicit-Euler matrices used here are
/// diagonally dominant for the admissible parameter range.
inline Vector solve_tridiagonal(const Tridiagonal& a, const Vector& rhs) {
    const Eigen::Index n = a.size();
    Vector c(n);
    Vector d(n);
    double denom = a.diag(0);
    if (!(std::abs(denom) > 0.0) || !std::isfinite(denom)) {
        throw LinearAlgebraError("solve_tridiagonal: zero pivot in row 0");
    }
    c(0) = n > 1 ? a.upper(0) / denom : 0.0;
    d(0) = rhs(0) / denom;
    for (Eigen::Index i = 1; i < n; ++i) {
        denom = a.diag(i) - a.lower(i) * c(i - 1);
        if (!(std::abs(denom) > 1e-300) || !std::isfinite(denom)) {
            throw LinearAlgebraError("solve_tridiagonal: zero pivot in row " + std::to_string(i));
        }
        c(i) = i + 1 < n ? a.upper(i) / denom : 0.0;
        d(i) = (rhs(i) - a.lower(i) * d(i - 1)) / denom;
    }
    for (Eigen::Index i = n - 2; i >= 0; --i) d(i) -= c(i) * d(i + 1);
    return d;
}

}  // namespace podmpc
