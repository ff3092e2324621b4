// Copyright 2026 The lrtomo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file states.hpp
 * Density matrices, random low-rank states and the local chart around a
 * rank-r state.
 *
 * A chart stores the eigendecomposition rho = V diag(lambda) V^dagger and the
 * canonical ordering of the D = 2rd - r^2 - 1 real coordinates:
 *
 *   Diag(i)   for i = 2..r        (the (1,1) entry absorbs the trace)
 *   Re(i,j)   for 1 <= i <= r, i < j <= d, lexicographic
 *   Im(i,j)   same (i,j) order
 *
 * Indices in code are zero-based; Diag rows start at 1.
 */
#pragma once

#include "lrtomo/core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <array>
#include <numeric>
#include <optional>
#include <sstream>

namespace lrtomo {

inline constexpr double kRankTol = 1e-10;

class DensityMatrix {
  public:
    static constexpr double kHermitianTol = 1e-12;
    static constexpr double kTraceTol = 1e-12;
    static constexpr double kPsdTol = 1e-10;

    /// Validates and wraps `m`. The stored matrix is the Hermitian part of m.
    static DensityMatrix from_matrix(const CMatrix &m, double psd_tol = kPsdTol) {
        if (m.rows() != m.cols() || m.rows() < 1)
            throw InvalidState("density matrix must be square and non-empty");
        const double herm = max_abs(m - m.adjoint());
        if (herm > kHermitianTol) {
            std::ostringstream os;
            os << "matrix is not Hermitian (max |rho - rho^dagger| = " << herm << ")";
            throw InvalidState(os.str());
        }
        CMatrix h = hermitian_part(m);
        const double tr = h.trace().real();
        if (std::abs(tr - 1.0) > kTraceTol) {
            std::ostringstream os;
            os << "trace is " << tr << ", expected 1";
            throw InvalidState(os.str());
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
        const double min_eig = es.eigenvalues()(0);
        if (min_eig < -psd_tol) {
            std::ostringstream os;
            os << "matrix is not positive semidefinite (min eigenvalue " << min_eig << ")";
            throw OutOfModel(os.str(), min_eig);
        }
        return DensityMatrix(std::move(h));
    }

    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    const CMatrix &matrix() const noexcept { return m_; }
    Complex operator()(int i, int j) const { return m_(i, j); }

    /// Eigenvalues in descending order.
    RVector eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
        return es.eigenvalues().reverse();
    }

    bool operator==(const DensityMatrix &o) const { return m_ == o.m_; }

  private:
    explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}
    CMatrix m_;
};

enum class ParamKind { Diag, Re, Im };

/// One real chart coordinate. For Diag, row == col.
struct Param {
    ParamKind kind;
    int row;
    int col;
    bool operator==(const Param &) const = default;
};

/// Nonzero entry of a tangent matrix d(rho)/d(theta_a) in the chart basis.
struct TangentEntry {
    int row;
    int col;
    Complex value;
};

inline int chart_dimension(int d, int r) { return 2 * r * d - r * r - 1; }

/// Canonical parameter list for a rank-r chart in dimension d.
inline std::vector<Param> canonical_params(int d, int r) {
    if (r < 1 || r > d) throw InvalidRank("rank must satisfy 1 <= r <= d");
    std::vector<Param> params;
    params.reserve(static_cast<std::size_t>(chart_dimension(d, r)));
    for (int i = 1; i < r; ++i) params.push_back({ParamKind::Diag, i, i});
    for (int i = 0; i < r; ++i)
        for (int j = i + 1; j < d; ++j) params.push_back({ParamKind::Re, i, j});
    for (int i = 0; i < r; ++i)
        for (int j = i + 1; j < d; ++j) params.push_back({ParamKind::Im, i, j});
    return params;
}

/// The (at most two) nonzero entries of d(rho)/d(theta) for one coordinate.
inline std::array<TangentEntry, 2> tangent_entries(const Param &p) {
    switch (p.kind) {
    case ParamKind::Diag:
        return {TangentEntry{p.row, p.row, 1.0}, TangentEntry{0, 0, -1.0}};
    case ParamKind::Re:
        return {TangentEntry{p.row, p.col, 1.0}, TangentEntry{p.col, p.row, 1.0}};
    case ParamKind::Im:
        return {TangentEntry{p.row, p.col, Complex(0, 1)}, TangentEntry{p.col, p.row, Complex(0, -1)}};
    }
    throw InvalidArgument("unknown parameter kind");
}

class LocalChart {
  public:
    /// Chart from known eigenvalues (descending, length r) and a unitary
    /// whose first r columns span the support.
    static LocalChart from_eigensystem(RVector eigenvalues, CMatrix basis) {
        const int d = static_cast<int>(basis.rows());
        const int r = static_cast<int>(eigenvalues.size());
        if (basis.cols() != d) throw InvalidBasis("chart basis must be square");
        if (r < 1 || r >= d) throw InvalidRank("chart rank must satisfy 1 <= r < d");
        if (unitarity_defect(basis) > 1e-10) throw InvalidBasis("chart basis is not unitary");
        if (eigenvalues.sum() > 1.0 + 1e-12) throw InvalidState("chart eigenvalues sum above one");
        for (int i = 1; i < r; ++i)
            if (eigenvalues(i) > eigenvalues(i - 1))
                throw InvalidArgument("chart eigenvalues must be in descending order");
        return LocalChart(std::move(eigenvalues), std::move(basis));
    }

    int dim() const noexcept { return static_cast<int>(basis_.rows()); }
    int rank() const noexcept { return static_cast<int>(eigenvalues_.size()); }
    int num_params() const noexcept { return static_cast<int>(params_.size()); }
    const RVector &eigenvalues() const noexcept { return eigenvalues_; }
    const CMatrix &basis() const noexcept { return basis_; }
    const std::vector<Param> &params() const noexcept { return params_; }

    /// Coordinates of the chart's own state: (lambda_2..lambda_r; 0; 0).
    RVector theta0() const {
        RVector t = RVector::Zero(num_params());
        for (int i = 1; i < rank(); ++i) t(i - 1) = eigenvalues_(i);
        return t;
    }

    /// First-order matrix rho_theta in the chart basis; the lower-right
    /// (d-r)x(d-r) corner is zero and the (1,1) entry fixes the trace.
    CMatrix tangent_matrix(const RVector &theta) const {
        if (theta.size() != num_params()) throw DimensionMismatch("theta has the wrong length");
        const int d = dim();
        CMatrix m = CMatrix::Zero(d, d);
        double diag_sum = 0.0;
        for (int a = 0; a < num_params(); ++a) {
            const Param &p = params_[static_cast<std::size_t>(a)];
            switch (p.kind) {
            case ParamKind::Diag:
                m(p.row, p.row) = theta(a);
                diag_sum += theta(a);
                break;
            case ParamKind::Re:
                m(p.row, p.col) += theta(a);
                m(p.col, p.row) += theta(a);
                break;
            case ParamKind::Im:
                m(p.row, p.col) += Complex(0, theta(a));
                m(p.col, p.row) += Complex(0, -theta(a));
                break;
            }
        }
        m(0, 0) = 1.0 - diag_sum;
        return m;
    }

    /// rho_theta rotated back to the computational basis, without PSD check.
    CMatrix embed_matrix(const RVector &theta) const {
        return hermitian_part(basis_ * tangent_matrix(theta) * basis_.adjoint());
    }

  private:
    LocalChart(RVector eigenvalues, CMatrix basis)
        : eigenvalues_(std::move(eigenvalues)), basis_(std::move(basis)),
          params_(canonical_params(static_cast<int>(basis_.rows()), static_cast<int>(eigenvalues_.size()))) {}

    RVector eigenvalues_;
    CMatrix basis_;
    std::vector<Param> params_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// rho = T^dagger T / Tr(T^dagger T) with T an r x d complex Ginibre matrix.
inline DensityMatrix random_rank_r_state(int d, int r, std::uint64_t seed) {
    if (d < 1) throw InvalidArgument("dimension must be positive");
    if (r < 1 || r > d) throw InvalidRank("rank must satisfy 1 <= r <= d");
    Rng rng = make_rng(seed);
    CMatrix t(r, d);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < d; ++j) t(i, j) = complex_normal(rng);
    CMatrix rho = t.adjoint() * t;
    rho /= rho.trace().real();
    return DensityMatrix::from_matrix(hermitian_part(rho));
}

/// U diag(1/r, ..., 1/r, 0, ..., 0) U^dagger, U = identity when omitted.
inline DensityMatrix equal_eigenvalue_state(int d, int r, const std::optional<CMatrix> &basis = std::nullopt) {
    if (d < 1) throw InvalidArgument("dimension must be positive");
    if (r < 1 || r > d) throw InvalidRank("rank must satisfy 1 <= r <= d");
    CMatrix diag = CMatrix::Zero(d, d);
    for (int i = 0; i < r; ++i) diag(i, i) = 1.0 / r;
    if (!basis) return DensityMatrix::from_matrix(diag);
    if (basis->rows() != d || basis->cols() != d || unitarity_defect(*basis) > 1e-10)
        throw InvalidBasis("basis must be a d x d unitary");
    return DensityMatrix::from_matrix(hermitian_part(*basis * diag * basis->adjoint()));
}

namespace detail {

/// Multiplies a column by a phase so that its largest-magnitude component
/// (first one on ties) is real and positive.
inline void fix_phase(Eigen::Ref<CVector> v) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v(i));
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }
    if (best_abs > 0.0) v *= std::conj(v(best)) / best_abs;
}

} // namespace detail

/// Eigen-decomposes rho and builds the rank-r chart. Eigenvalues are sorted
/// descending (stable on ties); each eigenvector's phase is fixed.
inline LocalChart eigen_chart(const DensityMatrix &rho, int r) {
    const int d = rho.dim();
    if (r < 1 || r >= d) throw InvalidRank("chart rank must satisfy 1 <= r < d");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
    const RVector &vals = es.eigenvalues();
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return vals(a) > vals(b); });

    const double next = vals(order[static_cast<std::size_t>(r)]);
    if (next > kRankTol) {
        std::ostringstream os;
        os << "state has effective rank above " << r << " (eigenvalue #" << (r + 1) << " = " << next << ")";
        throw RankMismatch(os.str(), next);
    }
    CMatrix basis(d, d);
    RVector lambda(r);
    for (int c = 0; c < d; ++c) {
        basis.col(c) = es.eigenvectors().col(order[static_cast<std::size_t>(c)]);
        detail::fix_phase(basis.col(c));
    }
    for (int i = 0; i < r; ++i) lambda(i) = vals(order[static_cast<std::size_t>(i)]);
    return LocalChart::from_eigensystem(std::move(lambda), std::move(basis));
}

/// Equal-eigenvalue chart with a given support basis (identity by default).
inline LocalChart equal_eigenvalue_chart(int d, int r, const std::optional<CMatrix> &basis = std::nullopt) {
    return LocalChart::from_eigensystem(RVector::Constant(r, 1.0 / r),
                                        basis ? *basis : CMatrix::Identity(d, d));
}

/// The first-order chart state at theta, checked to be PSD within 1e-9.
inline DensityMatrix chart_embed(const LocalChart &chart, const RVector &theta) {
    CMatrix m = chart.embed_matrix(theta);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues()(0);
    if (min_eig < -1e-9) {
        std::ostringstream os;
        os << "embedded matrix leaves the state space (min eigenvalue " << min_eig << ")";
        throw OutOfModel(os.str(), min_eig);
    }
    return DensityMatrix::from_matrix(m, 1e-9);
}

inline double frobenius_sq_dist(const CMatrix &a, const CMatrix &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("frobenius_sq_dist: dimension mismatch");
    return (a - b).squaredNorm();
}

inline double frobenius_sq_dist(const DensityMatrix &a, const DensityMatrix &b) {
    return frobenius_sq_dist(a.matrix(), b.matrix());
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of diag(R) moved into Q.
inline CMatrix haar_unitary(int d, std::uint64_t seed) {
    if (d < 1) throw InvalidArgument("dimension must be positive");
    Rng rng = make_rng(seed);
    CMatrix z(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) z(i, j) = complex_normal(rng);
    Eigen::HouseholderQR<CMatrix> qr(z);
    CMatrix q = qr.householderQ() * CMatrix::Identity(d, d);
    const auto &r = qr.matrixQR();
    for (int j = 0; j < d; ++j) {
        const Complex rjj = r(j, j);
        const double a = std::abs(rjj);
        if (a > 0.0) q.col(j) *= rjj / a;
    }
    return q;
}

} // namespace lrtomo
