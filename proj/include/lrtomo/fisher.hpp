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
 * @file fisher.hpp
 * Information-matrix functionals in chart coordinates: the Frobenius weight
 * matrix G, classical Fisher information of settings and designs, the SLD
 * quantum Fisher information, the closed-form Haar mean, whitening, the
 * asymptotic risk Tr(I^-1 G) and the random-basis sample-size bound.
 */
#pragma once

#include "lrtomo/core.hpp"
#include "lrtomo/designs.hpp"
#include "lrtomo/states.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace lrtomo {

/// D x D real symmetric matrix in canonical chart coordinates.
using FisherMatrix = RMatrix;

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kGradTol = 1e-9;
inline constexpr double kRcond = 1e-10;

/// G_ab = Tr[d_a rho d_b rho]: (1 + delta_ab) on the Diag block, 2 delta_ab
/// on the Re and Im blocks.
inline FisherMatrix weight_matrix(int d, int r) {
    if (d < 2 || r < 1 || r > d) throw InvalidRank("weight_matrix needs 1 <= r <= d, d >= 2");
    const int dim = chart_dimension(d, r);
    FisherMatrix g = FisherMatrix::Zero(dim, dim);
    g.topLeftCorner(r - 1, r - 1).setOnes();
    g.diagonal().setConstant(2.0);
    return g;
}

inline FisherMatrix weight_matrix(const LocalChart &chart) { return weight_matrix(chart.dim(), chart.rank()); }

/// Sum over outcomes of grad grad^T / p, with outcomes of probability below
/// kProbFloor skipped when their gradient vanishes.
inline FisherMatrix fisher_from_table(const ProbabilityTable &t) {
    const auto dim = t.grads.rows();
    RMatrix scaled(dim, t.grads.cols());
    Eigen::Index kept = 0;
    for (Eigen::Index o = 0; o < t.probs.size(); ++o) {
        const double p = t.probs(o);
        if (p < kProbFloor) {
            const double gnorm = t.grads.col(o).norm();
            if (gnorm < kGradTol) continue;
            std::ostringstream os;
            os << "outcome " << o << " has probability " << p << " but gradient norm " << gnorm;
            throw BoundarySingularity(os.str(), static_cast<int>(o));
        }
        scaled.col(kept) = t.grads.col(o) / std::sqrt(p);
        ++kept;
    }
    FisherMatrix f = FisherMatrix::Zero(dim, dim);
    if (kept > 0) {
        const auto s = scaled.leftCols(kept);
        f.selfadjointView<Eigen::Lower>().rankUpdate(s);
        f = f.selfadjointView<Eigen::Lower>();
    }
    return f;
}

/// Classical Fisher information of one setting at the chart's own state.
inline FisherMatrix fisher_single(const LocalChart &chart, const Setting &setting) {
    return fisher_from_table(probabilities(chart, setting));
}

/// Per-setting Fisher matrices of a design, in design order.
inline std::vector<FisherMatrix> fisher_per_setting(const LocalChart &chart, const Design &design, int workers = 1) {
    if (design.dim != chart.dim()) throw DimensionMismatch("design and chart dimensions differ");
    std::vector<FisherMatrix> out(design.size());
    parallel_for(design.size(), workers, [&](std::size_t i) { out[i] = fisher_single(chart, design.settings[i]); });
    return out;
}

/// (1/k) times the tree sum of the selected per-setting matrices.
inline FisherMatrix design_mean(const std::vector<FisherMatrix> &per_setting,
                               const std::vector<std::size_t> &selection) {
    if (selection.empty()) throw InvalidArgument("empty design");
    std::vector<FisherMatrix> terms;
    terms.reserve(selection.size());
    for (auto i : selection) terms.push_back(per_setting.at(i));
    return tree_sum(std::move(terms)) / static_cast<double>(selection.size());
}

inline FisherMatrix design_mean(const std::vector<FisherMatrix> &per_setting) {
    if (per_setting.empty()) throw InvalidArgument("empty design");
    return tree_sum(per_setting) / static_cast<double>(per_setting.size());
}

/// I(rho|S) = (1/k) sum_s I(rho|s).
inline FisherMatrix fisher_design(const LocalChart &chart, const Design &design, int workers = 1) {
    if (design.settings.empty()) throw InvalidArgument("empty design");
    return design_mean(fisher_per_setting(chart, design, workers));
}

/// Mean two-outcome Fisher information over Pauli observables.
inline FisherMatrix fisher_coarse(const LocalChart &chart, const std::vector<std::string> &observables,
                                 int workers = 1) {
    const int n = detail::qubits_of(chart.dim());
    if (n == 0) throw DimensionMismatch("observables need d = 2^n");
    return fisher_design(chart, coarse_design(n, observables), workers);
}

/// SLD quantum Fisher information at the chart's own state:
/// F_ab = sum_{i<=r} sum_j 4 p_i / (p_i + p_j)^2 Re[(d_a rho)_ij (d_b rho)_ji].
inline FisherMatrix quantum_fisher(const LocalChart &chart) {
    const int r = chart.rank();
    const RVector &lambda = chart.eigenvalues();
    for (int i = 0; i < r; ++i)
        if (!(lambda(i) > kRankTol)) throw SingularState("chart has a zero eigenvalue on its support");
    auto p = [&](int i) { return i < r ? lambda(i) : 0.0; };

    // entries of every tangent matrix, grouped by position
    std::map<std::pair<int, int>, std::vector<std::pair<int, Complex>>> at;
    const auto &params = chart.params();
    for (std::size_t a = 0; a < params.size(); ++a)
        for (const auto &e : tangent_entries(params[a])) at[{e.row, e.col}].emplace_back(static_cast<int>(a), e.value);

    const int dim = chart.num_params();
    FisherMatrix f = FisherMatrix::Zero(dim, dim);
    for (const auto &[pos, list] : at) {
        const auto [i, j] = pos;
        if (i >= r) continue;
        auto mirror = at.find({j, i});
        if (mirror == at.end()) continue;
        const double s = p(i) + p(j);
        const double w = 4.0 * p(i) / (s * s);
        for (const auto &[a, va] : list)
            for (const auto &[b, vb] : mirror->second) f(a, b) += w * (va * vb).real();
    }
    return symmetric_part(f);
}

/// Closed-form mean of I(rho0|B_U) over Haar-random bases at the equal
/// eigenvalue state of rank r:
///   Diag block: 2r/(r+1) on the diagonal, r/(r+1) off it;
///   Re/Im with both indices in the support: 2r/(r+1);
///   Re/Im reaching outside the support: 2.
inline FisherMatrix mean_haar_fisher(int d, int r) {
    if (r < 1 || r >= d) throw InvalidRank("mean_haar_fisher needs 1 <= r < d");
    const auto params = canonical_params(d, r);
    const double q = static_cast<double>(r) / (r + 1);
    const auto dim = static_cast<Eigen::Index>(params.size());
    FisherMatrix f = FisherMatrix::Zero(dim, dim);
    f.topLeftCorner(r - 1, r - 1).setConstant(q);
    for (Eigen::Index a = 0; a < dim; ++a) {
        const Param &pa = params[static_cast<std::size_t>(a)];
        if (pa.kind == ParamKind::Diag)
            f(a, a) = 2.0 * q;
        else
            f(a, a) = pa.col < r ? 2.0 * q : 2.0;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Whitening and risk
// ---------------------------------------------------------------------------

struct Whitened {
    FisherMatrix matrix;
    RVector eigenvalues; ///< ascending
    double min_eig() const { return eigenvalues(0); }
    double max_eig() const { return eigenvalues(eigenvalues.size() - 1); }
};

/// Caches G^{-1/2} so repeated whitening against one G is cheap.
class Whitener {
  public:
    explicit Whitener(const FisherMatrix &g) {
        Eigen::SelfAdjointEigenSolver<RMatrix> es(symmetric_part(g));
        const RVector &ev = es.eigenvalues();
        if (ev.size() == 0 || !(ev(0) > 1e-12 * std::max(1.0, ev(ev.size() - 1))))
            throw NotPositiveDefinite("weight matrix is not positive definite");
        inv_sqrt_ = es.eigenvectors() * ev.cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
        inv_sqrt_ = symmetric_part(inv_sqrt_);
    }

    const RMatrix &inverse_sqrt() const noexcept { return inv_sqrt_; }

    Whitened operator()(const FisherMatrix &info) const {
        if (info.rows() != inv_sqrt_.rows() || info.cols() != inv_sqrt_.cols())
            throw DimensionMismatch("information and weight matrices differ in size");
        Whitened w;
        w.matrix = symmetric_part(inv_sqrt_ * info * inv_sqrt_);
        Eigen::SelfAdjointEigenSolver<RMatrix> es(w.matrix, Eigen::EigenvaluesOnly);
        w.eigenvalues = es.eigenvalues();
        return w;
    }

  private:
    RMatrix inv_sqrt_;
};

/// G^{-1/2} I G^{-1/2} and its spectrum.
inline Whitened whiten(const FisherMatrix &info, const FisherMatrix &g) { return Whitener(g)(info); }

/// Tr(I^-1 G) or a non-identifiable marker.
struct RiskValue {
    bool identifiable = false;
    double value = std::numeric_limits<double>::quiet_NaN();
    double min_eigenvalue = 0.0; ///< of I (or of the ratio's numerator)

    explicit operator bool() const noexcept { return identifiable; }
};

/// Tr(I^-1 G) via a symmetric eigendecomposition of I; eigenvalues below
/// kRcond * max flag the design as non-identifiable.
inline RiskValue trace_risk(const FisherMatrix &info, const FisherMatrix &g) {
    if (info.rows() != g.rows() || info.cols() != g.cols() || info.rows() != info.cols())
        throw DimensionMismatch("trace_risk: matrix sizes differ");
    Eigen::SelfAdjointEigenSolver<RMatrix> es(symmetric_part(info));
    const RVector &ev = es.eigenvalues();
    RiskValue out;
    out.min_eigenvalue = ev(0);
    const double top = ev(ev.size() - 1);
    if (!(top > 0.0) || ev(0) < kRcond * top) return out;
    const RMatrix &u = es.eigenvectors();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) acc += u.col(k).dot(g * u.col(k)) / ev(k);
    out.identifiable = true;
    out.value = acc;
    return out;
}

/// Tr(I^-1 G) / N.
inline RiskValue asymptotic_mse(const FisherMatrix &info, const FisherMatrix &g, double samples) {
    if (!(samples > 0)) throw InvalidArgument("sample count must be positive");
    RiskValue r = trace_risk(info, g);
    if (r) r.value /= samples;
    return r;
}

/// Tr(I_S^-1 G) / Tr(I_bar^-1 G).
inline RiskValue relative_error(const FisherMatrix &info_design, const FisherMatrix &info_mean, const FisherMatrix &g) {
    const RiskValue den = trace_risk(info_mean, g);
    RiskValue num = trace_risk(info_design, g);
    if (!den) return RiskValue{false, std::numeric_limits<double>::quiet_NaN(), den.min_eigenvalue};
    if (num) num.value /= den.value;
    return num;
}

/// Number of Haar-random bases sufficient for the whitened design
/// information to stay within (1 +- eps) of its mean with probability
/// 1 - delta: ceil(4 ln2 / eps^2 * (r + 1) * ln(2D / delta)).
inline long long chernoff_k(double epsilon, double delta, int r, int d) {
    if (!(epsilon > 0.0 && epsilon <= 0.5)) throw InvalidArgument("epsilon must lie in (0, 1/2]");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
    if (r < 1 || r >= d) throw InvalidRank("chernoff_k needs 1 <= r < d");
    const double c = 4.0 * std::log(2.0) / (epsilon * epsilon);
    const double dim = chart_dimension(d, r);
    return static_cast<long long>(std::ceil(c * (r + 1) * std::log(2.0 * dim / delta)));
}

} // namespace lrtomo
