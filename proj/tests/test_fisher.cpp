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

#include "lrtomo/fisher.hpp"

#include <gtest/gtest.h>

namespace lrtomo {
namespace {

DensityMatrix diag_state(std::initializer_list<double> v) {
    RVector d(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) d(i++) = x;
    return DensityMatrix::from_matrix(d.cast<Complex>().asDiagonal().toDenseMatrix());
}

FisherMatrix diag2(double a, double b) {
    FisherMatrix m = FisherMatrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

double min_eig(const RMatrix &m) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(symmetric_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

// psi = (1, i, -1, 2) / sqrt(7)
DensityMatrix test_pure_state() {
    CVector psi(4);
    psi << 1.0, Complex(0, 1), -1.0, 2.0;
    psi /= std::sqrt(7.0);
    return DensityMatrix::from_matrix(hermitian_part(psi * psi.adjoint()));
}

// A^dagger A / Tr for a fixed 2 x 4 factor A
DensityMatrix test_rank_two_state() {
    CMatrix a(2, 4);
    a << 1.0, Complex(0, 0.5), 0.0, 0.2, 0.3, -1.0, Complex(0, 1), 0.0;
    CMatrix rho = a.adjoint() * a;
    rho /= rho.trace().real();
    return DensityMatrix::from_matrix(hermitian_part(rho));
}

const auto kQubit = [] { return eigen_chart(diag_state({1, 0}), 1); };

// --- weight_matrix ---------------------------------------------------------

TEST(WeightMatrix, Examples) {
    EXPECT_EQ(weight_matrix(2, 1), diag2(2, 2));
    // full-rank qubit: D = 3, dd block [2] then 2 on the Re and Im axes
    EXPECT_EQ(weight_matrix(2, 2), FisherMatrix(2.0 * FisherMatrix::Identity(3, 3)));
    EXPECT_THROW(weight_matrix(2, 3), InvalidRank);
    FisherMatrix g3 = weight_matrix(4, 3);
    RMatrix dd(2, 2);
    dd << 2, 1, 1, 2;
    EXPECT_EQ(g3.topLeftCorner(2, 2), dd);
    const FisherMatrix g = weight_matrix(8, 4);
    RMatrix block(3, 3);
    block << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    EXPECT_EQ(g.topLeftCorner(3, 3), block);
    EXPECT_EQ(g.bottomRightCorner(g.rows() - 3, g.cols() - 3),
              RMatrix(2.0 * RMatrix::Identity(g.rows() - 3, g.cols() - 3)));
    EXPECT_EQ(g.topRightCorner(3, g.cols() - 3), RMatrix::Zero(3, g.cols() - 3));
}

TEST(WeightMatrix, EqualsTraceOfTangentProducts) {
    for (int r : {1, 2, 3}) {
        const auto chart = eigen_chart(random_rank_r_state(6, r, 2 + r), r);
        const int dim = chart.num_params();
        FisherMatrix direct(dim, dim);
        std::vector<CMatrix> tangents;
        for (int a = 0; a < dim; ++a) {
            RVector e = RVector::Zero(dim);
            e(a) = 1.0;
            tangents.push_back(chart.embed_matrix(chart.theta0() + e) - chart.embed_matrix(chart.theta0()));
        }
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) direct(a, b) = (tangents[a] * tangents[b]).trace().real();
        EXPECT_LE(max_abs(direct - weight_matrix(chart)), 1e-12);
    }
}

// --- fisher_single / fisher_design -----------------------------------------

TEST(FisherSingle, QubitExamples) {
    const auto chart = kQubit();
    EXPECT_LE(max_abs(fisher_single(chart, Setting::pauli("x")) - diag2(4, 0)), 1e-14);
    EXPECT_LE(max_abs(fisher_single(chart, Setting::pauli("y")) - diag2(0, 4)), 1e-14);
    EXPECT_LE(max_abs(fisher_single(chart, Setting::pauli("z"))), 1e-14);
}

TEST(FisherSingle, BoundarySingularityIsReported) {
    // p(o) = 0 with nonzero gradient: a probability table built by hand
    ProbabilityTable t;
    t.probs = RVector::Zero(2);
    t.probs(0) = 1.0;
    t.grads = RMatrix::Zero(1, 2);
    t.grads(0, 1) = 0.5;
    try {
        fisher_from_table(t);
        FAIL();
    } catch (const BoundarySingularity &e) {
        EXPECT_EQ(e.outcome(), 1);
    }
}

TEST(FisherSingle, SymmetricPsd) {
    for (int trial = 0; trial < 20; ++trial) {
        const auto chart = eigen_chart(random_rank_r_state(8, 1 + trial % 4, 60 + trial), 1 + trial % 4);
        const auto labels = enumerate_pauli_settings(3);
        const FisherMatrix f = fisher_single(chart, Setting::pauli(labels[static_cast<std::size_t>(trial)]));
        EXPECT_LE(max_abs(f - f.transpose()), 1e-10);
        EXPECT_GE(min_eig(f), -1e-10);
    }
}

TEST(FisherDesign, QubitExamples) {
    const auto chart = kQubit();
    EXPECT_LE(max_abs(fisher_design(chart, pauli_design(1, {"x", "y"})) - diag2(2, 2)), 1e-14);
    EXPECT_LE(max_abs(fisher_design(chart, full_pauli_design(1)) - diag2(4.0 / 3, 4.0 / 3)), 1e-14);
    EXPECT_EQ(fisher_design(chart, pauli_design(1, {"x"})), fisher_single(chart, Setting::pauli("x")));
    EXPECT_THROW(fisher_design(chart, Design{}), InvalidArgument);
}

TEST(FisherDesign, IndependentOracleValues) {
    // Tr(I^-1 G) from an independent projector-trace implementation
    {
        const auto chart = eigen_chart(test_pure_state(), 1);
        const FisherMatrix g = weight_matrix(chart);
        EXPECT_NEAR(trace_risk(fisher_design(chart, full_pauli_design(2)), g).value, 7.018410226387255, 1e-10);
        EXPECT_NEAR(trace_risk(fisher_design(chart, pauli_design(2, {"xx", "yz", "zy", "zz"})), g).value,
                    9.053831793652796, 1e-10);
        EXPECT_NEAR(trace_risk(fisher_design(chart, full_coarse_design(2)), g).value, 18.104190323265257, 1e-10);
    }
    {
        const auto chart = eigen_chart(diag_state({0.7, 0.3, 0, 0}), 2);
        EXPECT_NEAR(trace_risk(fisher_design(chart, full_pauli_design(2)), weight_matrix(chart)).value, 18.78, 1e-10);
    }
    {
        const auto chart = eigen_chart(test_rank_two_state(), 2);
        const FisherMatrix g = weight_matrix(chart);
        EXPECT_NEAR(trace_risk(fisher_design(chart, full_pauli_design(2)), g).value, 14.090302371873479, 1e-9);
        EXPECT_NEAR(trace_risk(fisher_design(chart, full_coarse_design(2)), g).value, 37.65906113049539, 1e-9);
    }
}

TEST(FisherDesign, WorkerCountDoesNotChangeResult) {
    const auto chart = eigen_chart(random_rank_r_state(8, 2, 5), 2);
    const Design full = full_pauli_design(3);
    EXPECT_EQ(fisher_design(chart, full, 1), fisher_design(chart, full, 4));
}

TEST(FisherDesign, AddingASettingNeverDecreasesTotalInformation) {
    for (int trial = 0; trial < 10; ++trial) {
        const int r = 1 + trial % 3;
        const auto chart = eigen_chart(random_rank_r_state(8, r, 300 + trial), r);
        Design d = sample_settings(3, 5, false, 400 + trial);
        const FisherMatrix before = 5.0 * fisher_design(chart, d);
        const auto labels = enumerate_pauli_settings(3);
        for (const auto &l : labels) {
            if (std::none_of(d.settings.begin(), d.settings.end(), [&](const Setting &s) { return s.label == l; })) {
                d.settings.push_back(Setting::pauli(l));
                break;
            }
        }
        const FisherMatrix after = 6.0 * fisher_design(chart, d);
        EXPECT_GE(min_eig(after - before), -1e-10);
    }
}

// --- fisher_coarse ---------------------------------------------------------

TEST(FisherCoarse, Examples) {
    const auto chart = kQubit();
    EXPECT_LE(max_abs(fisher_coarse(chart, {"x"}) - diag2(4, 0)), 1e-14);
    EXPECT_LE(max_abs(fisher_coarse(chart, {"z"})), 1e-14);
    EXPECT_THROW(fisher_coarse(chart, {"0"}), InvalidLabel);
}

TEST(FisherCoarse, DataProcessingInequality) {
    for (int trial = 0; trial < 10; ++trial) {
        const int r = 1 + trial % 3;
        const auto chart = eigen_chart(random_rank_r_state(4, r, 700 + trial), r);
        const auto coarse = fisher_coarse(chart, {"zz"});
        const auto fine = fisher_single(chart, Setting::pauli("zz"));
        EXPECT_GE(min_eig(fine - coarse), -1e-10);
    }
}

TEST(FisherCoarse, SingleQubitCoarseEqualsFine) {
    const auto chart = eigen_chart(random_rank_r_state(2, 1, 3), 1);
    EXPECT_LE(max_abs(fisher_coarse(chart, {"x", "y", "z"}) - fisher_design(chart, full_pauli_design(1))), 1e-13);
}

// --- quantum_fisher --------------------------------------------------------

TEST(QuantumFisher, QubitExample) {
    EXPECT_LE(max_abs(quantum_fisher(kQubit()) - diag2(4, 4)), 1e-14);
}

TEST(QuantumFisher, ClosedFormAtEqualEigenvalueState) {
    for (auto [d, r] : {std::pair{4, 2}, {8, 3}, {6, 4}}) {
        const auto chart = equal_eigenvalue_chart(d, r);
        const FisherMatrix f = quantum_fisher(chart);
        const auto &params = chart.params();
        for (std::size_t a = 0; a < params.size(); ++a)
            for (std::size_t b = 0; b < params.size(); ++b) {
                double expect = 0.0;
                if (params[a].kind == ParamKind::Diag && params[b].kind == ParamKind::Diag)
                    expect = a == b ? 2.0 * r : r;
                else if (a == b)
                    expect = params[a].col < r ? 2.0 * r : 4.0 * r;
                EXPECT_NEAR(f(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), expect, 1e-10);
            }
    }
}

TEST(QuantumFisher, WhitenedStructure) {
    for (auto [d, r] : {std::pair{4, 2}, {8, 3}, {5, 1}}) {
        const auto chart = equal_eigenvalue_chart(d, r);
        const FisherMatrix f = quantum_fisher(chart);
        const FisherMatrix w = whiten(f, weight_matrix(chart)).matrix;
        FisherMatrix expect = f / 2.0;
        expect.topLeftCorner(r - 1, r - 1) = r * RMatrix::Identity(r - 1, r - 1);
        EXPECT_LE(max_abs(w - expect), 1e-10);
    }
}

TEST(QuantumFisher, DominatesClassicalFisher) {
    Rng rng = make_rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + trial % 3;
        const int d = 1 << n;
        const int r = 1 + trial % (d - 1);
        const auto chart = eigen_chart(random_rank_r_state(d, r, 1000 + trial), r);
        const auto labels = enumerate_pauli_settings(n);
        std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
        const FisherMatrix diff = quantum_fisher(chart) - fisher_single(chart, Setting::pauli(labels[pick(rng)]));
        EXPECT_GE(min_eig(diff), -1e-9);
    }
}

TEST(QuantumFisher, SingularChartRejected) {
    RVector ev(2);
    ev << 1.0, 0.0;
    const auto chart = LocalChart::from_eigensystem(ev, CMatrix::Identity(4, 4));
    EXPECT_THROW(quantum_fisher(chart), SingularState);
}

// --- mean_haar_fisher ------------------------------------------------------

TEST(MeanHaarFisher, Examples) {
    EXPECT_EQ(mean_haar_fisher(2, 1), diag2(2, 2));
    const FisherMatrix f = mean_haar_fisher(4, 2);
    ASSERT_EQ(f.rows(), 11);
    EXPECT_NEAR(f(0, 0), 4.0 / 3, 1e-15);
    // Re block order: (0,1) (0,2) (0,3) (1,2) (1,3)
    EXPECT_NEAR(f(1, 1), 4.0 / 3, 1e-15);
    for (int a = 2; a <= 5; ++a) EXPECT_NEAR(f(a, a), 2.0, 1e-15);
    EXPECT_NEAR(f(6, 6), 4.0 / 3, 1e-15);
    EXPECT_EQ(f - FisherMatrix(f.diagonal().asDiagonal()), FisherMatrix::Zero(11, 11));
    EXPECT_THROW(mean_haar_fisher(4, 4), InvalidRank);
}

TEST(MeanHaarFisher, MonteCarloConvergesAtRootKRate) {
    // entrywise error at 4x the samples should shrink (about halve)
    const auto chart = equal_eigenvalue_chart(4, 2);
    const FisherMatrix exact = mean_haar_fisher(4, 2);
    auto mc_error = [&](int k, std::uint64_t seed) {
        return max_abs(fisher_design(chart, haar_basis_design(4, k, seed)) - exact);
    };
    double small = 0.0, large = 0.0;
    for (std::uint64_t s = 0; s < 4; ++s) {
        small += mc_error(250, 10 + s);
        large += mc_error(4000, 20 + s);
    }
    EXPECT_LT(large, 0.6 * small);
    EXPECT_LT(large / 4, 0.15);
}

// --- whitening -------------------------------------------------------------

TEST(Whiten, HaarMeanSpectrum) {
    for (int r = 1; r <= 3; ++r) {
        const auto w = whiten(mean_haar_fisher(8, r), weight_matrix(8, r));
        const double q = static_cast<double>(r) / (r + 1);
        for (Eigen::Index i = 0; i < w.eigenvalues.size(); ++i) {
            const double ev = w.eigenvalues(i);
            EXPECT_TRUE(std::abs(ev - 1.0) < 1e-10 || std::abs(ev - q) < 1e-10) << ev;
        }
        if (r == 1) EXPECT_LE(max_abs(w.matrix - RMatrix::Identity(w.matrix.rows(), w.matrix.cols())), 1e-12);
    }
}

TEST(Whiten, SelfIsIdentity) {
    const FisherMatrix g = weight_matrix(6, 3);
    const auto w = whiten(g, g);
    EXPECT_LE(max_abs(w.matrix - RMatrix::Identity(g.rows(), g.cols())), 1e-12);
    EXPECT_NEAR(w.min_eig(), 1.0, 1e-12);
    EXPECT_NEAR(w.max_eig(), 1.0, 1e-12);
}

TEST(Whiten, Errors) {
    EXPECT_THROW(whiten(diag2(1, 1), diag2(1, 0)), NotPositiveDefinite);
    EXPECT_THROW(whiten(weight_matrix(4, 1), diag2(1, 1)), DimensionMismatch);
}

// --- asymptotic_mse / relative_error ---------------------------------------

TEST(AsymptoticMse, Examples) {
    const FisherMatrix g = diag2(2, 2);
    EXPECT_NEAR(asymptotic_mse(diag2(2, 2), g, 1).value, 2.0, 1e-14);
    EXPECT_NEAR(asymptotic_mse(diag2(4.0 / 3, 4.0 / 3), g, 1).value, 3.0, 1e-14);
    EXPECT_NEAR(asymptotic_mse(diag2(2, 2), g, 100).value, 0.02, 1e-16);
    const RiskValue bad = asymptotic_mse(diag2(4, 0), g, 1);
    EXPECT_FALSE(bad);
    EXPECT_TRUE(std::isnan(bad.value));
    EXPECT_NEAR(bad.min_eigenvalue, 0.0, 1e-15);
    EXPECT_THROW(asymptotic_mse(diag2(2, 2), g, 0), InvalidArgument);
}

TEST(AsymptoticMse, TooFewSettingsAreUnidentifiable) {
    const auto chart = eigen_chart(random_rank_r_state(4, 1, 9), 1);
    const FisherMatrix g = weight_matrix(chart);
    EXPECT_TRUE(trace_risk(fisher_design(chart, full_pauli_design(2)), g));
    // 3 independent probabilities cannot fix D = 6 parameters
    EXPECT_FALSE(trace_risk(fisher_design(chart, pauli_design(2, {"xy"})), g));
}

TEST(AsymptoticMse, CongruenceInvariance) {
    Rng rng = make_rng(12);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 10; ++trial) {
        const auto chart = eigen_chart(random_rank_r_state(4, 2, 50 + trial), 2);
        const FisherMatrix info = fisher_design(chart, full_pauli_design(2));
        const FisherMatrix g = weight_matrix(chart);
        RMatrix m(info.rows(), info.cols());
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
        m += 3.0 * RMatrix::Identity(m.rows(), m.cols());
        const double base = trace_risk(info, g).value;
        const double moved = trace_risk(m.transpose() * info * m, m.transpose() * g * m).value;
        EXPECT_NEAR(moved, base, 1e-8 * base);
    }
}

TEST(RelativeError, Examples) {
    const auto chart = kQubit();
    const FisherMatrix g = weight_matrix(chart);
    const FisherMatrix haar = mean_haar_fisher(2, 1);
    EXPECT_NEAR(relative_error(haar, haar, g).value, 1.0, 1e-15);
    EXPECT_NEAR(relative_error(fisher_design(chart, pauli_design(1, {"x", "y"})), haar, g).value, 1.0, 1e-14);
    EXPECT_NEAR(relative_error(fisher_design(chart, full_pauli_design(1)), haar, g).value, 1.5, 1e-14);
    EXPECT_FALSE(relative_error(diag2(4, 0), haar, g));
    EXPECT_FALSE(relative_error(haar, diag2(4, 0), g));
}

// --- chernoff_k ------------------------------------------------------------

TEST(ChernoffK, Regression) { EXPECT_EQ(chernoff_k(0.05, 0.1, 1, 16), 14189); }

TEST(ChernoffK, EpsilonScaling) {
    for (auto [delta, r, d] : {std::tuple{0.1, 1, 16}, {0.05, 2, 8}, {0.2, 3, 32}}) {
        const long long k1 = chernoff_k(0.1, delta, r, d);
        const long long k2 = chernoff_k(0.05, delta, r, d);
        EXPECT_LE(std::llabs(k2 - 4 * k1), 4);
    }
}

TEST(ChernoffK, DeltaOverEAddsOneBlock) {
    const double c = 4.0 * std::log(2.0) / (0.1 * 0.1);
    const double block = c * 3; // r = 2
    const long long k1 = chernoff_k(0.1, 0.1, 2, 8);
    const long long k2 = chernoff_k(0.1, 0.1 / std::exp(1.0), 2, 8);
    EXPECT_LE(std::abs(static_cast<double>(k2 - k1) - block), 1.0);
}

TEST(ChernoffK, RangeChecks) {
    EXPECT_THROW(chernoff_k(0.0, 0.1, 1, 16), InvalidArgument);
    EXPECT_THROW(chernoff_k(0.6, 0.1, 1, 16), InvalidArgument);
    EXPECT_THROW(chernoff_k(0.1, 1.0, 1, 16), InvalidArgument);
    EXPECT_THROW(chernoff_k(0.1, 0.1, 16, 16), InvalidRank);
}

} // namespace
} // namespace lrtomo
