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
 * @file mle.hpp
 * Rank-truncated R rho R maximum likelihood.
 *
 * Each iteration applies
 *
 *   rho <- N[ A rho A ],   A = (1 - lambda) 1 + lambda R(rho),
 *   R(rho) = sum_{s,o} f(o|s) / max(p_rho(o|s), prob_floor) P_o^s,
 *
 * then keeps the `rank` largest eigenvalues (negatives clamped to zero) and
 * renormalizes the trace. The start point 1/d is not truncated; the first
 * update already carries the data.
 */
#pragma once

#include "lrtomo/core.hpp"
#include "lrtomo/designs.hpp"
#include "lrtomo/fisher.hpp"
#include "lrtomo/sampling.hpp"
#include "lrtomo/states.hpp"

#include <cmath>

namespace lrtomo {

struct MleOptions {
    int rank = 1;
    int max_iters = 5000;
    double conv_tol = 1e-10;
    double prob_floor = 1e-12;
    double dilution = 1.0;
    bool track_likelihood = false;

    void validate(int d) const {
        if (rank < 1 || rank > d) throw InvalidRank("MLE rank must satisfy 1 <= r <= d");
        if (max_iters < 1) throw InvalidArgument("max_iters must be positive");
        if (!(conv_tol > 0)) throw InvalidArgument("conv_tol must be positive");
        if (!(prob_floor > 0)) throw InvalidArgument("prob_floor must be positive");
        if (!(dilution > 0 && dilution <= 1)) throw InvalidArgument("dilution must lie in (0, 1]");
    }
};

struct MleResult {
    CMatrix estimate;
    int iterations = 0;
    double log_likelihood = 0.0;
    bool converged = false;
    std::vector<double> likelihood_history; ///< per iterate, when tracked

    DensityMatrix state() const { return DensityMatrix::from_matrix(estimate, 1e-9); }
};

namespace detail {

/// Frequencies and measurement operators of a counts table, stacked so that
/// probabilities and R(rho) reduce to a few matrix products.
class LikelihoodModel {
  public:
    explicit LikelihoodModel(const CountsTable &counts) : dim_(counts.design.dim) {
        if (counts.m < 1) throw InvalidArgument("counts table has no repetitions");
        if (counts.counts.size() != counts.design.size()) throw InvalidArgument("counts and design sizes differ");
        const auto &design = counts.design;
        const double m = static_cast<double>(counts.m);
        if (design.kind == SettingKind::Coarse) {
            for (std::size_t s = 0; s < design.size(); ++s) {
                auto proj = outcome_projectors(design.settings[s], dim_);
                for (std::size_t o = 0; o < proj.size(); ++o) {
                    projectors_.push_back(std::move(proj[o]));
                    weights_.push_back(static_cast<double>(counts.counts[s].at(o)));
                    freqs_.push_back(static_cast<double>(counts.counts[s].at(o)) / m);
                }
            }
        } else {
            vectors_.resize(dim_, static_cast<Eigen::Index>(design.size()) * dim_);
            for (std::size_t s = 0; s < design.size(); ++s) {
                vectors_.middleCols(static_cast<Eigen::Index>(s) * dim_, dim_) =
                    measurement_basis(design.settings[s], dim_);
                for (int o = 0; o < dim_; ++o) {
                    weights_.push_back(static_cast<double>(counts.counts[s].at(static_cast<std::size_t>(o))));
                    freqs_.push_back(static_cast<double>(counts.counts[s].at(static_cast<std::size_t>(o))) / m);
                }
            }
        }
    }

    int dim() const noexcept { return dim_; }

    RVector probabilities(const CMatrix &rho) const {
        if (projectors_.empty()) {
            const CMatrix rv = rho * vectors_;
            return vectors_.conjugate().cwiseProduct(rv).colwise().sum().real().transpose();
        }
        RVector p(static_cast<Eigen::Index>(projectors_.size()));
        for (std::size_t i = 0; i < projectors_.size(); ++i)
            p(static_cast<Eigen::Index>(i)) = rho.cwiseProduct(projectors_[i].transpose()).sum().real();
        return p;
    }

    double log_likelihood(const RVector &p, double floor) const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double w = weights_[static_cast<std::size_t>(i)];
            if (w > 0) acc += w * std::log(std::max(p(i), floor));
        }
        return acc;
    }

    CMatrix r_operator(const RVector &p, double floor) const {
        RVector c(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) c(i) = freqs_[static_cast<std::size_t>(i)] / std::max(p(i), floor);
        if (projectors_.empty()) return hermitian_part(vectors_ * c.asDiagonal() * vectors_.adjoint());
        CMatrix r = CMatrix::Zero(dim_, dim_);
        for (std::size_t i = 0; i < projectors_.size(); ++i) r += c(static_cast<Eigen::Index>(i)) * projectors_[i];
        return hermitian_part(r);
    }

  private:
    int dim_;
    CMatrix vectors_;
    std::vector<CMatrix> projectors_;
    std::vector<double> weights_;
    std::vector<double> freqs_;
};

/// Keeps the `rank` largest eigenvalues (clamped at zero) and renormalizes.
inline CMatrix truncate_rank(const CMatrix &rho, int rank) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(rho));
    const auto d = rho.rows();
    RVector vals = es.eigenvalues();
    for (Eigen::Index i = 0; i < d; ++i) vals(i) = (i >= d - rank) ? std::max(0.0, vals(i)) : 0.0;
    const double total = vals.sum();
    if (!(total > 0.0) || !std::isfinite(total)) return CMatrix::Constant(d, d, Complex(std::nan(""), 0));
    vals /= total;
    const auto top = es.eigenvectors().rightCols(rank);
    return hermitian_part(top * vals.tail(rank).asDiagonal() * top.adjoint());
}

} // namespace detail

/// Rank-truncated R rho R estimate from a counts table.
inline MleResult rrhor_estimate(const CountsTable &counts, const MleOptions &options) {
    const detail::LikelihoodModel model(counts);
    const int d = model.dim();
    options.validate(d);
    const CMatrix id = CMatrix::Identity(d, d);

    MleResult out;
    CMatrix rho = id / static_cast<double>(d);
    RVector p = model.probabilities(rho);
    double ll = model.log_likelihood(p, options.prob_floor);
    if (options.track_likelihood) out.likelihood_history.push_back(ll);

    for (int it = 1; it <= options.max_iters; ++it) {
        const CMatrix r = model.r_operator(p, options.prob_floor);
        const CMatrix a = options.dilution == 1.0 ? r : CMatrix((1.0 - options.dilution) * id + options.dilution * r);
        CMatrix next = a * rho * a;
        next /= next.trace().real();
        next = options.rank < d ? detail::truncate_rank(next, options.rank) : hermitian_part(next);

        p = model.probabilities(next);
        ll = model.log_likelihood(p, options.prob_floor);
        if (!std::isfinite(ll) || !next.allFinite())
            throw NumericalFailure("R rho R iteration produced a non-finite state", it);
        if (options.track_likelihood) out.likelihood_history.push_back(ll);

        const double change = (next - rho).norm();
        rho = std::move(next);
        out.iterations = it;
        if (change <= options.conv_tol) {
            out.converged = true;
            break;
        }
    }
    out.estimate = std::move(rho);
    out.log_likelihood = ll;
    return out;
}

/// Log-likelihood sum N(o|s) log p_rho(o|s) of a state against a counts table.
inline double log_likelihood(const CountsTable &counts, const CMatrix &rho, double prob_floor = 1e-12) {
    const detail::LikelihoodModel model(counts);
    return model.log_likelihood(model.probabilities(rho), prob_floor);
}

// ---------------------------------------------------------------------------
// Monte Carlo MSE
// ---------------------------------------------------------------------------

struct ReplicateResult {
    double sq_error = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::string message;
};

struct MonteCarloMse {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    std::vector<ReplicateResult> replicates;

    int failures() const {
        int f = 0;
        for (const auto &r : replicates) f += r.failed ? 1 : 0;
        return f;
    }
};

/// `reps` independent sample/estimate cycles; replicate i samples with
/// sub-seed (seed, i). Failed replicates are reported, not dropped silently.
inline MonteCarloMse mse_monte_carlo(const DensityMatrix &rho, const Design &design, long long m, int reps,
                                     const MleOptions &options, std::uint64_t seed, int workers = 1) {
    if (reps < 2) throw InvalidArgument("need at least two replicates");
    MonteCarloMse out;
    out.replicates.resize(static_cast<std::size_t>(reps));
    parallel_for(out.replicates.size(), workers, [&](std::size_t i) {
        auto &rep = out.replicates[i];
        try {
            const auto counts = sample_counts(rho, design, m, derive_seed(seed, {static_cast<std::uint64_t>(i)}));
            const auto est = rrhor_estimate(counts, options);
            rep.sq_error = frobenius_sq_dist(est.estimate, rho.matrix());
            rep.iterations = est.iterations;
            rep.converged = est.converged;
        } catch (const NumericalFailure &e) {
            rep.failed = true;
            rep.message = e.what();
        }
    });
    std::vector<double> errs;
    for (const auto &r : out.replicates)
        if (!r.failed) errs.push_back(r.sq_error);
    if (!errs.empty()) {
        double sum = 0.0;
        for (double e : errs) sum += e;
        out.mean = sum / static_cast<double>(errs.size());
    }
    if (errs.size() >= 2) {
        double ss = 0.0;
        for (double e : errs) ss += (e - out.mean) * (e - out.mean);
        out.std_error = std::sqrt(ss / static_cast<double>(errs.size() - 1) / static_cast<double>(errs.size()));
    }
    return out;
}

/// |1 - N * E||rho_ML - rho||^2 / Tr(I_S^-1 G)|.
inline double ml_relative_error(const MonteCarloMse &mc, const FisherMatrix &info_design, const FisherMatrix &g,
                                double samples) {
    const RiskValue risk = trace_risk(info_design, g);
    if (!risk) throw InvalidArgument("design is not identifiable; the Fisher prediction does not exist");
    return std::abs(1.0 - samples * mc.mean / risk.value);
}

} // namespace lrtomo
