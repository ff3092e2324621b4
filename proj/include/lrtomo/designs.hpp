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
 * @file designs.hpp
 * Measurement designs: Pauli settings, Haar-random bases and two-outcome
 * Pauli observables, with outcome probabilities and their gradients in a
 * chart.
 *
 * Conventions (fixed, serialized data depends on them):
 *  - |z+> = (1,0), |z-> = (0,1); |x+-> = (1,+-1)/sqrt2; |y+-> = (1,+-i)/sqrt2.
 *  - Outcome o = (o_1..o_n) maps to index sum_i b_i 2^(n-i) with
 *    b_i = (1 - o_i)/2, so qubit 1 is the most significant bit and the
 *    all-plus outcome is index 0.
 *  - Coarse observables have outcome 0 = +1, outcome 1 = -1.
 */
#pragma once

#include "lrtomo/core.hpp"
#include "lrtomo/states.hpp"

#include <json.hpp>

#include <span>
#include <sstream>
#include <utility>

namespace lrtomo {

enum class SettingKind { Pauli, Haar, Coarse };

inline std::string to_string(SettingKind k) {
    switch (k) {
    case SettingKind::Pauli: return "pauli";
    case SettingKind::Haar: return "haar";
    case SettingKind::Coarse: return "coarse";
    }
    return "?";
}

inline SettingKind setting_kind_from_string(const std::string &s) {
    if (s == "pauli") return SettingKind::Pauli;
    if (s == "haar") return SettingKind::Haar;
    if (s == "coarse") return SettingKind::Coarse;
    throw InvalidLabel("unknown design kind '" + s + "'");
}

/// A Pauli label in {x,y,z}^n, a coarse label in {0,x,y,z}^n, or a unitary
/// whose columns are the measurement basis.
struct Setting {
    SettingKind kind = SettingKind::Pauli;
    std::string label;
    CMatrix basis;

    static Setting pauli(std::string label) { return {SettingKind::Pauli, std::move(label), {}}; }
    static Setting coarse(std::string label) { return {SettingKind::Coarse, std::move(label), {}}; }
    static Setting haar(CMatrix u) { return {SettingKind::Haar, {}, std::move(u)}; }

    int num_outcomes(int d) const { return kind == SettingKind::Coarse ? 2 : d; }

    bool operator==(const Setting &o) const {
        return kind == o.kind && label == o.label && basis.rows() == o.basis.rows() &&
               basis.cols() == o.basis.cols() && basis == o.basis;
    }
};

struct Design {
    SettingKind kind = SettingKind::Pauli;
    int dim = 0;
    int qubits = 0; ///< 0 when dim is not a power of two
    bool replacement = false;
    std::uint64_t seed = 0;
    std::vector<Setting> settings;

    std::size_t size() const noexcept { return settings.size(); }
    bool operator==(const Design &) const = default;
};

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

namespace detail {

inline void check_pauli_label(const std::string &s, int n) {
    if (static_cast<int>(s.size()) != n) throw InvalidLabel("Pauli label '" + s + "' does not have n characters");
    for (char c : s)
        if (c != 'x' && c != 'y' && c != 'z') throw InvalidLabel("invalid Pauli label '" + s + "'");
}

inline void check_coarse_label(const std::string &b, int n) {
    if (static_cast<int>(b.size()) != n) throw InvalidLabel("observable label '" + b + "' does not have n characters");
    bool nontrivial = false;
    for (char c : b) {
        if (c != '0' && c != 'x' && c != 'y' && c != 'z') throw InvalidLabel("invalid observable label '" + b + "'");
        nontrivial |= c != '0';
    }
    if (!nontrivial) throw InvalidLabel("identity observable carries no information");
}

inline std::vector<std::string> enumerate_words(const std::string &alphabet, int n) {
    std::vector<std::string> out{std::string()};
    for (int q = 0; q < n; ++q) {
        std::vector<std::string> next;
        next.reserve(out.size() * alphabet.size());
        for (const auto &w : out)
            for (char c : alphabet) next.push_back(w + c);
        out = std::move(next);
    }
    return out;
}

inline int qubits_of(int d) {
    if (!is_power_of_two(d)) return 0;
    int n = 0;
    while ((1 << n) < d) ++n;
    return n;
}

/// Eigenvectors of one Pauli: column 0 is the +1 vector, column 1 the -1.
inline Eigen::Matrix2cd single_qubit_basis(char s) {
    const double h = M_SQRT1_2;
    Eigen::Matrix2cd m;
    switch (s) {
    case 'z': m << 1.0, 0.0, 0.0, 1.0; break;
    case 'x': m << h, h, h, -h; break;
    case 'y': m << h, h, Complex(0, h), Complex(0, -h); break;
    default: throw InvalidLabel(std::string("invalid Pauli character '") + s + "'");
    }
    return m;
}

inline Eigen::Matrix2cd single_qubit_pauli(char b) {
    Eigen::Matrix2cd m;
    switch (b) {
    case '0': m << 1.0, 0.0, 0.0, 1.0; break;
    case 'x': m << 0.0, 1.0, 1.0, 0.0; break;
    case 'y': m << 0.0, Complex(0, -1), Complex(0, 1), 0.0; break;
    case 'z': m << 1.0, 0.0, 0.0, -1.0; break;
    default: throw InvalidLabel(std::string("invalid observable character '") + b + "'");
    }
    return m;
}

inline CMatrix kron(const CMatrix &a, const CMatrix &b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

} // namespace detail

/// All 3^n Pauli labels in lexicographic order (x < y < z).
inline std::vector<std::string> enumerate_pauli_settings(int n) {
    if (n < 1) throw InvalidArgument("need at least one qubit");
    return detail::enumerate_words("xyz", n);
}

/// All 4^n - 1 non-identity observable labels, lexicographic (0 < x < y < z).
inline std::vector<std::string> enumerate_coarse_labels(int n) {
    if (n < 1) throw InvalidArgument("need at least one qubit");
    auto words = detail::enumerate_words("0xyz", n);
    words.erase(words.begin()); // 0^n
    return words;
}

/// Columns are the measurement vectors |lambda_o^s>, in outcome-index order.
inline CMatrix pauli_setting_basis(const std::string &s, int n) {
    detail::check_pauli_label(s, n);
    CMatrix b = CMatrix::Ones(1, 1);
    for (char c : s) b = detail::kron(b, detail::single_qubit_basis(c));
    return b;
}

/// sigma_b = sigma_{b_1} (x) ... (x) sigma_{b_n}.
inline CMatrix pauli_operator(const std::string &b) {
    CMatrix m = CMatrix::Ones(1, 1);
    for (char c : b) m = detail::kron(m, detail::single_qubit_pauli(c));
    return m;
}

/// Spectral projections (P+, P-) of sigma_b.
inline std::pair<CMatrix, CMatrix> pauli_observable_projectors(const std::string &b, int n) {
    detail::check_coarse_label(b, n);
    const CMatrix sigma = pauli_operator(b);
    const CMatrix id = CMatrix::Identity(sigma.rows(), sigma.cols());
    return {(id + sigma) * 0.5, (id - sigma) * 0.5};
}

/// Measurement vectors of a rank-one setting as columns of a d x d matrix.
inline CMatrix measurement_basis(const Setting &s, int d) {
    switch (s.kind) {
    case SettingKind::Pauli: {
        const int n = detail::qubits_of(d);
        if (n == 0) throw DimensionMismatch("Pauli settings need d = 2^n");
        return pauli_setting_basis(s.label, n);
    }
    case SettingKind::Haar:
        if (s.basis.rows() != d || s.basis.cols() != d) throw DimensionMismatch("basis has the wrong dimension");
        return s.basis;
    case SettingKind::Coarse:
        break;
    }
    throw InvalidArgument("coarse observables have no rank-one basis");
}

/// Projectors of a setting's outcomes (rank-one or spectral pair).
inline std::vector<CMatrix> outcome_projectors(const Setting &s, int d) {
    std::vector<CMatrix> out;
    if (s.kind == SettingKind::Coarse) {
        auto [plus, minus] = pauli_observable_projectors(s.label, detail::qubits_of(d));
        if (plus.rows() != d) throw DimensionMismatch("observable has the wrong dimension");
        out.push_back(std::move(plus));
        out.push_back(std::move(minus));
        return out;
    }
    const CMatrix b = measurement_basis(s, d);
    for (int o = 0; o < d; ++o) out.push_back(b.col(o) * b.col(o).adjoint());
    return out;
}

// ---------------------------------------------------------------------------
// Design construction
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::size_t> sample_indices(std::size_t population, int k, bool replacement, std::uint64_t seed) {
    if (k < 1) throw InvalidArgument("a design needs at least one setting");
    Rng rng = make_rng(seed);
    std::vector<std::size_t> out;
    if (replacement) {
        std::uniform_int_distribution<std::size_t> pick(0, population - 1);
        for (int i = 0; i < k; ++i) out.push_back(pick(rng));
        return out;
    }
    if (static_cast<std::size_t>(k) > population) {
        std::ostringstream os;
        os << "cannot draw " << k << " distinct settings out of " << population;
        throw InvalidArgument(os.str());
    }
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), population - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
    }
    out.assign(pool.begin(), pool.begin() + k);
    // A design drawn without replacement is a set; store it canonically.
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace detail

/// k uniformly random Pauli settings. Without replacement the settings are
/// stored in lexicographic order.
inline Design sample_settings(int n, int k, bool replacement, std::uint64_t seed) {
    const auto labels = enumerate_pauli_settings(n);
    Design d{SettingKind::Pauli, 1 << n, n, replacement, seed, {}};
    for (auto i : detail::sample_indices(labels.size(), k, replacement, seed))
        d.settings.push_back(Setting::pauli(labels[i]));
    return d;
}

/// The complete 3^n Pauli design.
inline Design full_pauli_design(int n) {
    Design d{SettingKind::Pauli, 1 << n, n, false, 0, {}};
    for (auto &l : enumerate_pauli_settings(n)) d.settings.push_back(Setting::pauli(l));
    return d;
}

/// Design from explicit Pauli labels.
inline Design pauli_design(int n, const std::vector<std::string> &labels) {
    Design d{SettingKind::Pauli, 1 << n, n, false, 0, {}};
    for (const auto &l : labels) {
        detail::check_pauli_label(l, n);
        d.settings.push_back(Setting::pauli(l));
    }
    return d;
}

/// k random non-identity Pauli observables (two-outcome model).
inline Design sample_coarse_observables(int n, int k, bool replacement, std::uint64_t seed) {
    const auto labels = enumerate_coarse_labels(n);
    Design d{SettingKind::Coarse, 1 << n, n, replacement, seed, {}};
    for (auto i : detail::sample_indices(labels.size(), k, replacement, seed))
        d.settings.push_back(Setting::coarse(labels[i]));
    return d;
}

inline Design coarse_design(int n, const std::vector<std::string> &labels) {
    Design d{SettingKind::Coarse, 1 << n, n, false, 0, {}};
    for (const auto &l : labels) {
        detail::check_coarse_label(l, n);
        d.settings.push_back(Setting::coarse(l));
    }
    return d;
}

inline Design full_coarse_design(int n) { return coarse_design(n, enumerate_coarse_labels(n)); }

/// k independent Haar-random bases; basis j uses sub-seed (seed, j).
inline Design haar_basis_design(int d, int k, std::uint64_t seed) {
    if (k < 1) throw InvalidArgument("a design needs at least one basis");
    Design out{SettingKind::Haar, d, detail::qubits_of(d), true, seed, {}};
    out.settings.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j)
        out.settings.push_back(Setting::haar(haar_unitary(d, derive_seed(seed, {static_cast<std::uint64_t>(j)}))));
    return out;
}

// ---------------------------------------------------------------------------
// Probabilities and gradients
// ---------------------------------------------------------------------------

struct ProbabilityTable {
    RVector probs; ///< one entry per outcome
    RMatrix grads; ///< D x outcomes, d p(o) / d theta_a
};

namespace detail {

/// Rank-one outcomes: W holds the measurement vectors in the chart basis.
inline ProbabilityTable rank_one_table(const LocalChart &chart, const CMatrix &tangent, const CMatrix &w) {
    const int outcomes = static_cast<int>(w.cols());
    ProbabilityTable t;
    t.probs.resize(outcomes);
    for (int o = 0; o < outcomes; ++o) t.probs(o) = w.col(o).dot(tangent * w.col(o)).real();

    const auto &params = chart.params();
    t.grads.resize(static_cast<Eigen::Index>(params.size()), outcomes);
    const RVector first = w.row(0).cwiseAbs2().transpose();
    for (std::size_t a = 0; a < params.size(); ++a) {
        const Param &p = params[a];
        const auto ai = static_cast<Eigen::Index>(a);
        switch (p.kind) {
        case ParamKind::Diag:
            t.grads.row(ai) = w.row(p.row).cwiseAbs2() - first.transpose();
            break;
        case ParamKind::Re:
            t.grads.row(ai) = 2.0 * (w.row(p.row).conjugate().cwiseProduct(w.row(p.col))).real();
            break;
        case ParamKind::Im:
            t.grads.row(ai) = 2.0 * (w.row(p.row).cwiseProduct(w.row(p.col).conjugate())).imag();
            break;
        }
    }
    return t;
}

/// Two-outcome observable: Q = V^dagger P+ V in the chart basis.
inline ProbabilityTable coarse_table(const LocalChart &chart, const CMatrix &tangent, const CMatrix &q) {
    ProbabilityTable t;
    const double p_plus = tangent.cwiseProduct(q.transpose()).sum().real();
    t.probs.resize(2);
    t.probs << p_plus, 1.0 - p_plus;
    const auto &params = chart.params();
    t.grads.resize(static_cast<Eigen::Index>(params.size()), 2);
    for (std::size_t a = 0; a < params.size(); ++a) {
        const Param &p = params[a];
        double g = 0.0;
        switch (p.kind) {
        case ParamKind::Diag: g = (q(p.row, p.row) - q(0, 0)).real(); break;
        case ParamKind::Re: g = 2.0 * q(p.col, p.row).real(); break;
        case ParamKind::Im: g = -2.0 * q(p.col, p.row).imag(); break;
        }
        t.grads(static_cast<Eigen::Index>(a), 0) = g;
        t.grads(static_cast<Eigen::Index>(a), 1) = -g;
    }
    return t;
}

} // namespace detail

/// Outcome probabilities of `setting` at chart coordinates theta, with
/// analytic gradients (the trace constraint is folded into Diag rows).
inline ProbabilityTable probabilities(const LocalChart &chart, const RVector &theta, const Setting &setting) {
    const int d = chart.dim();
    const CMatrix tangent = chart.tangent_matrix(theta);
    if (setting.kind == SettingKind::Coarse) {
        const int n = detail::qubits_of(d);
        if (n == 0) throw DimensionMismatch("observables need d = 2^n");
        detail::check_coarse_label(setting.label, n);
        const CMatrix plus = (CMatrix::Identity(d, d) + pauli_operator(setting.label)) * 0.5;
        return detail::coarse_table(chart, tangent, chart.basis().adjoint() * plus * chart.basis());
    }
    return detail::rank_one_table(chart, tangent, chart.basis().adjoint() * measurement_basis(setting, d));
}

inline ProbabilityTable probabilities(const LocalChart &chart, const Setting &setting) {
    return probabilities(chart, chart.theta0(), setting);
}

/// p(o|s) = Tr(rho P_o^s) directly from a density matrix.
inline RVector state_probabilities(const CMatrix &rho, const Setting &setting) {
    const int d = static_cast<int>(rho.rows());
    RVector p;
    if (setting.kind == SettingKind::Coarse) {
        const CMatrix sigma = pauli_operator(setting.label);
        if (sigma.rows() != d) throw DimensionMismatch("observable has the wrong dimension");
        const double e = rho.cwiseProduct(sigma.transpose()).sum().real();
        p.resize(2);
        p << 0.5 * (1.0 + e), 0.5 * (1.0 - e);
    } else {
        const CMatrix b = measurement_basis(setting, d);
        p = (b.adjoint() * rho * b).diagonal().real();
    }
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::max(0.0, p(i));
    return p;
}

// ---------------------------------------------------------------------------
// Coarse graining
// ---------------------------------------------------------------------------

/// <sigma_b> estimated from fine counts of a setting s that agrees with b on
/// every non-identity position. Works equally with probabilities (m = 1).
inline double pauli_expectation_from_counts(std::span<const double> counts, const std::string &s, const std::string &b,
                                            double m) {
    const int n = static_cast<int>(s.size());
    detail::check_pauli_label(s, n);
    detail::check_coarse_label(b, n);
    for (int i = 0; i < n; ++i)
        if (b[static_cast<std::size_t>(i)] != '0' && b[static_cast<std::size_t>(i)] != s[static_cast<std::size_t>(i)])
            throw InvalidLabel("setting '" + s + "' cannot estimate observable '" + b + "'");
    if (counts.size() != (std::size_t{1} << n)) throw DimensionMismatch("expected 2^n counts");
    if (m <= 0) throw InvalidArgument("repetition count must be positive");
    double acc = 0.0;
    for (std::size_t o = 0; o < counts.size(); ++o) {
        int sign = 1;
        for (int i = 0; i < n; ++i) {
            const bool minus = (o >> (n - 1 - i)) & 1u;
            if (b[static_cast<std::size_t>(i)] != '0' && minus) sign = -sign;
        }
        acc += sign * counts[o];
    }
    return acc / m;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json design_to_json(const Design &d) {
    nlohmann::json j;
    j["kind"] = to_string(d.kind);
    if (d.kind == SettingKind::Haar)
        j["d"] = d.dim;
    else
        j["n"] = d.qubits;
    j["seed"] = d.seed;
    j["replacement"] = d.replacement;
    nlohmann::json settings = nlohmann::json::array();
    for (const auto &s : d.settings) {
        if (d.kind == SettingKind::Haar) {
            // row-major [re, im] pairs
            nlohmann::json entries = nlohmann::json::array();
            for (Eigen::Index r = 0; r < s.basis.rows(); ++r)
                for (Eigen::Index c = 0; c < s.basis.cols(); ++c)
                    entries.push_back({s.basis(r, c).real(), s.basis(r, c).imag()});
            settings.push_back(std::move(entries));
        } else {
            settings.push_back(s.label);
        }
    }
    j["settings"] = std::move(settings);
    return j;
}

inline Design design_from_json(const nlohmann::json &j) {
    Design d;
    d.kind = setting_kind_from_string(j.at("kind").get<std::string>());
    if (d.kind == SettingKind::Haar) {
        d.dim = j.at("d").get<int>();
        d.qubits = detail::qubits_of(d.dim);
    } else {
        d.qubits = j.at("n").get<int>();
        d.dim = 1 << d.qubits;
    }
    d.seed = j.at("seed").get<std::uint64_t>();
    d.replacement = j.at("replacement").get<bool>();
    for (const auto &s : j.at("settings")) {
        if (d.kind == SettingKind::Haar) {
            if (s.size() != static_cast<std::size_t>(d.dim) * static_cast<std::size_t>(d.dim))
                throw DimensionMismatch("unitary entry count does not match d");
            CMatrix u(d.dim, d.dim);
            std::size_t idx = 0;
            for (int r = 0; r < d.dim; ++r)
                for (int c = 0; c < d.dim; ++c, ++idx)
                    u(r, c) = Complex(s[idx].at(0).get<double>(), s[idx].at(1).get<double>());
            if (unitarity_defect(u) > 1e-10) throw InvalidBasis("serialized basis is not unitary");
            d.settings.push_back(Setting::haar(std::move(u)));
        } else {
            auto label = s.get<std::string>();
            if (d.kind == SettingKind::Pauli)
                detail::check_pauli_label(label, d.qubits);
            else
                detail::check_coarse_label(label, d.qubits);
            d.settings.push_back({d.kind, std::move(label), {}});
        }
    }
    return d;
}

} // namespace lrtomo
