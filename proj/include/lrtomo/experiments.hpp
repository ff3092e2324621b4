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
 * @file experiments.hpp
 * Grid studies over (state, rank, design, seed) producing flat records.
 *
 * Every cell draws its state and design from seeds derived from the master
 * seed and the cell coordinates, so the records do not depend on the number
 * of workers or on scheduling, and each record can be replayed on its own
 * (see replay_record).
 *
 * Record kinds and their metric:
 *   settings_sweep        asymptotic_mse          Tr(I_S^-1 G) / (m k)
 *   ml_vs_fisher          ml_relative_error       |1 - N E||rho_ML - rho||^2 / Tr(I_S^-1 G)|
 *   haar_concentration    relative_error          vs the closed-form Haar mean (spectrum in aux)
 *   pauli_relative_error  relative_error          vs the full 3^n Pauli mean
 *   min_eigenvalue        min_whitened_eigenvalue of G^-1/2 I_full G^-1/2
 *   coarse_grained        coarse_mse / fine_full_mse
 *   fisher                asymptotic_mse          single-shot computation
 */
#pragma once

#include "lrtomo/core.hpp"
#include "lrtomo/designs.hpp"
#include "lrtomo/fisher.hpp"
#include "lrtomo/mle.hpp"
#include "lrtomo/sampling.hpp"
#include "lrtomo/states.hpp"

#include <json.hpp>

#include <cstdio>
#include <ostream>

namespace lrtomo {

namespace kind {
inline constexpr const char *kSettingsSweep = "settings_sweep";
inline constexpr const char *kMlVsFisher = "ml_vs_fisher";
inline constexpr const char *kHaarConcentration = "haar_concentration";
inline constexpr const char *kPauliRelativeError = "pauli_relative_error";
inline constexpr const char *kMinEigenvalue = "min_eigenvalue";
inline constexpr const char *kCoarseGrained = "coarse_grained";
inline constexpr const char *kFisher = "fisher";
} // namespace kind

namespace status {
inline constexpr const char *kOk = "ok";
inline constexpr const char *kNonIdentifiable = "non_identifiable";
inline constexpr const char *kFailed = "failed";
} // namespace status

struct ExperimentRecord {
    std::string kind;
    int n = 0;
    int d = 0;
    int r = 0;
    int state_index = 0;
    std::uint64_t state_seed = 0;
    std::string design_kind;
    int k = 0;
    int design_index = 0;
    std::uint64_t design_seed = 0;
    bool replacement = false;
    long long N = 0;
    long long m = 0;
    std::string metric;
    double value = std::numeric_limits<double>::quiet_NaN();
    std::string status = status::kOk;
    nlohmann::json aux = nlohmann::json::object();
    std::string version = kVersion;
    std::string timestamp;
};

// ---------------------------------------------------------------------------
// Record serialization
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline nlohmann::json record_to_json(const ExperimentRecord &r) {
    nlohmann::json j;
    j["kind"] = r.kind;
    j["n"] = r.n;
    j["d"] = r.d;
    j["r"] = r.r;
    j["state_index"] = r.state_index;
    j["state_seed"] = r.state_seed;
    j["design"] = {{"kind", r.design_kind}, {"k", r.k}, {"index", r.design_index}, {"seed", r.design_seed},
                   {"replacement", r.replacement}};
    j["N"] = r.N;
    j["m"] = r.m;
    j["metric"] = r.metric;
    j["value"] = std::isfinite(r.value) ? nlohmann::json(r.value) : nlohmann::json(nullptr);
    j["status"] = r.status;
    j["aux"] = r.aux;
    j["version"] = r.version;
    j["timestamp"] = r.timestamp;
    return j;
}

inline ExperimentRecord record_from_json(const nlohmann::json &j) {
    ExperimentRecord r;
    r.kind = j.at("kind").get<std::string>();
    r.n = j.at("n").get<int>();
    r.d = j.at("d").get<int>();
    r.r = j.at("r").get<int>();
    r.state_index = j.at("state_index").get<int>();
    r.state_seed = j.at("state_seed").get<std::uint64_t>();
    const auto &dj = j.at("design");
    r.design_kind = dj.at("kind").get<std::string>();
    r.k = dj.at("k").get<int>();
    r.design_index = dj.at("index").get<int>();
    r.design_seed = dj.at("seed").get<std::uint64_t>();
    r.replacement = dj.at("replacement").get<bool>();
    r.N = j.at("N").get<long long>();
    r.m = j.at("m").get<long long>();
    r.metric = j.at("metric").get<std::string>();
    r.value = j.at("value").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("value").get<double>();
    r.status = j.at("status").get<std::string>();
    r.aux = j.at("aux");
    r.version = j.at("version").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::string>();
    return r;
}

inline void write_jsonl(const std::vector<ExperimentRecord> &records, std::ostream &os) {
    for (const auto &r : records) os << record_to_json(r).dump() << '\n';
}

/// Column order of the flattened CSV.
inline const std::vector<std::string> &csv_columns() {
    static const std::vector<std::string> cols = {
        "kind", "n", "d", "r", "state_index", "state_seed", "design_kind", "k", "design_index", "design_seed",
        "replacement", "N", "m", "metric", "value", "status", "version", "timestamp", "aux"};
    return cols;
}

inline std::string csv_quote(const std::string &s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline void write_csv(const std::vector<ExperimentRecord> &records, std::ostream &os) {
    const auto &cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto &r : records) {
        os << r.kind << ',' << r.n << ',' << r.d << ',' << r.r << ',' << r.state_index << ',' << r.state_seed << ','
           << r.design_kind << ',' << r.k << ',' << r.design_index << ',' << r.design_seed << ','
           << (r.replacement ? "true" : "false") << ',' << r.N << ',' << r.m << ',' << r.metric << ','
           << format_double(r.value) << ',' << r.status << ',' << r.version << ',' << csv_quote(r.timestamp) << ','
           << csv_quote(r.aux.dump()) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

namespace detail {

enum SeedTag : std::uint64_t { kStateTag = 1, kDesignTag = 2, kReplicateTag = 3 };

inline std::uint64_t state_seed(std::uint64_t master, int n, int r, int i) {
    return derive_seed(master, {kStateTag, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r),
                                static_cast<std::uint64_t>(i)});
}

inline std::uint64_t design_seed(std::uint64_t master, int n, int r, int i, int k, int j) {
    return derive_seed(master, {kDesignTag, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r),
                                static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(j)});
}

inline std::uint64_t replicate_seed(std::uint64_t master, int n, int r, int i, int k, int j) {
    return derive_seed(master, {kReplicateTag, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r),
                                static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(j)});
}

/// Lexicographic index of a label over `alphabet`.
inline std::size_t label_index(const std::string &label, const std::string &alphabet) {
    std::size_t idx = 0;
    for (char c : label) {
        const auto pos = alphabet.find(c);
        if (pos == std::string::npos) throw InvalidLabel("invalid label '" + label + "'");
        idx = idx * alphabet.size() + pos;
    }
    return idx;
}

/// Positions of a design's settings among the enumerated labels.
inline std::vector<std::size_t> selection_of(const Design &design) {
    std::vector<std::size_t> sel;
    for (const auto &s : design.settings) {
        if (s.kind == SettingKind::Pauli)
            sel.push_back(label_index(s.label, "xyz"));
        else
            sel.push_back(label_index(s.label, "0xyz") - 1); // 0^n is not enumerated
    }
    return sel;
}

inline void check_ranks(const std::vector<int> &ranks, int d) {
    if (ranks.empty()) throw InvalidArgument("rank list is empty");
    for (int r : ranks)
        if (r < 1 || r >= d) throw InvalidRank("every rank must satisfy 1 <= r < d = " + std::to_string(d));
}

inline void check_grid(const std::vector<int> &grid, long long lo, long long hi, const char *what) {
    if (grid.empty()) throw InvalidArgument(std::string(what) + " grid is empty");
    for (int k : grid)
        if (k < lo || k > hi)
            throw InvalidArgument(std::string(what) + " value " + std::to_string(k) + " outside [" +
                                  std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

/// Fills value/status from Tr(I^-1 G) scaled by 1 / samples.
inline void set_risk(ExperimentRecord &rec, const RiskValue &risk, double samples) {
    rec.aux["info_min_eigenvalue"] = risk.min_eigenvalue;
    if (risk) {
        rec.value = risk.value / samples;
        rec.aux["trace_risk"] = risk.value;
    } else {
        rec.status = status::kNonIdentifiable;
    }
}

template <typename Cell>
std::vector<ExperimentRecord> run_cells(std::size_t count, int workers, Cell &&cell) {
    std::vector<std::vector<ExperimentRecord>> parts(count);
    parallel_for(count, workers, [&](std::size_t i) { parts[i] = cell(i); });
    std::vector<ExperimentRecord> out;
    for (auto &p : parts)
        for (auto &r : p) out.push_back(std::move(r));
    return out;
}

inline void stamp(std::vector<ExperimentRecord> &records, const std::string &timestamp) {
    for (auto &r : records) r.timestamp = timestamp;
}

} // namespace detail

// ---------------------------------------------------------------------------
// settings_sweep: asymptotic MSE of random reduced Pauli designs
// ---------------------------------------------------------------------------

struct SweepConfig {
    int n = 4;
    std::vector<int> ranks{1, 2, 3, 4, 5};
    std::vector<int> k_grid{81};
    int states = 10;
    int designs = 10;
    long long N = 8100;
    bool replacement = false;
    std::uint64_t seed = 42;
};

namespace detail {

inline ExperimentRecord sweep_record(const SweepConfig &cfg, int r, int i, std::uint64_t sseed, int k, int j,
                                     const std::vector<FisherMatrix> &per_setting, const FisherMatrix &g) {
    ExperimentRecord rec;
    rec.kind = kind::kSettingsSweep;
    rec.n = cfg.n;
    rec.d = 1 << cfg.n;
    rec.r = r;
    rec.state_index = i;
    rec.state_seed = sseed;
    rec.design_kind = "pauli";
    rec.k = k;
    rec.design_index = j;
    rec.design_seed = design_seed(cfg.seed, cfg.n, r, i, k, j);
    rec.replacement = cfg.replacement;
    rec.m = cfg.N / k;
    rec.N = rec.m * k;
    rec.metric = "asymptotic_mse";
    rec.aux["N_budget"] = cfg.N;
    if (rec.m < 1) {
        rec.status = status::kFailed;
        rec.aux["message"] = "budget gives less than one repetition per setting";
        return rec;
    }
    const Design design = sample_settings(cfg.n, k, cfg.replacement, rec.design_seed);
    set_risk(rec, trace_risk(design_mean(per_setting, selection_of(design)), g), static_cast<double>(rec.N));
    return rec;
}

} // namespace detail

inline std::vector<ExperimentRecord> settings_sweep(const SweepConfig &cfg, int workers = 1,
                                                    const std::string &timestamp = {}) {
    const int d = 1 << cfg.n;
    detail::check_ranks(cfg.ranks, d);
    detail::check_grid(cfg.k_grid, 1, ipow(3, cfg.n), "k");
    if (cfg.states < 1 || cfg.designs < 1) throw InvalidArgument("states and designs must be positive");
    const Design full = full_pauli_design(cfg.n);
    const std::size_t cells = cfg.ranks.size() * static_cast<std::size_t>(cfg.states);
    auto records = detail::run_cells(cells, workers, [&](std::size_t c) {
        const int r = cfg.ranks[c / static_cast<std::size_t>(cfg.states)];
        const int i = static_cast<int>(c % static_cast<std::size_t>(cfg.states));
        const auto sseed = detail::state_seed(cfg.seed, cfg.n, r, i);
        const LocalChart chart = eigen_chart(random_rank_r_state(d, r, sseed), r);
        const auto per_setting = fisher_per_setting(chart, full);
        const FisherMatrix g = weight_matrix(chart);
        std::vector<ExperimentRecord> out;
        for (int k : cfg.k_grid)
            for (int j = 0; j < cfg.designs; ++j)
                out.push_back(detail::sweep_record(cfg, r, i, sseed, k, j, per_setting, g));
        return out;
    });
    detail::stamp(records, timestamp);
    return records;
}

// ---------------------------------------------------------------------------
// ml_vs_fisher: Monte Carlo ML error against the Fisher prediction
// ---------------------------------------------------------------------------

struct MlCompareConfig {
    int n = 2;
    int r = 1;
    std::vector<int> k_grid{9};
    long long N = 0; ///< total budget; used when m == 0
    long long m = 100; ///< repetitions per setting; overrides N when positive
    int designs = 10;
    int reps = 30;
    bool replacement = false;
    int max_iters = 5000;
    double conv_tol = 1e-10;
    double dilution = 1.0;
    std::uint64_t seed = 42;
};

namespace detail {

inline MleOptions mle_options_of(const MlCompareConfig &cfg) {
    MleOptions o;
    o.rank = cfg.r;
    o.max_iters = cfg.max_iters;
    o.conv_tol = cfg.conv_tol;
    o.dilution = cfg.dilution;
    return o;
}

inline ExperimentRecord ml_record(const MlCompareConfig &cfg, const DensityMatrix &rho, const LocalChart &chart,
                                  std::uint64_t sseed, int k, int j) {
    ExperimentRecord rec;
    rec.kind = kind::kMlVsFisher;
    rec.n = cfg.n;
    rec.d = 1 << cfg.n;
    rec.r = cfg.r;
    rec.state_index = 0;
    rec.state_seed = sseed;
    rec.design_kind = "pauli";
    rec.k = k;
    rec.design_index = j;
    rec.design_seed = design_seed(cfg.seed, cfg.n, cfg.r, 0, k, j);
    rec.replacement = cfg.replacement;
    rec.m = cfg.m > 0 ? cfg.m : cfg.N / k;
    rec.N = rec.m * k;
    rec.metric = "ml_relative_error";
    const auto mc_seed = replicate_seed(cfg.seed, cfg.n, cfg.r, 0, k, j);
    rec.aux = {{"reps", cfg.reps},         {"mc_seed", mc_seed},          {"max_iters", cfg.max_iters},
               {"conv_tol", cfg.conv_tol}, {"dilution", cfg.dilution}};
    if (rec.m < 1) {
        rec.status = status::kFailed;
        rec.aux["message"] = "budget gives less than one repetition per setting";
        return rec;
    }
    const Design design = sample_settings(cfg.n, k, cfg.replacement, rec.design_seed);
    const FisherMatrix g = weight_matrix(chart);
    const RiskValue risk = trace_risk(fisher_design(chart, design), g);
    rec.aux["info_min_eigenvalue"] = risk.min_eigenvalue;
    if (!risk) {
        rec.status = status::kNonIdentifiable;
        return rec;
    }
    const auto mc = mse_monte_carlo(rho, design, rec.m, cfg.reps, mle_options_of(cfg), mc_seed);
    int iters = 0, converged = 0;
    for (const auto &rep : mc.replicates) {
        iters += rep.iterations;
        converged += rep.converged ? 1 : 0;
    }
    rec.aux["predicted_mse"] = risk.value / static_cast<double>(rec.N);
    rec.aux["trace_risk"] = risk.value;
    rec.aux["mc_mean"] = mc.mean;
    rec.aux["mc_std_error"] = mc.std_error;
    rec.aux["failures"] = mc.failures();
    rec.aux["converged"] = converged;
    rec.aux["mean_iterations"] = static_cast<double>(iters) / cfg.reps;
    if (mc.failures() == cfg.reps) {
        rec.status = status::kFailed;
        return rec;
    }
    rec.value = std::abs(1.0 - static_cast<double>(rec.N) * mc.mean / risk.value);
    return rec;
}

} // namespace detail

inline std::vector<ExperimentRecord> ml_vs_fisher(const MlCompareConfig &cfg, int workers = 1,
                                                  const std::string &timestamp = {}) {
    const int d = 1 << cfg.n;
    detail::check_ranks({cfg.r}, d);
    detail::check_grid(cfg.k_grid, 1, ipow(3, cfg.n), "k");
    if (cfg.designs < 1) throw InvalidArgument("designs must be positive");
    if (cfg.reps < 2) throw InvalidArgument("need at least two replicates");
    if (cfg.m < 1 && cfg.N < 1) throw InvalidArgument("give a positive m or N");
    detail::mle_options_of(cfg).validate(d);
    const auto sseed = detail::state_seed(cfg.seed, cfg.n, cfg.r, 0);
    const DensityMatrix rho = random_rank_r_state(d, cfg.r, sseed);
    const LocalChart chart = eigen_chart(rho, cfg.r);
    const std::size_t cells = cfg.k_grid.size() * static_cast<std::size_t>(cfg.designs);
    auto records = detail::run_cells(cells, workers, [&](std::size_t c) {
        const int k = cfg.k_grid[c / static_cast<std::size_t>(cfg.designs)];
        const int j = static_cast<int>(c % static_cast<std::size_t>(cfg.designs));
        return std::vector<ExperimentRecord>{detail::ml_record(cfg, rho, chart, sseed, k, j)};
    });
    detail::stamp(records, timestamp);
    return records;
}

// ---------------------------------------------------------------------------
// haar_concentration: whitened spectrum of random-basis designs at rho0
// ---------------------------------------------------------------------------

struct HaarConfig {
    int d = 16;
    std::vector<int> ranks{1, 2, 3};
    std::vector<int> k_grid{1, 5, 10, 20, 50, 100};
    int designs = 1;
    std::uint64_t seed = 42;
};

namespace detail {

inline ExperimentRecord haar_record(const HaarConfig &cfg, int r, int k, int j) {
    ExperimentRecord rec;
    rec.kind = kind::kHaarConcentration;
    rec.n = qubits_of(cfg.d);
    rec.d = cfg.d;
    rec.r = r;
    rec.design_kind = "haar";
    rec.k = k;
    rec.design_index = j;
    rec.design_seed = design_seed(cfg.seed, cfg.d, r, 0, k, j);
    rec.replacement = true;
    rec.metric = "relative_error";

    const LocalChart chart = equal_eigenvalue_chart(cfg.d, r);
    const FisherMatrix g = weight_matrix(chart);
    const FisherMatrix info = fisher_design(chart, haar_basis_design(cfg.d, k, rec.design_seed));
    const Whitened w = Whitener(g)(info);
    rec.aux["spectrum"] = std::vector<double>(w.eigenvalues.data(), w.eigenvalues.data() + w.eigenvalues.size());
    rec.aux["min_eigenvalue"] = w.min_eig();
    rec.aux["max_eigenvalue"] = w.max_eig();
    const RiskValue re = relative_error(info, mean_haar_fisher(cfg.d, r), g);
    rec.aux["info_min_eigenvalue"] = re.min_eigenvalue;
    if (re)
        rec.value = re.value;
    else
        rec.status = status::kNonIdentifiable;
    return rec;
}

} // namespace detail

inline std::vector<ExperimentRecord> haar_concentration(const HaarConfig &cfg, int workers = 1,
                                                        const std::string &timestamp = {}) {
    if (cfg.d < 2) throw InvalidArgument("dimension must be at least 2");
    detail::check_ranks(cfg.ranks, cfg.d);
    detail::check_grid(cfg.k_grid, 1, 1000000, "k");
    if (cfg.designs < 1) throw InvalidArgument("designs must be positive");
    const std::size_t per_rank = cfg.k_grid.size() * static_cast<std::size_t>(cfg.designs);
    auto records = detail::run_cells(cfg.ranks.size() * per_rank, workers, [&](std::size_t c) {
        const int r = cfg.ranks[c / per_rank];
        const std::size_t rest = c % per_rank;
        const int k = cfg.k_grid[rest / static_cast<std::size_t>(cfg.designs)];
        const int j = static_cast<int>(rest % static_cast<std::size_t>(cfg.designs));
        return std::vector<ExperimentRecord>{detail::haar_record(cfg, r, k, j)};
    });
    detail::stamp(records, timestamp);
    return records;
}

// ---------------------------------------------------------------------------
// pauli_relative_error: reduced Pauli designs against the full 3^n average
// ---------------------------------------------------------------------------

struct PauliReConfig {
    int n = 4;
    int r = 1;
    std::vector<int> k_grid{20, 81};
    int designs = 100;
    int states = 1;
    bool replacement = false;
    std::uint64_t seed = 42;
};

namespace detail {

inline ExperimentRecord pauli_re_record(const PauliReConfig &cfg, int i, std::uint64_t sseed, int k, int j,
                                        const std::vector<FisherMatrix> &per_setting, const FisherMatrix &mean,
                                        const FisherMatrix &g) {
    ExperimentRecord rec;
    rec.kind = kind::kPauliRelativeError;
    rec.n = cfg.n;
    rec.d = 1 << cfg.n;
    rec.r = cfg.r;
    rec.state_index = i;
    rec.state_seed = sseed;
    rec.design_kind = "pauli";
    rec.k = k;
    rec.design_index = j;
    rec.design_seed = design_seed(cfg.seed, cfg.n, cfg.r, i, k, j);
    rec.replacement = cfg.replacement;
    rec.metric = "relative_error";
    const Design design = sample_settings(cfg.n, k, cfg.replacement, rec.design_seed);
    const RiskValue re = relative_error(design_mean(per_setting, selection_of(design)), mean, g);
    rec.aux["info_min_eigenvalue"] = re.min_eigenvalue;
    if (re)
        rec.value = re.value;
    else
        rec.status = status::kNonIdentifiable;
    return rec;
}

} // namespace detail

inline std::vector<ExperimentRecord> pauli_relative_error(const PauliReConfig &cfg, int workers = 1,
                                                          const std::string &timestamp = {}) {
    const int d = 1 << cfg.n;
    detail::check_ranks({cfg.r}, d);
    detail::check_grid(cfg.k_grid, 1, ipow(3, cfg.n), "k");
    if (cfg.states < 1 || cfg.designs < 1) throw InvalidArgument("states and designs must be positive");
    const Design full = full_pauli_design(cfg.n);
    std::vector<ExperimentRecord> records;
    for (int i = 0; i < cfg.states; ++i) {
        const auto sseed = detail::state_seed(cfg.seed, cfg.n, cfg.r, i);
        const LocalChart chart = eigen_chart(random_rank_r_state(d, cfg.r, sseed), cfg.r);
        const auto per_setting = fisher_per_setting(chart, full, workers);
        const FisherMatrix mean = design_mean(per_setting);
        const FisherMatrix g = weight_matrix(chart);
        const std::size_t per_state = cfg.k_grid.size() * static_cast<std::size_t>(cfg.designs);
        auto part = detail::run_cells(per_state, workers, [&](std::size_t c) {
            const int k = cfg.k_grid[c / static_cast<std::size_t>(cfg.designs)];
            const int j = static_cast<int>(c % static_cast<std::size_t>(cfg.designs));
            return std::vector<ExperimentRecord>{detail::pauli_re_record(cfg, i, sseed, k, j, per_setting, mean, g)};
        });
        for (auto &r : part) records.push_back(std::move(r));
    }
    detail::stamp(records, timestamp);
    return records;
}

// ---------------------------------------------------------------------------
// min_eigenvalue: lambda_min of the whitened full-Pauli average at rotated rho0
// ---------------------------------------------------------------------------

struct MinEigConfig {
    std::vector<int> n_grid{2, 3, 4};
    std::vector<int> ranks{1, 2, 3};
    int states = 25;
    bool allow_large = false; ///< permit n > 6
    std::uint64_t seed = 42;
};

namespace detail {

inline ExperimentRecord min_eig_record(int n, int r, int i, std::uint64_t sseed) {
    const int d = 1 << n;
    ExperimentRecord rec;
    rec.kind = kind::kMinEigenvalue;
    rec.n = n;
    rec.d = d;
    rec.r = r;
    rec.state_index = i;
    rec.state_seed = sseed;
    rec.design_kind = "pauli";
    rec.k = static_cast<int>(ipow(3, n));
    rec.metric = "min_whitened_eigenvalue";
    const LocalChart chart = equal_eigenvalue_chart(d, r, haar_unitary(d, sseed));
    const FisherMatrix g = weight_matrix(chart);
    const Whitened w = Whitener(g)(fisher_design(chart, full_pauli_design(n)));
    rec.value = w.min_eig();
    rec.aux["max_eigenvalue"] = w.max_eig();
    return rec;
}

} // namespace detail

inline std::vector<ExperimentRecord> min_eigenvalue_study(const MinEigConfig &cfg, int workers = 1,
                                                          const std::string &timestamp = {}) {
    if (cfg.n_grid.empty()) throw InvalidArgument("n grid is empty");
    for (int n : cfg.n_grid) {
        if (n < 1) throw InvalidArgument("n must be positive");
        if (n > 6 && !cfg.allow_large) throw InvalidArgument("n > 6 needs allow_large");
        detail::check_ranks(cfg.ranks, 1 << n);
    }
    if (cfg.states < 1) throw InvalidArgument("states must be positive");
    const std::size_t per_n = cfg.ranks.size() * static_cast<std::size_t>(cfg.states);
    auto records = detail::run_cells(cfg.n_grid.size() * per_n, workers, [&](std::size_t c) {
        const int n = cfg.n_grid[c / per_n];
        const std::size_t rest = c % per_n;
        const int r = cfg.ranks[rest / static_cast<std::size_t>(cfg.states)];
        const int i = static_cast<int>(rest % static_cast<std::size_t>(cfg.states));
        return std::vector<ExperimentRecord>{detail::min_eig_record(n, r, i, detail::state_seed(cfg.seed, n, r, i))};
    });
    detail::stamp(records, timestamp);
    return records;
}

// ---------------------------------------------------------------------------
// coarse_grained: two-outcome Pauli observables vs fine basis counts
// ---------------------------------------------------------------------------

struct CoarseConfig {
    int n = 4;
    std::vector<int> ranks{1};
    std::vector<int> k_grid{255};
    long long N = 8100;
    int states = 10;
    int designs = 10;
    bool replacement = false;
    std::uint64_t seed = 42;
};

namespace detail {

inline ExperimentRecord coarse_record(const CoarseConfig &cfg, int r, int i, std::uint64_t sseed, int k, int j,
                                      const std::vector<FisherMatrix> &per_observable, const FisherMatrix &g) {
    ExperimentRecord rec;
    rec.kind = kind::kCoarseGrained;
    rec.n = cfg.n;
    rec.d = 1 << cfg.n;
    rec.r = r;
    rec.state_index = i;
    rec.state_seed = sseed;
    rec.design_kind = "coarse";
    rec.k = k;
    rec.design_index = j;
    rec.design_seed = design_seed(cfg.seed, cfg.n, r, i, k, j);
    rec.replacement = cfg.replacement;
    rec.m = cfg.N / k;
    rec.N = rec.m * k;
    rec.metric = "coarse_mse";
    rec.aux["N_budget"] = cfg.N;
    if (rec.m < 1) {
        rec.status = status::kFailed;
        rec.aux["message"] = "budget gives less than one repetition per observable";
        return rec;
    }
    const Design design = sample_coarse_observables(cfg.n, k, cfg.replacement, rec.design_seed);
    set_risk(rec, trace_risk(design_mean(per_observable, selection_of(design)), g), static_cast<double>(rec.N));
    return rec;
}

inline ExperimentRecord fine_full_record(const CoarseConfig &cfg, int r, int i, std::uint64_t sseed,
                                         const FisherMatrix &fine_mean, const FisherMatrix &g) {
    ExperimentRecord rec;
    rec.kind = kind::kCoarseGrained;
    rec.n = cfg.n;
    rec.d = 1 << cfg.n;
    rec.r = r;
    rec.state_index = i;
    rec.state_seed = sseed;
    rec.design_kind = "pauli";
    rec.k = static_cast<int>(ipow(3, cfg.n));
    rec.m = cfg.N / rec.k;
    rec.N = rec.m * rec.k;
    rec.metric = "fine_full_mse";
    rec.aux["N_budget"] = cfg.N;
    if (rec.m < 1) {
        rec.status = status::kFailed;
        rec.aux["message"] = "budget gives less than one repetition per setting";
        return rec;
    }
    set_risk(rec, trace_risk(fine_mean, g), static_cast<double>(rec.N));
    return rec;
}

} // namespace detail

inline std::vector<ExperimentRecord> coarse_grained_sweep(const CoarseConfig &cfg, int workers = 1,
                                                          const std::string &timestamp = {}) {
    const int d = 1 << cfg.n;
    detail::check_ranks(cfg.ranks, d);
    detail::check_grid(cfg.k_grid, 1, ipow(4, cfg.n) - 1, "observable count");
    if (cfg.states < 1 || cfg.designs < 1) throw InvalidArgument("states and designs must be positive");
    if (cfg.N < 1) throw InvalidArgument("N must be positive");
    const Design all_obs = full_coarse_design(cfg.n);
    const Design full = full_pauli_design(cfg.n);
    const std::size_t cells = cfg.ranks.size() * static_cast<std::size_t>(cfg.states);
    auto records = detail::run_cells(cells, workers, [&](std::size_t c) {
        const int r = cfg.ranks[c / static_cast<std::size_t>(cfg.states)];
        const int i = static_cast<int>(c % static_cast<std::size_t>(cfg.states));
        const auto sseed = detail::state_seed(cfg.seed, cfg.n, r, i);
        const LocalChart chart = eigen_chart(random_rank_r_state(d, r, sseed), r);
        const FisherMatrix g = weight_matrix(chart);
        const auto per_observable = fisher_per_setting(chart, all_obs);
        std::vector<ExperimentRecord> out;
        out.push_back(detail::fine_full_record(cfg, r, i, sseed, fisher_design(chart, full), g));
        for (int k : cfg.k_grid)
            for (int j = 0; j < cfg.designs; ++j)
                out.push_back(detail::coarse_record(cfg, r, i, sseed, k, j, per_observable, g));
        return out;
    });
    detail::stamp(records, timestamp);
    return records;
}

// ---------------------------------------------------------------------------
// fisher: one design at one state
// ---------------------------------------------------------------------------

/// State given either by its diagonal in the computational basis or, when
/// `diag` is empty, drawn at random with rank r from `state_seed`.
struct FisherConfig {
    int n = 1;
    std::vector<double> diag;
    int r = 0; ///< 0: number of nonzero diagonal entries
    std::vector<std::string> labels; ///< Pauli settings, or coarse observables when `coarse`
    bool coarse = false;
    long long N = 1;
    std::uint64_t seed = 42;
};

inline DensityMatrix diagonal_state(const std::vector<double> &diag) {
    RVector v(static_cast<Eigen::Index>(diag.size()));
    for (std::size_t i = 0; i < diag.size(); ++i) v(static_cast<Eigen::Index>(i)) = diag[i];
    return DensityMatrix::from_matrix(v.cast<Complex>().asDiagonal().toDenseMatrix());
}

inline int diagonal_rank(const std::vector<double> &diag) {
    int r = 0;
    for (double x : diag) r += x > kRankTol ? 1 : 0;
    return r;
}

inline DensityMatrix fisher_record_state(const ExperimentRecord &rec) {
    if (rec.aux.contains("state_diag")) return diagonal_state(rec.aux.at("state_diag").get<std::vector<double>>());
    return random_rank_r_state(rec.d, rec.r, rec.state_seed);
}

inline Design fisher_record_design(const ExperimentRecord &rec) {
    const auto labels = rec.aux.at("labels").get<std::vector<std::string>>();
    return rec.design_kind == "coarse" ? coarse_design(rec.n, labels) : pauli_design(rec.n, labels);
}

inline ExperimentRecord fisher_single_shot(const FisherConfig &cfg, const std::string &timestamp = {}) {
    if (cfg.n < 1) throw InvalidArgument("n must be positive");
    const int d = 1 << cfg.n;
    if (cfg.labels.empty()) throw InvalidArgument("no settings given");
    if (cfg.N < 1) throw InvalidArgument("N must be positive");
    ExperimentRecord rec;
    rec.kind = kind::kFisher;
    rec.n = cfg.n;
    rec.d = d;
    rec.design_kind = cfg.coarse ? "coarse" : "pauli";
    rec.k = static_cast<int>(cfg.labels.size());
    rec.N = cfg.N;
    rec.metric = "asymptotic_mse";
    rec.timestamp = timestamp;
    rec.aux["labels"] = cfg.labels;
    if (!cfg.diag.empty()) {
        if (static_cast<int>(cfg.diag.size()) != d) throw DimensionMismatch("state diagonal needs 2^n entries");
        rec.r = cfg.r > 0 ? cfg.r : diagonal_rank(cfg.diag);
        rec.aux["state_diag"] = cfg.diag;
    } else {
        rec.r = cfg.r;
        rec.state_seed = detail::state_seed(cfg.seed, cfg.n, cfg.r, 0);
    }
    if (rec.r < 1 || rec.r >= d) throw InvalidRank("rank must satisfy 1 <= r < d = " + std::to_string(d));
    const LocalChart chart = eigen_chart(fisher_record_state(rec), rec.r);
    const FisherMatrix g = weight_matrix(chart);
    const FisherMatrix info = fisher_design(chart, fisher_record_design(rec));
    const Whitened w = Whitener(g)(info);
    rec.aux["whitened_min_eigenvalue"] = w.min_eig();
    rec.aux["whitened_max_eigenvalue"] = w.max_eig();
    detail::set_risk(rec, trace_risk(info, g), static_cast<double>(rec.N));
    return rec;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// Recomputes a record's metric from its kind, parameters and seeds alone.
/// Returns NaN for records that are not ok.
inline double replay_record(const ExperimentRecord &rec) {
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    auto finish = [&](const RiskValue &v, double scale) { return v ? v.value / scale : nan; };

    if (rec.kind == kind::kFisher) {
        const LocalChart chart = eigen_chart(fisher_record_state(rec), rec.r);
        const Design design = fisher_record_design(rec);
        return finish(trace_risk(fisher_design(chart, design), weight_matrix(chart)), static_cast<double>(rec.N));
    }
    if (rec.kind == kind::kSettingsSweep) {
        const LocalChart chart = eigen_chart(random_rank_r_state(rec.d, rec.r, rec.state_seed), rec.r);
        const Design design = sample_settings(rec.n, rec.k, rec.replacement, rec.design_seed);
        return finish(trace_risk(fisher_design(chart, design), weight_matrix(chart)), static_cast<double>(rec.N));
    }
    if (rec.kind == kind::kCoarseGrained) {
        const LocalChart chart = eigen_chart(random_rank_r_state(rec.d, rec.r, rec.state_seed), rec.r);
        const Design design = rec.metric == "fine_full_mse"
                                  ? full_pauli_design(rec.n)
                                  : sample_coarse_observables(rec.n, rec.k, rec.replacement, rec.design_seed);
        return finish(trace_risk(fisher_design(chart, design), weight_matrix(chart)), static_cast<double>(rec.N));
    }
    if (rec.kind == kind::kPauliRelativeError) {
        const LocalChart chart = eigen_chart(random_rank_r_state(rec.d, rec.r, rec.state_seed), rec.r);
        const FisherMatrix mean = fisher_design(chart, full_pauli_design(rec.n));
        const Design design = sample_settings(rec.n, rec.k, rec.replacement, rec.design_seed);
        return finish(relative_error(fisher_design(chart, design), mean, weight_matrix(chart)), 1.0);
    }
    if (rec.kind == kind::kHaarConcentration) {
        const LocalChart chart = equal_eigenvalue_chart(rec.d, rec.r);
        const FisherMatrix info = fisher_design(chart, haar_basis_design(rec.d, rec.k, rec.design_seed));
        return finish(relative_error(info, mean_haar_fisher(rec.d, rec.r), weight_matrix(chart)), 1.0);
    }
    if (rec.kind == kind::kMinEigenvalue) {
        return detail::min_eig_record(rec.n, rec.r, rec.state_index, rec.state_seed).value;
    }
    if (rec.kind == kind::kMlVsFisher) {
        const DensityMatrix rho = random_rank_r_state(rec.d, rec.r, rec.state_seed);
        const LocalChart chart = eigen_chart(rho, rec.r);
        const Design design = sample_settings(rec.n, rec.k, rec.replacement, rec.design_seed);
        const FisherMatrix g = weight_matrix(chart);
        const RiskValue risk = trace_risk(fisher_design(chart, design), g);
        if (!risk) return nan;
        MleOptions opt;
        opt.rank = rec.r;
        opt.max_iters = rec.aux.at("max_iters").get<int>();
        opt.conv_tol = rec.aux.at("conv_tol").get<double>();
        opt.dilution = rec.aux.at("dilution").get<double>();
        const auto mc = mse_monte_carlo(rho, design, rec.m, rec.aux.at("reps").get<int>(), opt,
                                        rec.aux.at("mc_seed").get<std::uint64_t>());
        return std::abs(1.0 - static_cast<double>(rec.N) * mc.mean / risk.value);
    }
    throw InvalidArgument("unknown record kind '" + rec.kind + "'");
}

/// Counts of records by status, e.g. for one-line summaries.
struct RecordSummary {
    std::size_t ok = 0;
    std::size_t non_identifiable = 0;
    std::size_t failed = 0;
};

inline RecordSummary summarize(const std::vector<ExperimentRecord> &records) {
    RecordSummary s;
    for (const auto &r : records) {
        if (r.status == status::kOk)
            ++s.ok;
        else if (r.status == status::kNonIdentifiable)
            ++s.non_identifiable;
        else
            ++s.failed;
    }
    return s;
}

} // namespace lrtomo
