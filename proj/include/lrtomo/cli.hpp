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
 * @file cli.hpp
 * Command-line driver.
 *
 * Every run is described by a RunConfig: the subcommand, its parameters as
 * flat key/value strings named after the flags, the master seed, output
 * directory, worker count and timestamp. Values resolve as
 *
 *   flags > config file (--config) > defaults
 *
 * A config file is either `key=value` lines (`#` starts a comment) or a
 * manifest.json written by an earlier run. Each run writes
 *
 *   <out>/records.jsonl   one record per line
 *   <out>/<kind>.csv      flattened records, columns as in csv_columns()
 *   <out>/manifest.json   {"version", "command", "config": {...}}
 *
 * and `counts` writes counts.csv plus its counts.json sidecar instead of
 * records. The default output directory is $LRTOMO_OUTPUT_DIR, else
 * ./lrtomo-out.
 */
#pragma once

#include "lrtomo/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace lrtomo::cli {

/// Raised for anything wrong with the requested configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

using ParamMap = std::map<std::string, std::string>;

struct RunConfig {
    std::string command;
    ParamMap params; ///< subcommand parameters, keyed by flag name
    std::uint64_t seed = 42;
    std::string output_dir;
    int workers = 1;
    std::string timestamp;

    bool operator==(const RunConfig &) const = default;

    /// All fields as flag-named strings.
    ParamMap to_flat() const {
        ParamMap out = params;
        out["seed"] = std::to_string(seed);
        out["output-dir"] = output_dir;
        out["workers"] = std::to_string(workers);
        out["timestamp"] = timestamp;
        return out;
    }

    nlohmann::json to_json() const {
        return {{"version", kVersion}, {"command", command}, {"config", to_flat()}};
    }

    static RunConfig from_json(const nlohmann::json &j);
};

// ---------------------------------------------------------------------------
// Parameter tables
// ---------------------------------------------------------------------------

struct ParamSpec {
    const char *name;
    const char *default_value;
    const char *help;
    bool is_flag = false;
};

inline const std::vector<std::string> &commands() {
    static const std::vector<std::string> c = {"sweep",  "mle-compare",    "haar-concentration", "pauli-re",
                                               "min-eig", "coarse-compare", "fisher",             "counts"};
    return c;
}

inline const std::vector<ParamSpec> &param_specs(const std::string &command) {
    static const std::map<std::string, std::vector<ParamSpec>> table = {
        {"sweep",
         {{"n", "4", "qubits"},
          {"ranks", "1..5", "ranks, e.g. 1..5 or 1,3"},
          {"k", "81", "settings per design, e.g. 10..81"},
          {"N", "8100", "total sample budget; m = floor(N / k)"},
          {"states", "10", "random states per rank"},
          {"designs", "10", "random designs per k"},
          {"replacement", "false", "draw settings with replacement", true}}},
        {"mle-compare",
         {{"n", "2", "qubits"},
          {"r", "1", "rank"},
          {"k", "9", "settings per design"},
          {"N", "0", "total budget, used when m is 0"},
          {"m", "100", "repetitions per setting"},
          {"designs", "10", "random designs per k"},
          {"reps", "30", "Monte Carlo replicates per design"},
          {"replacement", "false", "draw settings with replacement", true},
          {"max-iters", "5000", "R rho R iteration cap"},
          {"conv-tol", "1e-10", "Frobenius step tolerance"},
          {"dilution", "1", "R rho R dilution in (0, 1]"}}},
        {"haar-concentration",
         {{"d", "16", "dimension"},
          {"ranks", "1..3", "ranks"},
          {"k", "1,5,10,20,50,100", "bases per design"},
          {"designs", "1", "random designs per k"}}},
        {"pauli-re",
         {{"n", "4", "qubits"},
          {"r", "1", "rank"},
          {"k", "20,81", "settings per design"},
          {"designs", "100", "random designs per k"},
          {"states", "1", "random states"},
          {"replacement", "false", "draw settings with replacement", true}}},
        {"min-eig",
         {{"n", "2..4", "qubit counts"},
          {"ranks", "1..3", "ranks"},
          {"states", "25", "rotated states per (n, r)"},
          {"allow-large", "false", "permit n > 6", true}}},
        {"coarse-compare",
         {{"n", "4", "qubits"},
          {"ranks", "1", "ranks"},
          {"k", "255", "observables per design"},
          {"N", "8100", "total sample budget"},
          {"states", "10", "random states per rank"},
          {"designs", "10", "random designs per k"},
          {"replacement", "false", "draw observables with replacement", true}}},
        {"fisher",
         {{"n", "1", "qubits"},
          {"state-diag", "", "diagonal of the state, e.g. 1,0"},
          {"r", "0", "rank; random state when no diagonal is given"},
          {"settings", "", "Pauli settings, e.g. x,y"},
          {"observables", "", "coarse observables, e.g. z0,xx"},
          {"N", "1", "total samples"},
          {"print-mse", "false", "print Tr(I^-1 G) / N", true}}},
        {"counts",
         {{"n", "1", "qubits"},
          {"state-diag", "", "diagonal of the state"},
          {"r", "0", "rank; random state when no diagonal is given"},
          {"setting", "", "Pauli settings or coarse observables"},
          {"m", "100", "repetitions per setting"}}},
    };
    const auto it = table.find(command);
    if (it == table.end()) throw ConfigError("unknown subcommand '" + command + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// Value parsing
// ---------------------------------------------------------------------------

inline std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    return out;
}

template <typename T>
T parse_number(const std::string &key, const std::string &v) {
    T out{};
    std::istringstream is(v);
    is >> out;
    if (is.fail() || !is.eof()) throw ConfigError("invalid value '" + v + "' for " + key);
    return out;
}

inline bool parse_bool(const std::string &key, const std::string &v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("invalid boolean '" + v + "' for " + key);
}

/// "1..5", "1,3,7", "10..80:10" or a mix separated by commas.
inline std::vector<int> parse_int_list(const std::string &key, const std::string &v) {
    std::vector<int> out;
    for (const auto &part : split(v, ',')) {
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_number<int>(key, part));
            continue;
        }
        std::string hi = part.substr(dots + 2);
        int step = 1;
        if (const auto colon = hi.find(':'); colon != std::string::npos) {
            step = parse_number<int>(key, hi.substr(colon + 1));
            hi = hi.substr(0, colon);
        }
        const int a = parse_number<int>(key, part.substr(0, dots));
        const int b = parse_number<int>(key, hi);
        if (step < 1 || b < a) throw ConfigError("invalid range '" + part + "' for " + key);
        for (int x = a; x <= b; x += step) out.push_back(x);
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

inline std::vector<double> parse_double_list(const std::string &key, const std::string &v) {
    std::vector<double> out;
    for (const auto &part : split(v, ',')) out.push_back(parse_number<double>(key, part));
    return out;
}

class Params {
  public:
    explicit Params(const ParamMap &m) : m_(m) {}
    const std::string &str(const std::string &k) const {
        const auto it = m_.find(k);
        if (it == m_.end()) throw ConfigError("missing parameter " + k);
        return it->second;
    }
    int i(const std::string &k) const { return parse_number<int>(k, str(k)); }
    long long ll(const std::string &k) const { return parse_number<long long>(k, str(k)); }
    double d(const std::string &k) const { return parse_number<double>(k, str(k)); }
    bool b(const std::string &k) const { return parse_bool(k, str(k)); }
    std::vector<int> ints(const std::string &k) const { return parse_int_list(k, str(k)); }

  private:
    const ParamMap &m_;
};

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

inline RunConfig config_from_flat(const std::string &command, const ParamMap &flat) {
    RunConfig c;
    c.command = command;
    const auto &specs = param_specs(command);
    for (const auto &[k, v] : flat) {
        if (k == "seed")
            c.seed = parse_number<std::uint64_t>(k, v);
        else if (k == "output-dir")
            c.output_dir = v;
        else if (k == "workers")
            c.workers = parse_number<int>(k, v);
        else if (k == "timestamp")
            c.timestamp = v;
        else if (std::any_of(specs.begin(), specs.end(), [&](const ParamSpec &s) { return k == s.name; }))
            c.params[k] = v;
        else
            throw ConfigError("unknown key '" + k + "' for " + command);
    }
    return c;
}

inline RunConfig RunConfig::from_json(const nlohmann::json &j) {
    ParamMap flat;
    for (const auto &[k, v] : j.at("config").items()) flat[k] = v.get<std::string>();
    return config_from_flat(j.at("command").get<std::string>(), flat);
}

/// Reads `key=value` text or a manifest. Returns the command named in a
/// manifest (empty for key/value files) and the flat entries.
inline std::pair<std::string, ParamMap> read_config_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    ParamMap flat;
    if (trim(text).rfind('{', 0) == 0) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
        }
        if (!j.contains("config") || !j.contains("command")) throw ConfigError("manifest lacks command or config");
        for (const auto &[k, v] : j.at("config").items()) flat[k] = v.get<std::string>();
        return {j.at("command").get<std::string>(), flat};
    }
    std::istringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        flat[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return {"", flat};
}

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string default_output_dir() {
    const char *env = std::getenv("LRTOMO_OUTPUT_DIR");
    return env && *env ? env : "lrtomo-out";
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

namespace detail {

inline void check_qubits(int n) {
    if (n < 1 || n > 12) throw ConfigError("n must lie in [1, 12]");
}

inline std::filesystem::path prepare_output(const RunConfig &cfg) {
    const std::filesystem::path dir(cfg.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw ConfigError("cannot create output directory '" + cfg.output_dir + "'");
    return dir;
}

inline void write_file(const std::filesystem::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

inline void write_outputs(const RunConfig &cfg, const std::vector<ExperimentRecord> &records, std::ostream &log) {
    const auto dir = prepare_output(cfg);
    std::ostringstream jsonl;
    write_jsonl(records, jsonl);
    write_file(dir / "records.jsonl", jsonl.str());

    std::map<std::string, std::vector<ExperimentRecord>> by_kind;
    for (const auto &r : records) by_kind[r.kind].push_back(r);
    for (const auto &[kind, recs] : by_kind) {
        std::ostringstream csv;
        write_csv(recs, csv);
        write_file(dir / (kind + ".csv"), csv.str());
    }
    write_file(dir / "manifest.json", cfg.to_json().dump(2) + "\n");

    const auto s = summarize(records);
    log << cfg.command << ": " << records.size() << " records (ok " << s.ok << ", non_identifiable "
        << s.non_identifiable << ", failed " << s.failed << ") -> " << (dir / "records.jsonl").string() << '\n';
}

inline DensityMatrix state_from_params(const Params &p, int n, std::uint64_t seed, int &rank) {
    const int d = 1 << n;
    const auto diag_text = p.str("state-diag");
    if (!diag_text.empty()) {
        const auto diag = parse_double_list("state-diag", diag_text);
        if (static_cast<int>(diag.size()) != d) throw ConfigError("state-diag needs 2^n entries");
        rank = p.i("r") > 0 ? p.i("r") : diagonal_rank(diag);
        return diagonal_state(diag);
    }
    rank = p.i("r");
    if (rank < 1 || rank >= d) throw ConfigError("give state-diag, or r with 1 <= r < 2^n");
    return random_rank_r_state(d, rank, lrtomo::detail::state_seed(seed, n, rank, 0));
}

inline Design design_from_labels(int n, const std::vector<std::string> &labels) {
    if (labels.empty()) throw ConfigError("no settings given");
    const bool coarse = std::any_of(labels.begin(), labels.end(),
                                    [](const std::string &l) { return l.find('0') != std::string::npos; });
    return coarse ? coarse_design(n, labels) : pauli_design(n, labels);
}

inline void run_counts(const RunConfig &cfg, std::ostream &out) {
    const Params p(cfg.params);
    const int n = p.i("n");
    check_qubits(n);
    int rank = 0;
    const DensityMatrix rho = state_from_params(p, n, cfg.seed, rank);
    const Design design = design_from_labels(n, split(p.str("setting"), ','));
    const long long m = p.ll("m");
    if (m < 1) throw ConfigError("m must be positive");
    const CountsTable table = sample_counts(rho, design, m, cfg.seed, cfg.workers);
    const auto dir = prepare_output(cfg);
    std::ostringstream csv;
    write_counts_csv(table, csv);
    write_file(dir / "counts.csv", csv.str());
    write_file(dir / "counts.json", counts_sidecar(table).dump(2) + "\n");
    write_file(dir / "manifest.json", cfg.to_json().dump(2) + "\n");
    out << "counts: " << design.size() << " settings x " << m << " repetitions -> " << (dir / "counts.csv").string()
        << '\n';
}

inline std::vector<ExperimentRecord> run_study(const RunConfig &cfg, std::ostream &out) {
    const Params p(cfg.params);
    const auto &c = cfg.command;
    const int w = cfg.workers;
    if (c == "sweep") {
        SweepConfig s;
        s.n = p.i("n");
        check_qubits(s.n);
        s.ranks = p.ints("ranks");
        s.k_grid = p.ints("k");
        s.N = p.ll("N");
        s.states = p.i("states");
        s.designs = p.i("designs");
        s.replacement = p.b("replacement");
        s.seed = cfg.seed;
        return settings_sweep(s, w, cfg.timestamp);
    }
    if (c == "mle-compare") {
        MlCompareConfig s;
        s.n = p.i("n");
        check_qubits(s.n);
        s.r = p.i("r");
        s.k_grid = p.ints("k");
        s.N = p.ll("N");
        s.m = p.ll("m");
        s.designs = p.i("designs");
        s.reps = p.i("reps");
        s.replacement = p.b("replacement");
        s.max_iters = p.i("max-iters");
        s.conv_tol = p.d("conv-tol");
        s.dilution = p.d("dilution");
        s.seed = cfg.seed;
        return ml_vs_fisher(s, w, cfg.timestamp);
    }
    if (c == "haar-concentration") {
        HaarConfig s;
        s.d = p.i("d");
        if (s.d < 2 || s.d > 4096) throw ConfigError("d must lie in [2, 4096]");
        s.ranks = p.ints("ranks");
        s.k_grid = p.ints("k");
        s.designs = p.i("designs");
        s.seed = cfg.seed;
        return haar_concentration(s, w, cfg.timestamp);
    }
    if (c == "pauli-re") {
        PauliReConfig s;
        s.n = p.i("n");
        check_qubits(s.n);
        s.r = p.i("r");
        s.k_grid = p.ints("k");
        s.designs = p.i("designs");
        s.states = p.i("states");
        s.replacement = p.b("replacement");
        s.seed = cfg.seed;
        return pauli_relative_error(s, w, cfg.timestamp);
    }
    if (c == "min-eig") {
        MinEigConfig s;
        s.n_grid = p.ints("n");
        for (int n : s.n_grid) check_qubits(n);
        s.ranks = p.ints("ranks");
        s.states = p.i("states");
        s.allow_large = p.b("allow-large");
        s.seed = cfg.seed;
        return min_eigenvalue_study(s, w, cfg.timestamp);
    }
    if (c == "coarse-compare") {
        CoarseConfig s;
        s.n = p.i("n");
        check_qubits(s.n);
        s.ranks = p.ints("ranks");
        s.k_grid = p.ints("k");
        s.N = p.ll("N");
        s.states = p.i("states");
        s.designs = p.i("designs");
        s.replacement = p.b("replacement");
        s.seed = cfg.seed;
        return coarse_grained_sweep(s, w, cfg.timestamp);
    }
    if (c == "fisher") {
        FisherConfig s;
        s.n = p.i("n");
        check_qubits(s.n);
        if (!p.str("state-diag").empty()) s.diag = parse_double_list("state-diag", p.str("state-diag"));
        s.r = p.i("r");
        const auto settings = split(p.str("settings"), ',');
        const auto observables = split(p.str("observables"), ',');
        if (!settings.empty() && !observables.empty()) throw ConfigError("give settings or observables, not both");
        s.coarse = !observables.empty();
        s.labels = s.coarse ? observables : settings;
        s.N = p.ll("N");
        s.seed = cfg.seed;
        ExperimentRecord rec = fisher_single_shot(s, cfg.timestamp);
        if (p.b("print-mse")) out << format_double(rec.value) << '\n';
        return {rec};
    }
    throw ConfigError("unknown subcommand '" + c + "'");
}

} // namespace detail

/// Executes a resolved configuration. Throws on configuration errors.
inline void execute(const RunConfig &cfg, std::ostream &out) {
    if (cfg.workers < 1) throw ConfigError("workers must be positive");
    if (cfg.output_dir.empty()) throw ConfigError("output directory is empty");
    if (cfg.command == "counts") {
        detail::run_counts(cfg, out);
        return;
    }
    const auto records = detail::run_study(cfg, out);
    detail::write_outputs(cfg, records, out);
}

/// Thrown by parse_args when CLI11 has handled the arguments itself (help,
/// version or a parse error); carries the exit status.
struct ExitRequest {
    int code;
};

/// Parses argv into a RunConfig (flags > config file > defaults).
inline RunConfig parse_args(const std::vector<std::string> &args, std::ostream &out = std::cout,
                            std::ostream &err = std::cerr) {
    CLI::App app{"Low-rank tomography design toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    struct Slots {
        ParamMap values;
        std::map<std::string, bool> flags;
        std::map<std::string, CLI::Option *> options;
        std::string config_path;
    };
    std::map<std::string, Slots> slots;
    for (const auto &name : commands()) slots[name];

    for (const auto &name : commands()) {
        auto *sub = app.add_subcommand(name);
        auto &s = slots[name];
        for (const auto &spec : param_specs(name)) {
            if (spec.is_flag)
                s.options[spec.name] = sub->add_flag(std::string("--") + spec.name, s.flags[spec.name], spec.help);
            else
                s.options[spec.name] = sub->add_option(std::string("--") + spec.name, s.values[spec.name], spec.help);
        }
        s.options["seed"] = sub->add_option("--seed", s.values["seed"], "master seed");
        s.options["workers"] = sub->add_option("--workers", s.values["workers"], "worker threads");
        s.options["output-dir"] = sub->add_option("--output-dir", s.values["output-dir"], "output directory");
        s.options["timestamp"] = sub->add_option("--timestamp", s.values["timestamp"], "timestamp stamped on records");
        sub->add_option("--config", s.config_path, "key=value file or manifest.json");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError &e) {
        throw ExitRequest{app.exit(e, out, err)};
    }

    std::string command;
    for (const auto *sub : app.get_subcommands()) command = sub->get_name();
    auto &s = slots[command];

    ParamMap flat;
    for (const auto &spec : param_specs(command)) flat[spec.name] = spec.default_value;
    flat["seed"] = "42";
    flat["workers"] = std::to_string(default_workers());
    flat["output-dir"] = default_output_dir();
    flat["timestamp"] = utc_now();

    if (!s.config_path.empty()) {
        const auto [file_command, entries] = read_config_file(s.config_path);
        if (!file_command.empty() && file_command != command)
            throw ConfigError("manifest is for '" + file_command + "', not '" + command + "'");
        for (const auto &[k, v] : entries) flat[k] = v;
    }
    for (const auto &[k, opt] : s.options) {
        if (opt->count() == 0) continue;
        const auto fit = s.flags.find(k);
        flat[k] = fit != s.flags.end() ? (fit->second ? "true" : "false") : s.values[k];
    }
    return config_from_flat(command, flat);
}

/// Full driver: returns the process exit status.
inline int run(const std::vector<std::string> &args, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    try {
        execute(parse_args(args, out, err), out);
        return 0;
    } catch (const ExitRequest &e) {
        return e.code;
    } catch (const Error &e) {
        err << "lrtomo: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        err << "lrtomo: " << e.what() << '\n';
        return 1;
    }
}

inline int run(int argc, char **argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace lrtomo::cli
