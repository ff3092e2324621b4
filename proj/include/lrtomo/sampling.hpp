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

#pragma once

#include "lrtomo/core.hpp"
#include "lrtomo/designs.hpp"
#include "lrtomo/states.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace lrtomo {

/// Outcome counts N(o|s) from m repetitions of every setting of a design.
struct CountsTable {
    Design design;
    long long m = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<long long>> counts; ///< [setting][outcome]

    long long total() const noexcept { return m * static_cast<long long>(counts.size()); }
    bool operator==(const CountsTable &) const = default;
};

/// Draws one multinomial(m, p) vector by sequential conditional binomials.
inline std::vector<long long> sample_multinomial(long long m, const RVector &p, Rng &rng) {
    std::vector<long long> out(static_cast<std::size_t>(p.size()), 0);
    long long remaining = m;
    double mass = p.sum();
    for (Eigen::Index o = 0; o < p.size() && remaining > 0; ++o) {
        if (o + 1 == p.size()) {
            out[static_cast<std::size_t>(o)] = remaining;
            break;
        }
        const double q = mass > 0.0 ? std::clamp(p(o) / mass, 0.0, 1.0) : 0.0;
        std::binomial_distribution<long long> binom(remaining, q);
        const long long c = q > 0.0 ? binom(rng) : 0;
        out[static_cast<std::size_t>(o)] = c;
        remaining -= c;
        mass -= p(o);
    }
    return out;
}

/// Independent multinomial counts per setting. Setting i draws from the
/// sub-stream (seed, i), so results do not depend on `workers`.
inline CountsTable sample_counts(const DensityMatrix &rho, const Design &design, long long m, std::uint64_t seed,
                                 int workers = 1) {
    if (m < 1) throw InvalidArgument("repetitions per setting must be positive");
    if (design.dim != rho.dim()) throw DimensionMismatch("design and state dimensions differ");
    CountsTable table{design, m, seed, std::vector<std::vector<long long>>(design.size())};
    parallel_for(design.size(), workers, [&](std::size_t i) {
        RVector p = state_probabilities(rho.matrix(), design.settings[i]);
        const double total = p.sum();
        if (!std::isfinite(total) || std::abs(total - 1.0) > 1e-9)
            throw InvalidState("outcome probabilities do not sum to one");
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
        table.counts[i] = sample_multinomial(m, p, rng);
    });
    return table;
}

/// Counts equal to m * p(o|s), for noise-free checks. Probabilities must make
/// these integers up to 1e-9.
inline CountsTable expected_counts(const DensityMatrix &rho, const Design &design, long long m) {
    CountsTable table{design, m, 0, {}};
    for (const auto &s : design.settings) {
        RVector p = state_probabilities(rho.matrix(), s);
        std::vector<long long> row;
        for (Eigen::Index o = 0; o < p.size(); ++o) {
            const double x = p(o) * static_cast<double>(m);
            if (std::abs(x - std::round(x)) > 1e-9) throw InvalidArgument("m * p is not an integer");
            row.push_back(std::llround(x));
        }
        table.counts.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Files: CSV (setting_index,outcome_index,count) plus a JSON sidecar.
// ---------------------------------------------------------------------------

inline void write_counts_csv(const CountsTable &t, std::ostream &os) {
    os << "setting_index,outcome_index,count\n";
    for (std::size_t s = 0; s < t.counts.size(); ++s)
        for (std::size_t o = 0; o < t.counts[s].size(); ++o) os << s << ',' << o << ',' << t.counts[s][o] << '\n';
}

inline nlohmann::json counts_sidecar(const CountsTable &t) {
    return {{"design", design_to_json(t.design)}, {"m", t.m}, {"seed", t.seed}};
}

inline CountsTable read_counts(std::istream &csv, const nlohmann::json &sidecar) {
    CountsTable t;
    t.design = design_from_json(sidecar.at("design"));
    t.m = sidecar.at("m").get<long long>();
    t.seed = sidecar.at("seed").get<std::uint64_t>();
    t.counts.resize(t.design.size());
    for (std::size_t s = 0; s < t.design.size(); ++s)
        t.counts[s].assign(static_cast<std::size_t>(t.design.settings[s].num_outcomes(t.design.dim)), 0);

    std::string line;
    if (!std::getline(csv, line) || line != "setting_index,outcome_index,count")
        throw InvalidArgument("counts CSV has an unexpected header");
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::size_t s = 0, o = 0;
        long long c = 0;
        char c1 = 0, c2 = 0;
        if (!(row >> s >> c1 >> o >> c2 >> c) || c1 != ',' || c2 != ',')
            throw InvalidArgument("malformed counts row '" + line + "'");
        if (s >= t.counts.size() || o >= t.counts[s].size()) throw InvalidArgument("counts row out of range");
        t.counts[s][o] = c;
    }
    for (const auto &row : t.counts) {
        long long sum = 0;
        for (auto c : row) sum += c;
        if (sum != t.m) throw InvalidArgument("setting counts do not sum to m");
    }
    return t;
}

} // namespace lrtomo
