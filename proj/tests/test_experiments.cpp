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

#include "lrtomo/experiments.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <map>
#include <sstream>

namespace lrtomo {
namespace {

SweepConfig small_sweep() {
    SweepConfig c;
    c.n = 2;
    c.ranks = {1, 2};
    c.k_grid = {1, 3, 9};
    c.states = 2;
    c.designs = 3;
    c.N = 900;
    return c;
}

MlCompareConfig small_ml() {
    MlCompareConfig c;
    c.n = 1;
    c.k_grid = {2, 3};
    c.designs = 2;
    c.m = 200;
    c.reps = 4;
    return c;
}

HaarConfig small_haar() {
    HaarConfig c;
    c.d = 4;
    c.ranks = {1, 2};
    c.k_grid = {2, 8};
    c.designs = 2;
    return c;
}

PauliReConfig small_pauli_re() {
    PauliReConfig c;
    c.n = 2;
    c.k_grid = {4, 9};
    c.designs = 3;
    c.states = 2;
    return c;
}

MinEigConfig small_min_eig() {
    MinEigConfig c;
    c.n_grid = {1, 2};
    c.ranks = {1};
    c.states = 3;
    return c;
}

CoarseConfig small_coarse() {
    CoarseConfig c;
    c.n = 2;
    c.k_grid = {3, 15};
    c.states = 2;
    c.designs = 2;
    c.N = 900;
    return c;
}

bool same_bits(double a, double b) {
    if (std::isnan(a) && std::isnan(b)) return true;
    return std::memcmp(&a, &b, sizeof a) == 0;
}

std::string jsonl(const std::vector<ExperimentRecord> &r) {
    std::ostringstream os;
    write_jsonl(r, os);
    return os.str();
}

std::string csv(const std::vector<ExperimentRecord> &r) {
    std::ostringstream os;
    write_csv(r, os);
    return os.str();
}

TEST(Studies, GridCardinality) {
    EXPECT_EQ(settings_sweep(small_sweep()).size(), 2u * 2u * 3u * 3u);
    EXPECT_EQ(ml_vs_fisher(small_ml()).size(), 2u * 2u);
    EXPECT_EQ(haar_concentration(small_haar()).size(), 2u * 2u * 2u);
    EXPECT_EQ(pauli_relative_error(small_pauli_re()).size(), 2u * 2u * 3u);
    EXPECT_EQ(min_eigenvalue_study(small_min_eig()).size(), 2u * 3u);
    // one full-design fine record per (rank, state) plus the coarse grid
    EXPECT_EQ(coarse_grained_sweep(small_coarse()).size(), 2u * (1u + 2u * 2u));
}

TEST(Studies, RecordsReplayBitExactly) {
    std::vector<ExperimentRecord> all;
    for (auto part : {settings_sweep(small_sweep()), ml_vs_fisher(small_ml()), haar_concentration(small_haar()),
                      pauli_relative_error(small_pauli_re()), min_eigenvalue_study(small_min_eig()),
                      coarse_grained_sweep(small_coarse())})
        all.insert(all.end(), part.begin(), part.end());
    FisherConfig fc;
    fc.n = 2;
    fc.diag = {0.7, 0.3, 0, 0};
    fc.labels = {"xx", "yz", "zy", "zz", "xy"};
    fc.N = 100;
    all.push_back(fisher_single_shot(fc));
    std::map<std::string, int> kinds;
    for (const auto &rec : all) {
        if (rec.status == status::kFailed) continue;
        kinds[rec.kind] += 1;
        EXPECT_TRUE(same_bits(replay_record(rec), rec.value)) << record_to_json(rec).dump();
    }
    EXPECT_EQ(kinds.size(), 7u);
}

TEST(Studies, ReplayWorksFromSerializedRecords) {
    for (const auto &rec : settings_sweep(small_sweep())) {
        const auto back = record_from_json(nlohmann::json::parse(record_to_json(rec).dump()));
        EXPECT_TRUE(same_bits(replay_record(back), rec.value));
    }
}

TEST(Studies, OutputIndependentOfWorkerCount) {
    EXPECT_EQ(jsonl(settings_sweep(small_sweep(), 1, "t")), jsonl(settings_sweep(small_sweep(), 4, "t")));
    EXPECT_EQ(csv(settings_sweep(small_sweep(), 1, "t")), csv(settings_sweep(small_sweep(), 3, "t")));
    EXPECT_EQ(jsonl(ml_vs_fisher(small_ml(), 1)), jsonl(ml_vs_fisher(small_ml(), 4)));
    EXPECT_EQ(jsonl(haar_concentration(small_haar(), 1)), jsonl(haar_concentration(small_haar(), 4)));
    EXPECT_EQ(jsonl(pauli_relative_error(small_pauli_re(), 1)), jsonl(pauli_relative_error(small_pauli_re(), 4)));
    EXPECT_EQ(jsonl(min_eigenvalue_study(small_min_eig(), 1)), jsonl(min_eigenvalue_study(small_min_eig(), 4)));
    EXPECT_EQ(jsonl(coarse_grained_sweep(small_coarse(), 1)), jsonl(coarse_grained_sweep(small_coarse(), 4)));
}

TEST(Studies, SeedChangesResults) {
    auto a = small_sweep();
    auto b = small_sweep();
    b.seed = 43;
    EXPECT_NE(jsonl(settings_sweep(a)), jsonl(settings_sweep(b)));
}

TEST(Studies, TimestampIsStamped) {
    for (const auto &rec : haar_concentration(small_haar(), 1, "2026-01-01T00:00:00Z"))
        EXPECT_EQ(rec.timestamp, "2026-01-01T00:00:00Z");
}

TEST(Studies, BudgetSplitsIntoWholeRepetitions) {
    auto cfg = small_sweep();
    cfg.N = 1000;
    for (const auto &rec : settings_sweep(cfg)) {
        EXPECT_EQ(rec.m, 1000 / rec.k);
        EXPECT_EQ(rec.N, rec.m * rec.k);
        EXPECT_EQ(rec.aux.at("N_budget").get<long long>(), 1000);
    }
    cfg.N = 2;
    std::size_t failed = 0;
    for (const auto &rec : settings_sweep(cfg)) {
        if (rec.k > 2) {
            EXPECT_EQ(rec.status, status::kFailed);
            EXPECT_TRUE(std::isnan(rec.value));
            ++failed;
        }
    }
    EXPECT_GT(failed, 0u);
}

TEST(Studies, UnderdeterminedDesignsAreMarked) {
    const auto records = settings_sweep(small_sweep());
    std::size_t marked = 0;
    for (const auto &rec : records) {
        if (rec.k == 1) {
            EXPECT_EQ(rec.status, status::kNonIdentifiable);
            EXPECT_TRUE(std::isnan(rec.value));
            EXPECT_TRUE(record_to_json(rec).at("value").is_null());
            ++marked;
        } else {
            EXPECT_TRUE(std::isfinite(rec.value) || rec.status != status::kOk);
        }
    }
    EXPECT_EQ(marked, 2u * 2u * 3u);
    const auto s = summarize(records);
    EXPECT_EQ(s.ok + s.non_identifiable + s.failed, records.size());
    // three settings cannot pin down the 11 rank-2 parameters either
    EXPECT_GE(s.non_identifiable, marked);
}

TEST(Studies, FullDesignWithoutReplacementIsUnique) {
    const auto records = pauli_relative_error(small_pauli_re());
    std::map<int, std::vector<double>> by_state;
    for (const auto &rec : records) {
        if (rec.k != 9) continue;
        EXPECT_NEAR(rec.value, 1.0, 1e-12);
        by_state[rec.state_index].push_back(rec.value);
    }
    for (const auto &[i, v] : by_state)
        for (double x : v) EXPECT_TRUE(same_bits(x, v.front()));
}

TEST(Studies, FullDesignBeatsAverageReducedDesign) {
    SweepConfig cfg;
    cfg.n = 2;
    cfg.ranks = {1, 2};
    cfg.k_grid = {6, 9};
    cfg.states = 3;
    cfg.designs = 30;
    cfg.N = 9000;
    std::map<std::pair<int, int>, double> full;
    std::map<std::pair<int, int>, std::pair<double, int>> reduced;
    for (const auto &rec : settings_sweep(cfg)) {
        const auto key = std::make_pair(rec.r, rec.state_index);
        if (rec.k == 9) {
            full[key] = rec.value;
        } else if (rec.status == status::kOk) {
            reduced[key].first += rec.value;
            reduced[key].second += 1;
        }
    }
    ASSERT_EQ(full.size(), 6u);
    for (const auto &[key, v] : full) {
        ASSERT_GT(reduced[key].second, 0);
        EXPECT_LE(v, reduced[key].first / reduced[key].second);
    }
}

TEST(Studies, CoarseEqualsFineForOneQubit) {
    CoarseConfig cfg;
    cfg.n = 1;
    cfg.k_grid = {3};
    cfg.states = 3;
    cfg.designs = 2;
    cfg.N = 900;
    std::map<int, double> fine;
    for (const auto &rec : coarse_grained_sweep(cfg))
        if (rec.metric == "fine_full_mse") fine[rec.state_index] = rec.value;
    ASSERT_EQ(fine.size(), 3u);
    for (const auto &rec : coarse_grained_sweep(cfg)) {
        if (rec.metric == "fine_full_mse") continue;
        EXPECT_NEAR(rec.value, fine[rec.state_index], 1e-12 * fine[rec.state_index]);
    }
}

TEST(Studies, MinEigenvalueRespectsQubitBound) {
    MinEigConfig cfg;
    cfg.n_grid = {1};
    cfg.ranks = {1};
    cfg.states = 10;
    for (const auto &rec : min_eigenvalue_study(cfg)) {
        EXPECT_GE(rec.value, 2.0 / 3.0 - 1e-12);
        EXPECT_LE(rec.value, rec.aux.at("max_eigenvalue").get<double>());
    }
    const auto chart = equal_eigenvalue_chart(2, 1);
    const Whitened w = whiten(fisher_design(chart, full_pauli_design(1)), weight_matrix(chart));
    EXPECT_NEAR(w.min_eig(), 2.0 / 3.0, 1e-12);
}

TEST(Studies, LargeSystemsNeedOptIn) {
    MinEigConfig cfg;
    cfg.n_grid = {7};
    cfg.ranks = {1};
    cfg.states = 1;
    EXPECT_THROW(min_eigenvalue_study(cfg), InvalidArgument);
}

TEST(Studies, InvalidGridsAreRejected) {
    auto s = small_sweep();
    s.ranks = {4};
    EXPECT_THROW(settings_sweep(s), InvalidRank);
    s = small_sweep();
    s.k_grid = {10};
    EXPECT_THROW(settings_sweep(s), InvalidArgument);
    s = small_sweep();
    s.designs = 0;
    EXPECT_THROW(settings_sweep(s), InvalidArgument);
}

TEST(Studies, MlRecordCarriesDiagnostics) {
    for (const auto &rec : ml_vs_fisher(small_ml())) {
        if (rec.status != status::kOk) continue;
        EXPECT_EQ(rec.metric, "ml_relative_error");
        EXPECT_EQ(rec.aux.at("reps").get<int>(), 4);
        EXPECT_EQ(rec.N, rec.m * rec.k);
        EXPECT_TRUE(rec.aux.contains("predicted_mse"));
        EXPECT_TRUE(rec.aux.contains("mc_mean"));
        EXPECT_GE(rec.value, 0.0);
    }
}

TEST(FisherRecord, SingleShotExamples) {
    FisherConfig cfg;
    cfg.n = 1;
    cfg.diag = {1, 0};
    cfg.labels = {"x", "y"};
    cfg.N = 1;
    EXPECT_NEAR(fisher_single_shot(cfg).value, 2.0, 1e-12);
    cfg.labels = {"x", "y", "z"};
    cfg.N = 100;
    EXPECT_NEAR(fisher_single_shot(cfg).value, 3.0 / 100.0, 1e-14);
    cfg.labels = {"z"};
    EXPECT_EQ(fisher_single_shot(cfg).status, status::kNonIdentifiable);
}

TEST(Serialization, JsonRoundTrip) {
    auto records = coarse_grained_sweep(small_coarse(), 1, "2026-10-15T00:00:00Z");
    records.front().aux["note"] = "a,b \"quoted\"";
    for (const auto &rec : records) {
        const auto back = record_from_json(nlohmann::json::parse(record_to_json(rec).dump()));
        EXPECT_EQ(record_to_json(back).dump(), record_to_json(rec).dump());
        EXPECT_TRUE(same_bits(back.value, rec.value));
    }
}

TEST(Serialization, CsvLayout) {
    const auto records = settings_sweep(small_sweep(), 1, "ts");
    const std::string text = csv(records);
    std::istringstream in(text);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "kind,n,d,r,state_index,state_seed,design_kind,k,design_index,design_seed,replacement,N,m,"
                      "metric,value,status,version,timestamp,aux");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    EXPECT_EQ(lines, records.size());
    EXPECT_EQ(format_double(std::nan("")), "");
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(csv_quote("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_quote("say \"hi\""), "\"say \"\"hi\"\"\"");
}

} // namespace
} // namespace lrtomo
