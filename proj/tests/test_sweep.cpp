/*
 * Copyright 2026 The gazepred Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "gazepred/sweep.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gazepred/errors.hpp"
#include "gazepred/random.hpp"

namespace gazepred {
namespace {

std::vector<RunConfig> default_grid() { return enumerate_grid(TrainConfig{}, EncoderConfig{}); }

TEST(Grid, CountsAndNames) {
  const auto g = default_grid();
  ASSERT_EQ(g.size(), 48u);
  std::set<std::string> names;
  std::size_t augmented = 0;
  std::map<Pooling, std::size_t> per_pool;
  for (const RunConfig& c : g) {
    names.insert(c.name());
    augmented += c.augmented ? 1 : 0;
    ++per_pool[c.pooling];
  }
  EXPECT_EQ(names.size(), 48u);
  EXPECT_EQ(augmented, 24u);
  for (Pooling p : {Pooling::First, Pooling::Mean, Pooling::Sum}) EXPECT_EQ(per_pool[p], 16u);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end(), [](const RunConfig& a, const RunConfig& b) {
    return a.name() < b.name();
  }));
  EXPECT_TRUE(names.contains("bert_sys2_augmented_sum_classifier"));
  EXPECT_TRUE(names.contains("xlm_sys1_unaugmented_first_whole"));
}

TEST(Grid, NameIsPureFunctionOfAxes) {
  for (const RunConfig& c : default_grid()) {
    RunConfig other = c;
    other.train.learning_rate = 0.5;
    other.train.seed = 99;
    other.encoder.seed = 7;
    other.encoder.d_model = 32;
    EXPECT_EQ(other.name(), c.name());
  }
}

TEST(Grid, InvalidBaseIsRejected) {
  TrainConfig t;
  t.epochs = 0;
  EXPECT_THROW(enumerate_grid(t, EncoderConfig{}), ConfigError);
}

TEST(Config, JsonRoundTripAndStrictKeys) {
  for (const RunConfig& c : default_grid()) {
    RunConfig seeded = seeded_config(c, 77);
    EXPECT_EQ(run_config_from_json(to_json(seeded)), seeded);
  }
  nlohmann::json j = to_json(default_grid()[0]);
  j["colour"] = "red";
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(default_grid()[0]);
  j["name"] = "xlm_sys1_augmented_first_classifier";
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(default_grid()[0]);
  j["train"]["epochs"] = 0;
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  // Missing keys take defaults.
  const RunConfig d = run_config_from_json(nlohmann::json::object());
  EXPECT_EQ(d, RunConfig{});
  const BaseConfig b = base_config_from_json(nlohmann::json::parse(R"({"train": {"epochs": 3}})"));
  EXPECT_EQ(b.train.epochs, 3u);
  EXPECT_EQ(b.encoder, EncoderConfig{});
}

TEST(SeededConfig, DependsOnlyOnSeedAndName) {
  const auto g = default_grid();
  std::set<std::uint64_t> seeds;
  for (const RunConfig& c : g) {
    const RunConfig a = seeded_config(c, 1);
    EXPECT_EQ(a, seeded_config(c, 1));
    EXPECT_NE(a.train.seed, seeded_config(c, 2).train.seed);
    seeds.insert(a.train.seed);
  }
  EXPECT_EQ(seeds.size(), 48u);
}

RunResult fake_runner(const RunConfig& c, const DataBundle&) {
  Rng rng(c.train.seed);
  RunResult r;
  r.config = c;
  r.seed = c.train.seed;
  for (double& v : r.mae) v = rng.uniform(3, 9);
  r.mae_overall = (r.mae[0] + r.mae[1] + r.mae[2] + r.mae[3]) / 4.0;
  r.wall_time = rng.uniform();
  return r;
}

TEST(RunSweep, ParallelismDoesNotChangeResults) {
  const auto g = default_grid();
  SweepOptions o;
  o.global_seed = 5;
  o.runner = fake_runner;
  o.parallelism = 1;
  const std::string one = to_jsonl(run_sweep(g, DataBundle{}, o));
  o.parallelism = 4;
  const std::string four = to_jsonl(run_sweep(g, DataBundle{}, o));
  EXPECT_EQ(one, four);
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 48);
}

TEST(RunSweep, FailingRunIsIsolated) {
  const auto g = default_grid();
  const std::string victim = "xlm_sys2_augmented_mean_whole";
  SweepOptions o;
  o.parallelism = 3;
  o.runner = [&](const RunConfig& c, const DataBundle& d) {
    if (c.name() == victim) throw NumericalError("non-finite training loss in epoch 1 batch 0");
    return fake_runner(c, d);
  };
  std::size_t callbacks = 0;
  o.on_result = [&](const RunResult&) { ++callbacks; };
  const auto results = run_sweep(g, DataBundle{}, o);
  EXPECT_EQ(callbacks, 48u);
  ASSERT_EQ(results.size(), 48u);
  std::size_t failed = 0;
  for (const RunResult& r : results) {
    if (!r.ok()) {
      ++failed;
      EXPECT_EQ(r.name(), victim);
      EXPECT_NE(r.error->find("epoch 1"), std::string::npos);
    }
  }
  EXPECT_EQ(failed, 1u);
  const SweepReport report = build_report(results);
  EXPECT_EQ(report.failed.size(), 1u);
  EXPECT_EQ(report.population.count, 47u);
  EXPECT_NE(report.markdown().find(victim), std::string::npos);
}

TEST(RunSweep, AllFailedThrows) {
  const auto g = default_grid();
  SweepOptions o;
  o.runner = [](const RunConfig&, const DataBundle&) -> RunResult { throw std::runtime_error("no"); };
  EXPECT_THROW(run_sweep(g, DataBundle{}, o), Error);
  o.parallelism = 0;
  EXPECT_THROW(run_sweep(g, DataBundle{}, o), ConfigError);
}

std::vector<RunResult> synthetic_results(std::uint64_t seed) {
  SweepOptions o;
  o.global_seed = seed;
  o.runner = fake_runner;
  return run_sweep(default_grid(), DataBundle{}, o);
}

TEST(Report, TopTenMatchesSortOracle) {
  const auto results = synthetic_results(3);
  const SweepReport report = build_report(results);
  std::vector<RunResult> oracle = results;
  std::sort(oracle.begin(), oracle.end(),
            [](const RunResult& a, const RunResult& b) { return a.mae_overall < b.mae_overall; });
  ASSERT_EQ(report.top.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(report.top[i].name(), oracle[i].name());
  const std::string md = report.markdown();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::size_t at = md.find("| " + oracle[i].name() + " |", pos);
    ASSERT_NE(at, std::string::npos) << oracle[i].name();
    pos = at;
  }
}

TEST(Report, LayoutAndPopulationTable) {
  const auto results = synthetic_results(4);
  const SweepReport report = build_report(results);
  const std::string md = report.markdown();
  EXPECT_NE(md.find("| Statistic | FFD_Avg | FFD_Std | TRT_Avg | TRT_Std |"), std::string::npos);
  for (const char* key : {"Sys1_BERT", "Sys1_XLM", "Sys2_BERT", "Sys2_XLM"}) {
    EXPECT_NE(md.find(key), std::string::npos) << key;
  }
  EXPECT_EQ(report.population.count, 48u);
  EXPECT_EQ(report.axes.size(), 5u);
  EXPECT_EQ(report.context_family.size(), 4u);
  for (const auto& [label, top] : report.group_top) EXPECT_LE(top.size(), 5u);
  EXPECT_NE(md.find("population variances"), std::string::npos);
}

TEST(Report, JsonReloadRendersIdenticalMarkdown) {
  const auto results = synthetic_results(5);
  ReportMetadata meta;
  meta.global_seed = "5";
  meta.data_fingerprint = "abc";
  const SweepReport report = build_report(results, meta);
  const nlohmann::json j = report.to_json();
  const SweepReport back = SweepReport::from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.markdown(), report.markdown());
  EXPECT_EQ(back.metadata, meta);
  EXPECT_EQ(back.to_json(), j);
}

TEST(Report, EmptyInputRejected) {
  EXPECT_THROW(build_report(std::vector<RunResult>{}), std::invalid_argument);
}

TEST(RunSweep, RealTrainingIsReproducible) {
  const std::vector<std::string> langs = {"en"};
  const FixtureSplits f = generate_fixture(31, 8, langs);
  const DataBundle data{f.train, f.dev, f.test};
  TrainConfig t;
  t.epochs = 1;
  EncoderConfig e;
  e.d_model = 8;
  e.n_heads = 2;
  e.n_layers = 1;
  e.vocab_size = 96;
  auto g = enumerate_grid(t, e);
  // A slice covering both regimes, both contexts and every pooling.
  std::vector<RunConfig> slice;
  for (const RunConfig& c : g) {
    if (c.family() == Family::B && c.augmented) slice.push_back(c);
  }
  SweepOptions o;
  o.global_seed = 9;
  o.parallelism = 1;
  const std::string a = to_jsonl(run_sweep(slice, data, o));
  o.parallelism = 3;
  const std::string b = to_jsonl(run_sweep(slice, data, o));
  EXPECT_EQ(a, b);
  for (const RunResult& r : parse_jsonl(a)) {
    EXPECT_TRUE(r.ok()) << *r.error;
    EXPECT_LE(std::abs(r.mae_overall - overall_from_attributes(r.mae)), 1e-12);
  }
}

TEST(DataFingerprint, SensitiveToContent) {
  const std::vector<std::string> langs = {"en"};
  const FixtureSplits f = generate_fixture(1, 8, langs);
  const FixtureSplits g = generate_fixture(2, 8, langs);
  const DataBundle a{f.train, f.dev, f.test};
  const DataBundle b{g.train, g.dev, g.test};
  EXPECT_EQ(data_fingerprint(a), data_fingerprint(a));
  EXPECT_NE(data_fingerprint(a), data_fingerprint(b));
  EXPECT_EQ(data_fingerprint(a).size(), 64u);
}

}  // namespace
}  // namespace gazepred
