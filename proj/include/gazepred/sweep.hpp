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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazepred/config.hpp"
#include "gazepred/corpus.hpp"
#include "gazepred/eval.hpp"
#include "gazepred/regress.hpp"

namespace gazepred {

inline constexpr std::string_view kVersion = "gazepred 0.1.0";

// Cartesian product of context x family x regime x pooling x augmentation,
// sorted by run name. Every entry shares the base hyperparameters.
std::vector<RunConfig> enumerate_grid(const TrainConfig& base, const EncoderConfig& encoder);

// The config actually trained for one grid cell: train and encoder seeds
// derived from (global seed, run name).
RunConfig seeded_config(const RunConfig& config, std::uint64_t global_seed);

// Trains config on data.train (data.dev for logging) and scores data.test.
// Errors propagate.
RunResult train_and_evaluate(const RunConfig& config, const DataBundle& data,
                             TrainedModel* model_out = nullptr);

struct SweepOptions {
  std::size_t parallelism = 1;
  std::uint64_t global_seed = 0;
  // Replaces train_and_evaluate, mostly for tests.
  std::function<RunResult(const RunConfig&, const DataBundle&)> runner;
  // Called from worker threads, serialized by the sweep.
  std::function<void(const RunResult&)> on_result;
  // When set, every trained model is saved as <dir>/<name>.model.
  std::filesystem::path model_dir;
};

// Runs every config independently. A failing run yields a result carrying
// its error; the sweep throws only when every run failed. Results are sorted
// by name and do not depend on parallelism.
std::vector<RunResult> run_sweep(std::span<const RunConfig> grid, const DataBundle& data,
                                 const SweepOptions& options);

// SHA-256 over the canonical CSV form of the three splits.
std::string data_fingerprint(const DataBundle& data);

struct ReportMetadata {
  std::string global_seed = "unknown";
  std::string data_fingerprint = "unknown";
  std::string code_version = std::string(kVersion);

  friend bool operator==(const ReportMetadata&, const ReportMetadata&) = default;
};

// All tables are derived from `results`; nothing else is stored.
struct SweepReport {
  ReportMetadata metadata;
  std::vector<RunResult> results;

  std::vector<RunResult> top;
  GroupSummary population;
  std::vector<GroupSummary> context_family;
  std::vector<std::pair<Axis, std::vector<GroupSummary>>> axes;
  std::vector<std::pair<std::string, std::vector<RunResult>>> group_top;  // best 5 per axis value
  std::vector<RunResult> failed;

  [[nodiscard]] std::string markdown() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static SweepReport from_json(const nlohmann::json& j);
};

// Throws std::invalid_argument when results is empty or every run failed.
SweepReport build_report(std::span<const RunResult> results, const ReportMetadata& metadata = {});

}  // namespace gazepred
