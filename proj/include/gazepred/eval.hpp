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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazepred/config.hpp"
#include "gazepred/types.hpp"

namespace gazepred {

struct MaeScores {
  Targets per_attribute{};
  double overall = 0.0;  // unweighted mean of the four attribute MAEs
};

// Throws std::invalid_argument on empty or mismatched inputs.
MaeScores mae(std::span<const Targets> preds, std::span<const Targets> golds);

// Mean of the four attribute MAEs.
double overall_from_attributes(const Targets& per_attribute);

struct RunResult {
  RunConfig config;
  std::uint64_t seed = 0;
  Targets mae{};
  double mae_overall = 0.0;
  double wall_time = 0.0;  // seconds; kept out of the results file
  std::optional<std::string> error;

  [[nodiscard]] std::string name() const { return config.name(); }
  [[nodiscard]] bool ok() const { return !error.has_value(); }
};

inline constexpr int kResultSchemaVersion = 1;

// One canonical JSON object per line; wall_time excluded so reruns compare
// byte for byte.
nlohmann::json to_json(const RunResult& r);
RunResult run_result_from_json(const nlohmann::json& j);
std::string to_jsonl(std::span<const RunResult> results);
std::vector<RunResult> parse_jsonl(std::string_view text);
std::vector<RunResult> read_jsonl(const std::string& path);

enum class Axis { Context, Family, Regime, Pooling, Augmentation };

inline constexpr std::array<Axis, 5> kAllAxes = {Axis::Context, Axis::Family, Axis::Regime,
                                                 Axis::Pooling, Axis::Augmentation};

std::string_view to_string(Axis axis);
// Accepts "context", "family", "regime", "pooling", "augmentation".
Axis axis_from_string(std::string_view name);
std::string axis_value(const RunResult& r, Axis axis);
// Group labels in display order, e.g. {"first", "mean", "sum"}.
std::vector<std::string> axis_values(Axis axis);

struct GroupSummary {
  std::string key;
  std::size_t count = 0;
  Targets mean{};
  Targets variance{};  // population variance
  double mean_overall = 0.0;
  double variance_overall = 0.0;
};

// Population (divide-by-N) statistics of members' MAE scores.
GroupSummary summarize(std::string key, std::span<const RunResult> members);

// Partitions results by one grid axis. Failed runs are skipped.
std::vector<GroupSummary> summarize_group(std::span<const RunResult> results, Axis axis);

// Ascending by mae_overall; ties by config name. Failed runs are skipped.
std::vector<RunResult> rank(std::span<const RunResult> results, std::size_t k);

}  // namespace gazepred
