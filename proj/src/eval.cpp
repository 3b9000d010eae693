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

#include "gazepred/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "gazepred/errors.hpp"

namespace gazepred {

using nlohmann::json;

MaeScores mae(std::span<const Targets> preds, std::span<const Targets> golds) {
  if (preds.empty()) throw std::invalid_argument("mae: no predictions");
  if (preds.size() != golds.size()) {
    throw std::invalid_argument(
        fmt::format("mae: {} predictions for {} gold rows", preds.size(), golds.size()));
  }
  MaeScores s;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t k = 0; k < kNumTargets; ++k) s.per_attribute[k] += std::abs(preds[i][k] - golds[i][k]);
  }
  for (double& v : s.per_attribute) v /= static_cast<double>(preds.size());
  s.overall = overall_from_attributes(s.per_attribute);
  return s;
}

double overall_from_attributes(const Targets& a) { return (a[0] + a[1] + a[2] + a[3]) / 4.0; }

// ---------------------------------------------------------------------------
// JSON lines

json to_json(const RunResult& r) {
  json mae_obj = json::object();
  for (std::size_t k = 0; k < kNumTargets; ++k) mae_obj[std::string(kTargetNames[k])] = r.mae[k];
  return json{{"v", kResultSchemaVersion},
              {"name", r.name()},
              {"config", to_json(r.config)},
              {"seed", r.seed},
              {"mae", mae_obj},
              {"mae_overall", r.mae_overall},
              {"error", r.error ? json(*r.error) : json(nullptr)}};
}

RunResult run_result_from_json(const json& j) {
  try {
    if (j.at("v").get<int>() != kResultSchemaVersion) {
      throw ParseError(fmt::format("unsupported result schema version {}", j.at("v").dump()));
    }
    RunResult r;
    r.config = run_config_from_json(j.at("config"));
    if (j.at("name").get<std::string>() != r.name()) {
      throw ParseError(fmt::format("result name {} does not match its config", j.at("name").dump()));
    }
    r.seed = j.at("seed").get<std::uint64_t>();
    for (std::size_t k = 0; k < kNumTargets; ++k) r.mae[k] = j.at("mae").at(std::string(kTargetNames[k])).get<double>();
    r.mae_overall = j.at("mae_overall").get<double>();
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("bad result record: {}", e.what()));
  } catch (const ConfigError& e) {
    throw ParseError(fmt::format("bad result config: {}", e.what()));
  }
}

std::string to_jsonl(std::span<const RunResult> results) {
  std::string out;
  for (const RunResult& r : results) {
    out += to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<RunResult> parse_jsonl(std::string_view text) {
  std::vector<RunResult> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(fmt::format("results line {}: {}", line_no, e.what()));
    }
    out.push_back(run_result_from_json(j));
  }
  return out;
}

std::vector<RunResult> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_jsonl(buf.str());
}

// ---------------------------------------------------------------------------
// Aggregation

std::string_view to_string(Axis axis) {
  switch (axis) {
    case Axis::Context: return "context";
    case Axis::Family: return "family";
    case Axis::Regime: return "regime";
    case Axis::Pooling: return "pooling";
    case Axis::Augmentation: return "augmentation";
  }
  return "?";
}

Axis axis_from_string(std::string_view name) {
  for (Axis a : kAllAxes) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument(fmt::format("unknown axis '{}'", name));
}

std::string axis_value(const RunResult& r, Axis axis) {
  const RunConfig& c = r.config;
  switch (axis) {
    case Axis::Context: return std::string(to_string(c.context));
    case Axis::Family: return std::string(family_label(c.encoder.family));
    case Axis::Regime: return std::string(to_string(c.train.regime));
    case Axis::Pooling: return std::string(to_string(c.pooling));
    case Axis::Augmentation: return c.augmented ? "augmented" : "unaugmented";
  }
  throw std::invalid_argument("unknown axis");
}

std::vector<std::string> axis_values(Axis axis) {
  switch (axis) {
    case Axis::Context: return {"sys1", "sys2"};
    case Axis::Family: return {"bert", "xlm"};
    case Axis::Regime: return {"classifier", "whole"};
    case Axis::Pooling: return {"first", "mean", "sum"};
    case Axis::Augmentation: return {"augmented", "unaugmented"};
  }
  throw std::invalid_argument("unknown axis");
}

GroupSummary summarize(std::string key, std::span<const RunResult> members) {
  if (members.empty()) throw std::invalid_argument("summarize: empty group");
  GroupSummary g;
  g.key = std::move(key);
  g.count = members.size();
  const auto n = static_cast<double>(members.size());
  for (const RunResult& r : members) {
    for (std::size_t k = 0; k < kNumTargets; ++k) g.mean[k] += r.mae[k];
    g.mean_overall += r.mae_overall;
  }
  for (double& m : g.mean) m /= n;
  g.mean_overall /= n;
  for (const RunResult& r : members) {
    for (std::size_t k = 0; k < kNumTargets; ++k) g.variance[k] += (r.mae[k] - g.mean[k]) * (r.mae[k] - g.mean[k]);
    g.variance_overall += (r.mae_overall - g.mean_overall) * (r.mae_overall - g.mean_overall);
  }
  for (double& v : g.variance) v /= n;
  g.variance_overall /= n;
  return g;
}

std::vector<GroupSummary> summarize_group(std::span<const RunResult> results, Axis axis) {
  if (results.empty()) throw std::invalid_argument("summarize_group: no results");
  std::vector<GroupSummary> out;
  for (const std::string& value : axis_values(axis)) {
    std::vector<RunResult> members;
    for (const RunResult& r : results) {
      if (r.ok() && axis_value(r, axis) == value) members.push_back(r);
    }
    if (!members.empty()) out.push_back(summarize(value, members));
  }
  return out;
}

std::vector<RunResult> rank(std::span<const RunResult> results, std::size_t k) {
  if (k < 1) throw std::invalid_argument("rank: k must be at least 1");
  std::vector<RunResult> ok;
  for (const RunResult& r : results) {
    if (r.ok()) ok.push_back(r);
  }
  std::stable_sort(ok.begin(), ok.end(), [](const RunResult& a, const RunResult& b) {
    if (a.mae_overall != b.mae_overall) return a.mae_overall < b.mae_overall;
    return a.name() < b.name();
  });
  if (ok.size() > k) ok.resize(k);
  return ok;
}

}  // namespace gazepred
