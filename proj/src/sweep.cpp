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
#include <atomic>
#include <chrono>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "gazepred/digest.hpp"
#include "gazepred/errors.hpp"
#include "gazepred/random.hpp"

namespace gazepred {

using nlohmann::json;

std::vector<RunConfig> enumerate_grid(const TrainConfig& base, const EncoderConfig& encoder) {
  base.validate();
  encoder.validate();
  std::vector<RunConfig> grid;
  for (ContextMode context : {ContextMode::Sys1, ContextMode::Sys2}) {
    for (Family family : {Family::A, Family::B}) {
      for (Regime regime : {Regime::Classifier, Regime::Whole}) {
        for (Pooling pooling : {Pooling::First, Pooling::Mean, Pooling::Sum}) {
          for (bool augmented : {false, true}) {
            RunConfig c;
            c.context = context;
            c.pooling = pooling;
            c.augmented = augmented;
            c.train = base;
            c.train.regime = regime;
            c.encoder = encoder;
            c.encoder.family = family;
            grid.push_back(c);
          }
        }
      }
    }
  }
  std::sort(grid.begin(), grid.end(),
            [](const RunConfig& a, const RunConfig& b) { return a.name() < b.name(); });
  return grid;
}

RunConfig seeded_config(const RunConfig& config, std::uint64_t global_seed) {
  RunConfig c = config;
  const std::uint64_t seed = derive_seed(global_seed, config.name());
  c.train.seed = seed;
  c.encoder.seed = derive_seed(seed, "encoder");
  return c;
}

RunResult train_and_evaluate(const RunConfig& config, const DataBundle& data, TrainedModel* model_out) {
  const auto start = std::chrono::steady_clock::now();
  TrainedModel model = fit_model(config, data.train, &data.dev);
  const std::vector<Example> test = model.examples(data.test);
  if (test.empty()) throw DataError("test split is empty");
  const std::vector<Prediction> preds = model.predict(test);
  std::vector<Targets> golds;
  golds.reserve(test.size());
  for (const Example& ex : test) golds.push_back(ex.gold);
  const MaeScores scores = mae(preds, golds);

  RunResult r;
  r.config = config;
  r.seed = config.train.seed;
  r.mae = scores.per_attribute;
  r.mae_overall = scores.overall;
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (model_out != nullptr) *model_out = std::move(model);
  return r;
}

std::vector<RunResult> run_sweep(std::span<const RunConfig> grid, const DataBundle& data,
                                 const SweepOptions& options) {
  if (options.parallelism < 1) throw ConfigError("sweep: parallelism must be at least 1");
  if (grid.empty()) throw ConfigError("sweep: empty grid");
  std::vector<RunResult> results(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      const RunConfig config = seeded_config(grid[i], options.global_seed);
      RunResult r;
      try {
        if (options.runner) {
          r = options.runner(config, data);
        } else if (!options.model_dir.empty()) {
          TrainedModel model;
          r = train_and_evaluate(config, data, &model);
          save_model(model, options.model_dir / (config.name() + ".model"));
        } else {
          r = train_and_evaluate(config, data);
        }
      } catch (const std::exception& e) {
        r = RunResult{};
        r.config = config;
        r.seed = config.train.seed;
        r.error = e.what();
      }
      results[i] = std::move(r);
      if (options.on_result) {
        std::lock_guard lock(callback_mutex);
        options.on_result(results[i]);
      }
    }
  };

  const std::size_t n_threads = std::min(options.parallelism, grid.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  std::sort(results.begin(), results.end(),
            [](const RunResult& a, const RunResult& b) { return a.name() < b.name(); });
  if (std::none_of(results.begin(), results.end(), [](const RunResult& r) { return r.ok(); })) {
    throw Error(fmt::format("sweep: all {} runs failed; first error: {}", results.size(),
                            results.front().error.value_or("?")));
  }
  return results;
}

std::string data_fingerprint(const DataBundle& data) {
  return sha256_hex(to_csv(data.train) + to_csv(data.dev) + to_csv(data.test));
}

// ---------------------------------------------------------------------------
// Report

namespace {

std::string context_family_key(const RunResult& r) {
  return fmt::format("{}_{}", r.config.context == ContextMode::Sys1 ? "Sys1" : "Sys2",
                     r.config.encoder.family == Family::A ? "BERT" : "XLM");
}

std::string f3(double x) { return fmt::format("{:.3f}", x); }
std::string f4(double x) { return fmt::format("{:.4f}", x); }

std::string attribute_header(std::string_view first) {
  return fmt::format("| {} | FFD_Avg | FFD_Std | TRT_Avg | TRT_Std |", first);
}

json summary_json(const GroupSummary& g) {
  return json{{"key", g.key},         {"count", g.count},
              {"mean", g.mean},       {"variance", g.variance},
              {"mean_overall", g.mean_overall}, {"variance_overall", g.variance_overall}};
}

json ranking_json(const std::vector<RunResult>& rs) {
  json a = json::array();
  for (const RunResult& r : rs) a.push_back(json{{"name", r.name()}, {"mae_overall", r.mae_overall}});
  return a;
}

}  // namespace

SweepReport build_report(std::span<const RunResult> results, const ReportMetadata& metadata) {
  if (results.empty()) throw std::invalid_argument("build_report: no results");
  SweepReport rep;
  rep.metadata = metadata;
  rep.results.assign(results.begin(), results.end());
  std::sort(rep.results.begin(), rep.results.end(),
            [](const RunResult& a, const RunResult& b) { return a.name() < b.name(); });

  std::vector<RunResult> ok;
  for (const RunResult& r : rep.results) {
    (r.ok() ? ok : rep.failed).push_back(r);
  }
  if (ok.empty()) throw std::invalid_argument("build_report: every run failed");

  rep.top = rank(ok, 10);
  rep.population = summarize("all", ok);
  for (const char* key : {"Sys1_BERT", "Sys1_XLM", "Sys2_BERT", "Sys2_XLM"}) {
    std::vector<RunResult> members;
    for (const RunResult& r : ok) {
      if (context_family_key(r) == key) members.push_back(r);
    }
    if (!members.empty()) rep.context_family.push_back(summarize(key, members));
  }
  for (Axis axis : kAllAxes) {
    rep.axes.emplace_back(axis, summarize_group(ok, axis));
    for (const std::string& value : axis_values(axis)) {
      std::vector<RunResult> members;
      for (const RunResult& r : ok) {
        if (axis_value(r, axis) == value) members.push_back(r);
      }
      if (!members.empty()) rep.group_top.emplace_back(value, rank(members, 5));
    }
  }
  return rep;
}

std::string SweepReport::markdown() const {
  std::string md = "# Sweep report\n\n";
  md += fmt::format("- runs: {} ({} succeeded, {} failed)\n", results.size(),
                    results.size() - failed.size(), failed.size());
  md += fmt::format("- global seed: {}\n", metadata.global_seed);
  md += fmt::format("- data fingerprint: {}\n", metadata.data_fingerprint);
  md += fmt::format("- code version: {}\n", metadata.code_version);
  md += "- families `bert` and `xlm` are the two in-repo toy encoder/segmenter families A and B.\n\n";

  md += fmt::format("## Top {} systems\n\n", top.size());
  md += "| Rank | Model | MAE | FFD_Avg | FFD_Std | TRT_Avg | TRT_Std |\n";
  md += "|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < top.size(); ++i) {
    const RunResult& r = top[i];
    md += fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", i + 1, r.name(), f3(r.mae_overall),
                      f3(r.mae[0]), f3(r.mae[1]), f3(r.mae[2]), f3(r.mae[3]));
  }

  md += "\n## Attribute-wise scores for all models\n\n";
  md += attribute_header("Statistic") + "\n|---|---|---|---|---|\n";
  const GroupSummary& p = population;
  md += fmt::format("| mean | {} | {} | {} | {} |\n", f3(p.mean[0]), f3(p.mean[1]), f3(p.mean[2]), f3(p.mean[3]));
  md += fmt::format("| variance | {} | {} | {} | {} |\n", f4(p.variance[0]), f4(p.variance[1]),
                    f4(p.variance[2]), f4(p.variance[3]));
  md += fmt::format("\nMean overall MAE across {} models: {}\n", p.count, f3(p.mean_overall));

  md += "\n## Context and family\n\n";
  md += "| Model | Average MAE across models | n |\n|---|---|---|\n";
  for (const GroupSummary& g : context_family) {
    md += fmt::format("| {} | {} | {} |\n", g.key, f3(g.mean_overall), g.count);
  }

  for (const auto& [axis, groups] : axes) {
    md += fmt::format("\n## By {}\n\n", to_string(axis));
    md += "| Model | Average MAE across models | Variance | n |\n|---|---|---|---|\n";
    for (const GroupSummary& g : groups) {
      md += fmt::format("| {} | {} | {} | {} |\n", g.key, f3(g.mean_overall), f4(g.variance_overall), g.count);
    }
    md += fmt::format("\nAttribute-wise mean of scores by {}\n\n", to_string(axis));
    md += attribute_header("Model") + "\n|---|---|---|---|---|\n";
    for (const GroupSummary& g : groups) {
      md += fmt::format("| {} | {} | {} | {} | {} |\n", g.key, f3(g.mean[0]), f3(g.mean[1]), f3(g.mean[2]), f3(g.mean[3]));
    }
    md += fmt::format("\nAttribute-wise variance of scores by {}\n\n", to_string(axis));
    md += attribute_header("Model") + "\n|---|---|---|---|---|\n";
    for (const GroupSummary& g : groups) {
      md += fmt::format("| {} | {} | {} | {} | {} |\n", g.key, f4(g.variance[0]), f4(g.variance[1]),
                        f4(g.variance[2]), f4(g.variance[3]));
    }
  }

  md += "\n## Best 5 models per group\n";
  for (const auto& [value, best] : group_top) {
    md += fmt::format("\n### {}\n\n| Model | MAE |\n|---|---|\n", value);
    for (const RunResult& r : best) md += fmt::format("| {} | {} |\n", r.name(), f3(r.mae_overall));
  }

  if (!failed.empty()) {
    md += "\n## Failed runs\n\nExcluded from every table above.\n\n| Model | Error |\n|---|---|\n";
    for (const RunResult& r : failed) md += fmt::format("| {} | {} |\n", r.name(), r.error.value_or(""));
  }
  md += "\nVariances are population variances (divided by the number of models in the group).\n";
  return md;
}

json SweepReport::to_json() const {
  json j;
  j["v"] = kResultSchemaVersion;
  j["metadata"] = json{{"global_seed", metadata.global_seed},
                       {"data_fingerprint", metadata.data_fingerprint},
                       {"code_version", metadata.code_version}};
  json rs = json::array();
  for (const RunResult& r : results) rs.push_back(gazepred::to_json(r));
  j["results"] = rs;

  json tables;
  tables["top10"] = ranking_json(top);
  tables["population"] = summary_json(population);
  json cf = json::array();
  for (const GroupSummary& g : context_family) cf.push_back(summary_json(g));
  tables["context_family"] = cf;
  json axes_json = json::object();
  for (const auto& [axis, groups] : axes) {
    json a = json::array();
    for (const GroupSummary& g : groups) a.push_back(summary_json(g));
    axes_json[std::string(to_string(axis))] = a;
  }
  tables["axes"] = axes_json;
  json gt = json::object();
  for (const auto& [value, best] : group_top) gt[value] = ranking_json(best);
  tables["group_top5"] = gt;
  j["tables"] = tables;
  return j;
}

SweepReport SweepReport::from_json(const json& j) {
  ReportMetadata meta;
  std::vector<RunResult> results;
  try {
    const json& m = j.at("metadata");
    meta.global_seed = m.at("global_seed").get<std::string>();
    meta.data_fingerprint = m.at("data_fingerprint").get<std::string>();
    meta.code_version = m.at("code_version").get<std::string>();
    for (const json& r : j.at("results")) results.push_back(run_result_from_json(r));
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("bad report JSON: {}", e.what()));
  }
  return build_report(results, meta);
}

}  // namespace gazepred
