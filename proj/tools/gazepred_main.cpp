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

// gazepred command-line tool: fixture generation, training, evaluation,
// the 48-configuration sweep and report rendering.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "gazepred/config.hpp"
#include "gazepred/corpus.hpp"
#include "gazepred/errors.hpp"
#include "gazepred/eval.hpp"
#include "gazepred/regress.hpp"
#include "gazepred/sweep.hpp"

namespace fs = std::filesystem;
using namespace gazepred;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
}

void write_report(const SweepReport& report, const fs::path& md_path) {
  write_text(md_path, report.markdown());
  fs::path json_path = md_path;
  json_path.replace_extension(".json");
  write_text(json_path, report.to_json().dump(2) + "\n");
}

struct FixtureArgs {
  std::uint64_t seed = 0;
  std::size_t sentences = 120;
  std::string languages = "en";
  std::string out;
  double noise = FixtureOptions{}.noise;
};

int cmd_fixture(const FixtureArgs& a) {
  FixtureOptions options;
  options.noise = a.noise;
  const auto languages = split_list(a.languages);
  if (a.sentences < 3 || languages.empty()) {
    throw ConfigError("fixture: need --sentences >= 3 and at least one language");
  }
  const FixtureSplits splits = generate_fixture(a.seed, a.sentences, languages, options);
  write_fixture(splits, a.out);
  std::cout << fmt::format("wrote {} train / {} dev / {} test records to {}\n", splits.train.size(),
                           splits.dev.size(), splits.test.size(), a.out);
  return kOk;
}

struct TrainArgs {
  std::string config, train, dev, out;
};

int cmd_train(const TrainArgs& a) {
  const RunConfig config = run_config_from_json(read_json_file(a.config));
  const Dataset train = load_dataset(a.train, Split::Train);
  Dataset dev;
  if (!a.dev.empty()) dev = load_dataset(a.dev, Split::Dev);
  const TrainedModel model = fit_model(config, train, a.dev.empty() ? nullptr : &dev);
  save_model(model, a.out);
  std::cout << fmt::format("{}: final training loss {:.4f}", config.name(), model.log.epoch_loss.back());
  if (!model.log.dev_mae.empty()) std::cout << fmt::format(", dev MAE {:.4f}", model.log.dev_mae.back());
  std::cout << fmt::format("\nsaved {}\n", a.out);
  return kOk;
}

struct EvaluateArgs {
  std::string model, data, out;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const TrainedModel model = load_model(a.model);
  const Dataset data = load_dataset(a.data, Split::Test);
  if (data.empty()) throw DataError("evaluate: dataset has no records");
  const std::vector<Example> examples = model.examples(data);
  const std::vector<Prediction> preds = model.predict(examples);
  std::vector<Targets> golds;
  for (const Example& ex : examples) golds.push_back(ex.gold);
  const MaeScores scores = mae(preds, golds);
  RunResult r;
  r.config = model.config;
  r.seed = model.config.train.seed;
  r.mae = scores.per_attribute;
  r.mae_overall = scores.overall;
  write_text(a.out, to_jsonl(std::span<const RunResult>(&r, 1)));
  std::cout << fmt::format("{}: MAE {:.4f} (FFD_Avg {:.4f}, FFD_Std {:.4f}, TRT_Avg {:.4f}, TRT_Std {:.4f})\n",
                           r.name(), r.mae_overall, r.mae[0], r.mae[1], r.mae[2], r.mae[3]);
  return kOk;
}

struct SweepArgs {
  std::string base_config, data, out;
  std::size_t parallelism = 1;
  std::optional<std::uint64_t> seed;
  bool save_models = false;
  bool quiet = false;
};

int cmd_sweep(const SweepArgs& a) {
  const BaseConfig base = base_config_from_json(read_json_file(a.base_config));
  const DataBundle data = load_data_dir(a.data);
  const fs::path out(a.out);
  fs::create_directories(out);

  SweepOptions options;
  options.parallelism = a.parallelism;
  options.global_seed = a.seed.value_or(base.train.seed);
  if (a.save_models) {
    options.model_dir = out / "models";
    fs::create_directories(options.model_dir);
  }
  std::size_t done = 0;
  const auto grid = enumerate_grid(base.train, base.encoder);
  if (!a.quiet) {
    options.on_result = [&](const RunResult& r) {
      ++done;
      if (r.ok()) {
        std::cerr << fmt::format("[{:2}/{}] {:<40} MAE {:.4f} ({:.1f}s)\n", done, grid.size(), r.name(),
                                 r.mae_overall, r.wall_time);
      } else {
        std::cerr << fmt::format("[{:2}/{}] {:<40} FAILED: {}\n", done, grid.size(), r.name(), *r.error);
      }
    };
  }
  const std::vector<RunResult> results = run_sweep(grid, data, options);

  write_text(out / "results.jsonl", to_jsonl(results));
  std::string timings;
  for (const RunResult& r : results) {
    timings += nlohmann::json{{"name", r.name()}, {"wall_time", r.wall_time}}.dump() + "\n";
  }
  write_text(out / "timings.jsonl", timings);

  ReportMetadata meta;
  meta.global_seed = std::to_string(options.global_seed);
  meta.data_fingerprint = data_fingerprint(data);
  write_text(out / "sweep.json", nlohmann::json{{"global_seed", meta.global_seed},
                                                {"data_fingerprint", meta.data_fingerprint},
                                                {"code_version", meta.code_version},
                                                {"base_config", to_json(base)}}
                                         .dump(2) + "\n");
  write_report(build_report(results, meta), out / "report.md");
  const auto failed = std::count_if(results.begin(), results.end(), [](const RunResult& r) { return !r.ok(); });
  std::cout << fmt::format("{} runs, {} failed; wrote {}\n", results.size(), failed, out.string());
  return kOk;
}

struct ReportArgs {
  std::string results, out;
};

int cmd_report(const ReportArgs& a) {
  const std::vector<RunResult> results = read_jsonl(a.results);
  if (results.empty()) throw DataError("report: results file is empty");
  ReportMetadata meta;
  const fs::path manifest = fs::path(a.results).parent_path() / "sweep.json";
  if (fs::exists(manifest)) {
    const auto j = read_json_file(manifest.string());
    meta.global_seed = j.value("global_seed", meta.global_seed);
    meta.data_fingerprint = j.value("data_fingerprint", meta.data_fingerprint);
    meta.code_version = j.value("code_version", meta.code_version);
  }
  write_report(build_report(results, meta), a.out);
  std::cout << fmt::format("wrote {}\n", a.out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eye-tracking feature prediction experiments"};
  app.require_subcommand(1);

  FixtureArgs fixture;
  auto* fx = app.add_subcommand("fixture", "Write a synthetic train/dev/test corpus");
  fx->add_option("--seed", fixture.seed, "Random seed")->required();
  fx->add_option("--sentences", fixture.sentences, "Total number of sentences")->required();
  fx->add_option("--languages", fixture.languages, "Comma-separated language codes")->required();
  fx->add_option("--out", fixture.out, "Output directory")->required();
  fx->add_option("--noise", fixture.noise, "Relative noise level");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train one configuration");
  tr->add_option("--config", train.config, "RunConfig JSON file")->required()->check(CLI::ExistingFile);
  tr->add_option("--train", train.train, "Training CSV")->required();
  tr->add_option("--dev", train.dev, "Development CSV (logged only)");
  tr->add_option("--out", train.out, "Model output path")->required();

  EvaluateArgs evaluate;
  auto* ev = app.add_subcommand("evaluate", "Score a trained model on a CSV file");
  ev->add_option("--model", evaluate.model, "Model file")->required();
  ev->add_option("--data", evaluate.data, "CSV to score")->required();
  ev->add_option("--out", evaluate.out, "JSON-lines result path")->required();

  SweepArgs sweep;
  auto* sw = app.add_subcommand("sweep", "Train and score all 48 grid configurations");
  sw->add_option("--base-config", sweep.base_config, "Base config JSON ({train, encoder})")
      ->required()->check(CLI::ExistingFile);
  sw->add_option("--data", sweep.data, "Directory with train.csv, dev.csv, test.csv")->required();
  sw->add_option("--parallelism", sweep.parallelism, "Concurrent runs")->check(CLI::PositiveNumber);
  sw->add_option("--out", sweep.out, "Output directory")->required();
  sw->add_option("--seed", sweep.seed, "Global seed (default: train.seed of the base config)");
  sw->add_flag("--save-models", sweep.save_models, "Also save every trained model");
  sw->add_flag("--quiet", sweep.quiet, "No per-run progress");

  ReportArgs report;
  auto* rp = app.add_subcommand("report", "Render a Markdown report from results JSON lines");
  rp->add_option("--results", report.results, "results.jsonl")->required();
  rp->add_option("--out", report.out, "Markdown output (a .json twin is written alongside)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fx) return cmd_fixture(fixture);
    if (*tr) return cmd_train(train);
    if (*ev) return cmd_evaluate(evaluate);
    if (*sw) return cmd_sweep(sweep);
    if (*rp) return cmd_report(report);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
