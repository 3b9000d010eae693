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

// Python bindings. Configs and results cross the boundary as JSON text; the
// package __init__ turns them into dicts.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "gazepred/corpus.hpp"
#include "gazepred/errors.hpp"
#include "gazepred/eval.hpp"
#include "gazepred/features.hpp"
#include "gazepred/regress.hpp"
#include "gazepred/sweep.hpp"
#include "gazepred/tokenizer.hpp"

namespace py = pybind11;
using namespace gazepred;

namespace {

Split split_from(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  throw py::value_error("split must be 'train', 'dev' or 'test'");
}

Family family_from(const std::string& s) {
  if (s == "A" || s == "bert") return Family::A;
  if (s == "B" || s == "xlm") return Family::B;
  throw py::value_error("family must be 'A', 'B', 'bert' or 'xlm'");
}

Pooling pooling_from(const std::string& s) {
  if (s == "first") return Pooling::First;
  if (s == "mean") return Pooling::Mean;
  if (s == "sum") return Pooling::Sum;
  throw py::value_error("pooling must be 'first', 'mean' or 'sum'");
}

Eigen::MatrixXd to_matrix(const std::vector<Targets>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < 4; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

std::vector<Targets> from_matrix(const Eigen::MatrixXd& m) {
  if (m.cols() != 4) throw py::value_error("expected an (n, 4) array");
  std::vector<Targets> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < 4; ++k) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = m(i, k);
  }
  return rows;
}

DataBundle bundle(const Dataset& train, const Dataset& dev, const Dataset& test) { return {train, dev, test}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Eye-tracking feature prediction: corpus, tokenizer, encoder, training and sweep";
  m.attr("__version__") = std::string(kVersion.substr(kVersion.find(' ') + 1));

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_property_readonly("split", [](const Dataset& d) { return std::string(to_string(d.split())); })
      .def_property_readonly("num_sentences", [](const Dataset& d) { return d.sentences().size(); })
      .def("records",
           [](const Dataset& d) {
             py::list out;
             for (const GazeRecord& r : d.records()) {
               out.append(py::make_tuple(r.language, r.sentence_id, r.word_index, r.word, r.gaze[0], r.gaze[1],
                                         r.gaze[2], r.gaze[3]));
             }
             return out;
           },
           "Records as (language, sentence_id, word_index, word, FFD_Avg, FFD_Std, TRT_Avg, TRT_Std) tuples.")
      .def("targets", [](const Dataset& d) {
        std::vector<Targets> rows;
        for (const GazeRecord& r : d.records()) rows.push_back(r.gaze);
        return to_matrix(rows);
      })
      .def("to_csv", &to_csv)
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { write_dataset(d, p); })
      .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; });

  m.def("load_dataset", [](const std::filesystem::path& p, const std::string& split) {
    return load_dataset(p, split_from(split));
  }, py::arg("path"), py::arg("split") = "train");
  m.def("parse_dataset", [](const std::string& text, const std::string& split) {
    return parse_dataset(text, split_from(split));
  }, py::arg("text"), py::arg("split") = "train");

  m.def("generate_fixture",
        [](std::uint64_t seed, std::size_t n, const std::vector<std::string>& languages, double noise,
           double context_strength) {
          FixtureOptions o;
          o.noise = noise;
          o.context_strength = context_strength;
          const FixtureSplits f = generate_fixture(seed, n, languages, o);
          return py::make_tuple(f.train, f.dev, f.test);
        },
        py::arg("seed"), py::arg("sentences"), py::arg("languages") = std::vector<std::string>{"en"},
        py::arg("noise") = FixtureOptions{}.noise, py::arg("context_strength") = FixtureOptions{}.context_strength,
        "Synthetic (train, dev, test) datasets scaled to [0, 100].");
  m.def("load_data_dir", [](const std::filesystem::path& dir) {
    const DataBundle b = load_data_dir(dir);
    return py::make_tuple(b.train, b.dev, b.test);
  });

  py::class_<SubwordVocab>(m, "SubwordVocab")
      .def(py::init<std::vector<std::string>>())
      .def_static("train",
                  [](const std::vector<std::string>& words, std::size_t size, const std::string& family) {
                    return train_vocab(words, size, family_from(family));
                  },
                  py::arg("words"), py::arg("size"), py::arg("family") = "A")
      .def("__len__", &SubwordVocab::size)
      .def_property_readonly("pieces", &SubwordVocab::pieces)
      .def("find", &SubwordVocab::find)
      .def("tokenize_word", [](const SubwordVocab& v, const std::string& w) { return tokenize_word(v, w); })
      .def("tokenize_sequence",
           [](const SubwordVocab& v, const std::vector<std::string>& words) {
             const TokenizedSequence s = tokenize_sequence(v, words);
             std::vector<std::pair<std::size_t, std::size_t>> spans;
             for (const TokenizedWord& w : s.alignment) spans.emplace_back(w.span.begin, w.span.end);
             return py::make_tuple(s.ids, spans);
           },
           "Returns (ids, spans) with half-open [begin, end) spans per word.")
      .def("to_text", &SubwordVocab::to_text);

  m.def("pool",
        [](const SequenceEncoding& encoding, std::size_t begin, std::size_t end, const std::string& strategy) {
          return Eigen::RowVectorXd(pool(encoding, Span{begin, end}, pooling_from(strategy)));
        },
        py::arg("encoding"), py::arg("begin"), py::arg("end"), py::arg("strategy"));

  m.def("mae",
        [](const Eigen::MatrixXd& preds, const Eigen::MatrixXd& golds) {
          const MaeScores s = mae(from_matrix(preds), from_matrix(golds));
          return py::make_tuple(std::vector<double>(s.per_attribute.begin(), s.per_attribute.end()), s.overall);
        },
        "Per-attribute MAEs and their unweighted mean.");

  m.def("encode",
        [](const std::string& encoder_json, const std::vector<PieceId>& ids) {
          const EncoderConfig c = encoder_config_from_json(nlohmann::json::parse(encoder_json));
          return Matrix(encode(init_params(c), c, ids));
        },
        py::arg("encoder_config"), py::arg("ids"), "Encodes ids with freshly initialized parameters.");

  py::class_<TrainedModel>(m, "TrainedModel")
      .def_static("fit",
                  [](const std::string& config_json, const Dataset& train, const Dataset* dev) {
                    const RunConfig c = run_config_from_json(nlohmann::json::parse(config_json));
                    py::gil_scoped_release release;
                    return fit_model(c, train, dev);
                  },
                  py::arg("config"), py::arg("train"), py::arg("dev") = nullptr)
      .def_static("load", [](const std::filesystem::path& p) { return load_model(p); })
      .def_static("from_bytes", [](const py::bytes& b) { return deserialize_model(std::string(b)); })
      .def("save", [](const TrainedModel& tm, const std::filesystem::path& p) { save_model(tm, p); })
      .def("to_bytes", [](const TrainedModel& tm) { return py::bytes(serialize_model(tm)); })
      .def("predict", [](const TrainedModel& tm, const Dataset& d) { return to_matrix(tm.predict(d)); },
           "Clipped predictions, one row per record.")
      .def_property_readonly("config", [](const TrainedModel& tm) { return to_json(tm.config).dump(); })
      .def_property_readonly("name", [](const TrainedModel& tm) { return tm.config.name(); })
      .def_property_readonly("epoch_loss", [](const TrainedModel& tm) { return tm.log.epoch_loss; })
      .def_property_readonly("dev_mae", [](const TrainedModel& tm) { return tm.log.dev_mae; })
      .def_property_readonly("encoder_digest", [](const TrainedModel& tm) { return params_digest(tm.encoder); });

  m.def("enumerate_grid", [](const std::string& base_json) {
    const BaseConfig b = base_config_from_json(nlohmann::json::parse(base_json));
    std::vector<std::string> out;
    for (const RunConfig& c : enumerate_grid(b.train, b.encoder)) out.push_back(to_json(c).dump());
    return out;
  });

  m.def("run_sweep",
        [](const std::string& base_json, const Dataset& train, const Dataset& dev, const Dataset& test,
           std::size_t parallelism, std::optional<std::uint64_t> seed) {
          const BaseConfig b = base_config_from_json(nlohmann::json::parse(base_json));
          SweepOptions o;
          o.parallelism = parallelism;
          o.global_seed = seed.value_or(b.train.seed);
          const auto grid = enumerate_grid(b.train, b.encoder);
          const DataBundle data = bundle(train, dev, test);
          py::gil_scoped_release release;
          return to_jsonl(run_sweep(grid, data, o));
        },
        py::arg("base_config"), py::arg("train"), py::arg("dev"), py::arg("test"), py::arg("parallelism") = 1,
        py::arg("seed") = py::none(), "Runs the 48-configuration grid; returns results as JSON lines.");

  m.def("build_report",
        [](const std::string& jsonl) {
          const SweepReport r = build_report(parse_jsonl(jsonl));
          return py::make_tuple(r.markdown(), r.to_json().dump());
        },
        "Returns (markdown, json) for a JSON-lines results string.");
}
