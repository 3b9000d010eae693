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

#include "gazepred/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "gazepred/errors.hpp"

namespace gazepred {

using nlohmann::json;

std::string_view to_string(ContextMode mode) { return mode == ContextMode::Sys1 ? "sys1" : "sys2"; }

std::string_view to_string(Pooling pooling) {
  switch (pooling) {
    case Pooling::First: return "first";
    case Pooling::Mean: return "mean";
    case Pooling::Sum: return "sum";
  }
  return "?";
}

std::string_view to_string(Regime regime) {
  return regime == Regime::Classifier ? "classifier" : "whole";
}

std::string_view to_string(LossKind kind) { return kind == LossKind::L1 ? "L1" : "L2"; }

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
}

std::string RunConfig::name() const {
  return fmt::format("{}_{}_{}_{}_{}", family_label(encoder.family), to_string(context),
                     augmented ? "augmented" : "unaugmented", to_string(pooling),
                     to_string(train.regime));
}

void RunConfig::validate() const {
  train.validate();
  encoder.validate();
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void reject_unknown(const json& j, std::string_view what, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", what));
  const std::set<std::string_view> allowed(keys);
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", what, k));
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
  }
}

std::size_t get_size(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(fmt::format("'{}' must be a non-negative integer", key));
  }
  return v.get<std::size_t>();
}

template <class E>
E parse_enum(const json& j, const char* key, E fallback,
             std::initializer_list<std::pair<std::string_view, E>> options) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(fmt::format("'{}' must be a string", key));
  const auto s = j.at(key).get<std::string>();
  for (const auto& [label, value] : options) {
    if (s == label) return value;
  }
  throw ConfigError(fmt::format("unknown value '{}' for '{}'", s, key));
}

}  // namespace

json to_json(const TrainConfig& c) {
  return json{{"regime", to_string(c.regime)},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"loss", to_string(c.loss)}};
}

json to_json(const EncoderConfig& c) {
  return json{{"d_model", c.d_model},       {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},       {"max_seq_len", c.max_seq_len},
              {"vocab_size", c.vocab_size}, {"family", to_string(c.family)},
              {"seed", c.seed}};
}

json to_json(const RunConfig& c) {
  return json{{"name", c.name()},
              {"context", to_string(c.context)},
              {"pooling", to_string(c.pooling)},
              {"augmented", c.augmented},
              {"train", to_json(c.train)},
              {"encoder", to_json(c.encoder)}};
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown(j, "train", {"regime", "learning_rate", "epochs", "batch_size", "seed", "loss"});
  TrainConfig c;
  c.regime = parse_enum(j, "regime", c.regime,
                        {{"classifier", Regime::Classifier}, {"whole", Regime::Whole}});
  c.learning_rate = get_or<double>(j, "learning_rate", c.learning_rate);
  c.epochs = get_size(j, "epochs", c.epochs);
  c.batch_size = get_size(j, "batch_size", c.batch_size);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.loss = parse_enum(j, "loss", c.loss, {{"L1", LossKind::L1}, {"L2", LossKind::L2}});
  c.validate();
  return c;
}

EncoderConfig encoder_config_from_json(const json& j) {
  reject_unknown(j, "encoder",
                 {"d_model", "n_layers", "n_heads", "max_seq_len", "vocab_size", "family", "seed"});
  EncoderConfig c;
  c.d_model = get_size(j, "d_model", c.d_model);
  c.n_layers = get_size(j, "n_layers", c.n_layers);
  c.n_heads = get_size(j, "n_heads", c.n_heads);
  c.max_seq_len = get_size(j, "max_seq_len", c.max_seq_len);
  c.vocab_size = get_size(j, "vocab_size", c.vocab_size);
  c.family = parse_enum(j, "family", c.family,
                        {{"A", Family::A}, {"B", Family::B}, {"bert", Family::A}, {"xlm", Family::B}});
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, "run", {"name", "context", "pooling", "augmented", "train", "encoder"});
  RunConfig c;
  c.context = parse_enum(j, "context", c.context,
                         {{"sys1", ContextMode::Sys1}, {"sys2", ContextMode::Sys2}});
  c.pooling = parse_enum(j, "pooling", c.pooling,
                         {{"first", Pooling::First}, {"mean", Pooling::Mean}, {"sum", Pooling::Sum}});
  c.augmented = get_or<bool>(j, "augmented", c.augmented);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
  if (j.contains("name") && j.at("name") != c.name()) {
    throw ConfigError(fmt::format("run name '{}' does not match its axes ('{}')",
                                  j.at("name").dump(), c.name()));
  }
  c.validate();
  return c;
}

json to_json(const BaseConfig& c) {
  return json{{"train", to_json(c.train)}, {"encoder", to_json(c.encoder)}};
}

BaseConfig base_config_from_json(const json& j) {
  reject_unknown(j, "base config", {"train", "encoder"});
  BaseConfig c;
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
  return c;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open {}", path));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

}  // namespace gazepred
