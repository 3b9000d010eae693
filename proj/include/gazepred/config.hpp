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
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gazepred/encoder.hpp"
#include "gazepred/tokenizer.hpp"

namespace gazepred {

enum class ContextMode { Sys1, Sys2 };
enum class Pooling { First, Mean, Sum };
enum class Regime { Classifier, Whole };
enum class LossKind { L1, L2 };

std::string_view to_string(ContextMode mode);  // "sys1" / "sys2"
std::string_view to_string(Pooling pooling);   // "first" / "mean" / "sum"
std::string_view to_string(Regime regime);     // "classifier" / "whole"
std::string_view to_string(LossKind kind);     // "L1" / "L2"

struct TrainConfig {
  Regime regime = Regime::Classifier;
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::L1;

  // Throws ConfigError.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// One cell of the experiment grid plus its hyperparameters. The regime and
// family axes live in train.regime and encoder.family.
struct RunConfig {
  ContextMode context = ContextMode::Sys1;
  Pooling pooling = Pooling::First;
  bool augmented = false;
  TrainConfig train;
  EncoderConfig encoder;

  [[nodiscard]] Family family() const { return encoder.family; }
  [[nodiscard]] Regime regime() const { return train.regime; }

  // <bert|xlm>_<sys1|sys2>_<augmented|unaugmented>_<first|mean|sum>_<classifier|whole>
  [[nodiscard]] std::string name() const;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Canonical JSON (sorted keys). Parsing rejects unknown keys and fills
// missing ones with defaults; a present "name" must match the axes.
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const EncoderConfig& c);
nlohmann::json to_json(const RunConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

// Base configuration for a sweep: {"train": {...}, "encoder": {...}}.
struct BaseConfig {
  TrainConfig train;
  EncoderConfig encoder;
};
nlohmann::json to_json(const BaseConfig& c);
BaseConfig base_config_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);

}  // namespace gazepred
