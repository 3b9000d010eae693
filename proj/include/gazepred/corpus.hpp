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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazepred/types.hpp"

namespace gazepred {

enum class Split { Train, Dev, Test };

std::string_view to_string(Split split);

// One word of one sentence with its four gaze targets.
struct GazeRecord {
  std::string language;
  std::uint64_t sentence_id = 0;
  std::uint32_t word_index = 0;
  std::string word;
  Targets gaze{};

  [[nodiscard]] double ffd_avg() const { return gaze[0]; }
  [[nodiscard]] double ffd_std() const { return gaze[1]; }
  [[nodiscard]] double trt_avg() const { return gaze[2]; }
  [[nodiscard]] double trt_std() const { return gaze[3]; }

  friend bool operator==(const GazeRecord&, const GazeRecord&) = default;
};

// Contiguous run of records sharing (language, sentence_id).
struct SentenceGroup {
  std::string language;
  std::uint64_t sentence_id = 0;
  Span rows;
};

// Immutable, validated word-level corpus split.
//
// Records are grouped contiguously by (language, sentence_id) and word
// indices inside each group run 0, 1, 2, ... in order. Construction throws
// IntegrityError otherwise.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<GazeRecord> records, Split split);

  [[nodiscard]] const std::vector<GazeRecord>& records() const { return records_; }
  [[nodiscard]] Split split() const { return split_; }
  [[nodiscard]] std::size_t size() const { return records_.size(); }
  [[nodiscard]] bool empty() const { return records_.empty(); }
  [[nodiscard]] const std::vector<SentenceGroup>& sentences() const { return sentences_; }

  [[nodiscard]] std::span<const GazeRecord> rows(const SentenceGroup& s) const {
    return std::span<const GazeRecord>(records_).subspan(s.rows.begin, s.rows.size());
  }
  [[nodiscard]] std::vector<std::string> sentence_words(const SentenceGroup& s) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.split_ == b.split_ && a.records_ == b.records_;
  }

 private:
  void index();

  std::vector<GazeRecord> records_;
  Split split_ = Split::Train;
  std::vector<SentenceGroup> sentences_;
};

inline constexpr std::string_view kCsvHeader =
    "language,sentence_id,word_index,word,FFD_Avg,FFD_Std,TRT_Avg,TRT_Std";

Dataset load_dataset(const std::filesystem::path& path, Split split);
Dataset parse_dataset(std::string_view csv_text, Split split);

// Exact inverse of parse_dataset: doubles use shortest round-trip form.
std::string to_csv(const Dataset& ds);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);

// --- scaling to [0, 100] ---

struct ScalerParams {
  Targets min{};
  Targets max{};

  friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

ScalerParams fit_scaler(const Dataset& train);

// x -> 100 (x - min) / (max - min); constant columns map to 0. No clipping.
Dataset apply_scaler(const Dataset& ds, const ScalerParams& params);
double scale_value(double x, double lo, double hi);

// --- synthetic corpus ---

struct FixtureOptions {
  // Noise standard deviation relative to the standard deviation of the
  // noiseless signal, per attribute.
  double noise = 0.1;
  // Weight of the sentence-position term relative to the lexical terms.
  double context_strength = 1.0;
  std::size_t lexicon_size = 160;
  std::size_t min_sentence_length = 5;
  std::size_t max_sentence_length = 12;
};

struct FixtureSplits {
  Dataset train;
  Dataset dev;
  Dataset test;
  ScalerParams scaler;
};

// Raw (pre-scaling) coefficient of each planted effect, per attribute.
struct PlantedEffects {
  Targets base{};
  Targets length{};       // per Unicode scalar value
  Targets log_frequency{};  // per nat of lexicon probability
  Targets position{};     // per preceding word
};

PlantedEffects planted_effects(const FixtureOptions& options = {});

// Deterministic synthetic corpus split roughly 80/5/15 by sentence.
FixtureSplits generate_fixture(std::uint64_t seed, std::size_t n_sentences,
                               std::span<const std::string> languages,
                               const FixtureOptions& options = {});

// Writes train.csv, dev.csv and test.csv into dir (created if missing).
void write_fixture(const FixtureSplits& splits, const std::filesystem::path& dir);

struct DataBundle {
  Dataset train;
  Dataset dev;
  Dataset test;
};

// Reads train.csv, dev.csv and test.csv from dir.
DataBundle load_data_dir(const std::filesystem::path& dir);

}  // namespace gazepred
