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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazepred/config.hpp"
#include "gazepred/corpus.hpp"
#include "gazepred/encoder.hpp"
#include "gazepred/tokenizer.hpp"
#include "gazepred/types.hpp"

namespace gazepred {

// Words fed to the encoder for one target word. Sys1: the target alone.
// Sys2: the sentence prefix ending at the target. The target is always last.
std::vector<std::string> build_context(std::span<const std::string> sentence_words,
                                       std::size_t target_index, ContextMode mode);

// Reduces the rows of span to one vector. Throws std::out_of_range on an
// empty span, a span past the last row, or a span covering row 0 (bos).
RowVector pool(const SequenceEncoding& encoding, Span span, Pooling strategy);

// Case-folded training-split word counts per language.
class FrequencyTable {
 public:
  FrequencyTable() = default;
  static FrequencyTable build(const Dataset& train);

  [[nodiscard]] std::size_t count(std::string_view language, std::string_view word) const;
  [[nodiscard]] std::size_t total(std::string_view language) const;
  [[nodiscard]] const std::map<std::string, std::map<std::string, std::size_t>>& counts() const {
    return counts_;
  }

  void add(std::string_view language, std::string_view word, std::size_t n = 1);

  friend bool operator==(const FrequencyTable&, const FrequencyTable&) = default;

 private:
  std::map<std::string, std::map<std::string, std::size_t>> counts_;
  std::map<std::string, std::size_t> totals_;
};

// Raw lexical features: [length in Unicode scalar values, ln(1 + count)].
std::array<double, 2> lexical_features(std::string_view word, std::string_view language,
                                       const FrequencyTable& table);

// z-normalization statistics of the lexical features over the training split.
struct AugmentNorm {
  double length_mean = 0.0;
  double length_std = 0.0;
  double log_freq_mean = 0.0;
  double log_freq_std = 0.0;

  static AugmentNorm fit(const Dataset& train, const FrequencyTable& table);
  // A zero std yields 0 for that feature.
  [[nodiscard]] std::array<double, 2> normalize(const std::array<double, 2>& raw) const;

  friend bool operator==(const AugmentNorm&, const AugmentNorm&) = default;
};

struct FeatureVector {
  RowVector values;
  std::string key;  // "<language>:<sentence_id>:<word_index>" or caller supplied
};

// Appends the two normalized lexical features to v.
FeatureVector augment(const RowVector& v, std::string_view word, std::string_view language,
                      const FrequencyTable& table, const AugmentNorm& norm);

// Everything needed to build the augmented part of a feature vector.
struct LexicalContext {
  FrequencyTable table;
  AugmentNorm norm;

  static LexicalContext fit(const Dataset& train);
  friend bool operator==(const LexicalContext&, const LexicalContext&) = default;
};

// One (target word, context) training or evaluation example.
struct Example {
  std::vector<PieceId> ids;
  Span target;                        // rows of the target word
  std::array<double, 2> lexical{};    // normalized; unused when not augmented
  Targets gold{};
  std::string key;
};

// Examples in dataset order. lexical may be null when the run is not augmented.
std::vector<Example> prepare_examples(const Dataset& ds, const SubwordVocab& vocab,
                                      ContextMode mode, const LexicalContext* lexical);

// Input of the regression head for one example.
RowVector head_input(const RowVector& pooled, const Example& ex, bool augmented);

}  // namespace gazepred
