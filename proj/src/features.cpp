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

#include "gazepred/features.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "gazepred/utf8.hpp"

namespace gazepred {

std::vector<std::string> build_context(std::span<const std::string> sentence_words,
                                       std::size_t target_index, ContextMode mode) {
  if (target_index >= sentence_words.size()) {
    throw std::out_of_range(fmt::format("build_context: target {} outside sentence of {} words",
                                        target_index, sentence_words.size()));
  }
  if (mode == ContextMode::Sys1) return {sentence_words[target_index]};
  return {sentence_words.begin(), sentence_words.begin() + static_cast<std::ptrdiff_t>(target_index) + 1};
}

RowVector pool(const SequenceEncoding& encoding, Span span, Pooling strategy) {
  if (span.empty() || span.begin == 0 || span.end > static_cast<std::size_t>(encoding.rows())) {
    throw std::out_of_range(fmt::format("pool: span [{}, {}) invalid for {} rows", span.begin,
                                        span.end, encoding.rows()));
  }
  const auto begin = static_cast<Eigen::Index>(span.begin);
  const auto n = static_cast<Eigen::Index>(span.size());
  switch (strategy) {
    case Pooling::First:
      return encoding.row(begin);
    case Pooling::Mean:
      return encoding.middleRows(begin, n).colwise().sum() / static_cast<double>(n);
    case Pooling::Sum:
      return encoding.middleRows(begin, n).colwise().sum();
  }
  throw std::invalid_argument("pool: unknown strategy");
}

// ---------------------------------------------------------------------------

FrequencyTable FrequencyTable::build(const Dataset& train) {
  FrequencyTable t;
  for (const GazeRecord& r : train.records()) t.add(r.language, r.word);
  return t;
}

void FrequencyTable::add(std::string_view language, std::string_view word, std::size_t n) {
  counts_[std::string(language)][utf8::to_lower(word)] += n;
  totals_[std::string(language)] += n;
}

std::size_t FrequencyTable::count(std::string_view language, std::string_view word) const {
  auto lang = counts_.find(std::string(language));
  if (lang == counts_.end()) return 0;
  auto it = lang->second.find(utf8::to_lower(word));
  return it == lang->second.end() ? 0 : it->second;
}

std::size_t FrequencyTable::total(std::string_view language) const {
  auto it = totals_.find(std::string(language));
  return it == totals_.end() ? 0 : it->second;
}

std::array<double, 2> lexical_features(std::string_view word, std::string_view language,
                                       const FrequencyTable& table) {
  return {static_cast<double>(utf8::length(word)),
          std::log1p(static_cast<double>(table.count(language, word)))};
}

AugmentNorm AugmentNorm::fit(const Dataset& train, const FrequencyTable& table) {
  AugmentNorm n;
  if (train.empty()) return n;
  const auto count = static_cast<double>(train.size());
  std::vector<std::array<double, 2>> raw;
  raw.reserve(train.size());
  for (const GazeRecord& r : train.records()) raw.push_back(lexical_features(r.word, r.language, table));
  for (const auto& f : raw) {
    n.length_mean += f[0];
    n.log_freq_mean += f[1];
  }
  n.length_mean /= count;
  n.log_freq_mean /= count;
  for (const auto& f : raw) {
    n.length_std += (f[0] - n.length_mean) * (f[0] - n.length_mean);
    n.log_freq_std += (f[1] - n.log_freq_mean) * (f[1] - n.log_freq_mean);
  }
  n.length_std = std::sqrt(n.length_std / count);
  n.log_freq_std = std::sqrt(n.log_freq_std / count);
  return n;
}

std::array<double, 2> AugmentNorm::normalize(const std::array<double, 2>& raw) const {
  auto z = [](double x, double mean, double sd) { return sd > 0.0 ? (x - mean) / sd : 0.0; };
  return {z(raw[0], length_mean, length_std), z(raw[1], log_freq_mean, log_freq_std)};
}

FeatureVector augment(const RowVector& v, std::string_view word, std::string_view language,
                      const FrequencyTable& table, const AugmentNorm& norm) {
  const auto z = norm.normalize(lexical_features(word, language, table));
  FeatureVector out;
  out.values.resize(v.size() + 2);
  out.values.head(v.size()) = v;
  out.values(v.size()) = z[0];
  out.values(v.size() + 1) = z[1];
  out.key = fmt::format("{}:{}", language, word);
  return out;
}

LexicalContext LexicalContext::fit(const Dataset& train) {
  LexicalContext c;
  c.table = FrequencyTable::build(train);
  c.norm = AugmentNorm::fit(train, c.table);
  return c;
}

// ---------------------------------------------------------------------------

std::vector<Example> prepare_examples(const Dataset& ds, const SubwordVocab& vocab,
                                      ContextMode mode, const LexicalContext* lexical) {
  std::vector<Example> out;
  out.reserve(ds.size());
  for (const SentenceGroup& s : ds.sentences()) {
    const std::vector<std::string> words = ds.sentence_words(s);
    // Tokenize each word once and assemble contexts from the pieces.
    std::vector<std::vector<PieceId>> pieces;
    pieces.reserve(words.size());
    for (const std::string& w : words) pieces.push_back(tokenize_word(vocab, w));

    for (const GazeRecord& r : ds.rows(s)) {
      Example ex;
      ex.ids.push_back(vocab.bos_id());
      const std::size_t first = mode == ContextMode::Sys1 ? r.word_index : 0;
      for (std::size_t w = first; w <= r.word_index; ++w) {
        if (w == r.word_index) ex.target = Span{ex.ids.size(), ex.ids.size() + pieces[w].size()};
        ex.ids.insert(ex.ids.end(), pieces[w].begin(), pieces[w].end());
      }
      if (lexical != nullptr) {
        ex.lexical = lexical->norm.normalize(lexical_features(r.word, r.language, lexical->table));
      }
      ex.gold = r.gaze;
      ex.key = fmt::format("{}:{}:{}", r.language, r.sentence_id, r.word_index);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

RowVector head_input(const RowVector& pooled, const Example& ex, bool augmented) {
  if (!augmented) return pooled;
  RowVector x(pooled.size() + 2);
  x.head(pooled.size()) = pooled;
  x(pooled.size()) = ex.lexical[0];
  x(pooled.size() + 1) = ex.lexical[1];
  return x;
}

}  // namespace gazepred
