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

#include "gazepred/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "gazepred/errors.hpp"
#include "gazepred/random.hpp"
#include "gazepred/utf8.hpp"

namespace gazepred {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<GazeRecord> records, Split split)
    : records_(std::move(records)), split_(split) {
  index();
}

void Dataset::index() {
  std::set<std::tuple<std::string, std::uint64_t, std::uint32_t>> keys;
  std::set<std::pair<std::string, std::uint64_t>> closed_groups;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const GazeRecord& r = records_[i];
    if (!keys.emplace(r.language, r.sentence_id, r.word_index).second) {
      throw IntegrityError(fmt::format("duplicate key ({}, {}, {}) at record {}", r.language,
                                       r.sentence_id, r.word_index, i));
    }
    const bool continues = !sentences_.empty() && sentences_.back().language == r.language &&
                           sentences_.back().sentence_id == r.sentence_id;
    if (continues) {
      SentenceGroup& g = sentences_.back();
      if (r.word_index != g.rows.size()) {
        throw IntegrityError(fmt::format(
            "sentence ({}, {}): expected word_index {} but found {} at record {}", r.language,
            r.sentence_id, g.rows.size(), r.word_index, i));
      }
      g.rows.end = i + 1;
      continue;
    }
    if (!sentences_.empty()) {
      closed_groups.emplace(sentences_.back().language, sentences_.back().sentence_id);
    }
    if (closed_groups.contains({r.language, r.sentence_id})) {
      throw IntegrityError(fmt::format("sentence ({}, {}) is not contiguous (record {})",
                                       r.language, r.sentence_id, i));
    }
    if (r.word_index != 0) {
      throw IntegrityError(fmt::format("sentence ({}, {}) starts at word_index {} (record {})",
                                       r.language, r.sentence_id, r.word_index, i));
    }
    sentences_.push_back({r.language, r.sentence_id, Span{i, i + 1}});
  }
}

std::vector<std::string> Dataset::sentence_words(const SentenceGroup& s) const {
  std::vector<std::string> words;
  words.reserve(s.rows.size());
  for (const GazeRecord& r : rows(s)) words.push_back(r.word);
  return words;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::size_t row) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool field_started_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !field_started_quoted) {
      quoted = true;
      field_started_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_started_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError(fmt::format("row {}: unterminated quoted field", row));
  fields.push_back(std::move(field));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

template <class T>
T parse_number(std::string_view text, std::size_t row, std::string_view column) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ParseError(
        fmt::format("row {}: column {} is not a valid number: '{}'", row, column, text));
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) {
      throw ParseError(fmt::format("row {}: column {} is not finite", row, column));
    }
  }
  return value;
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

void validate_word(std::string_view word, std::size_t row) {
  if (word.empty()) throw ParseError(fmt::format("row {}: empty word", row));
  for (char32_t cp : utf8::decode(word)) {
    if (utf8::is_space(cp)) throw ParseError(fmt::format("row {}: word contains whitespace", row));
  }
}

}  // namespace

Dataset parse_dataset(std::string_view text, Split split) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<GazeRecord> records;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.ends_with('\r')) line.remove_suffix(1);
    ++line_no;
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    if (!saw_header) {
      if (line != kCsvHeader) {
        throw SchemaError(fmt::format("unexpected header '{}'; expected '{}'", line, kCsvHeader));
      }
      saw_header = true;
      continue;
    }
    const std::size_t row = line_no;
    auto fields = split_csv_line(line, row);
    if (fields.size() != 8) {
      throw SchemaError(fmt::format("row {}: expected 8 columns, found {}", row, fields.size()));
    }
    GazeRecord r;
    r.language = fields[0];
    if (r.language.empty()) throw ParseError(fmt::format("row {}: empty language", row));
    r.sentence_id = parse_number<std::uint64_t>(fields[1], row, "sentence_id");
    r.word_index = parse_number<std::uint32_t>(fields[2], row, "word_index");
    validate_word(fields[3], row);
    r.word = fields[3];
    for (std::size_t k = 0; k < kNumTargets; ++k) {
      r.gaze[k] = parse_number<double>(fields[4 + k], row, kTargetNames[k]);
    }
    records.push_back(std::move(r));
  }
  if (!saw_header) throw SchemaError("missing header line");
  return Dataset(std::move(records), split);
}

Dataset load_dataset(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), split);
}

std::string to_csv(const Dataset& ds) {
  std::string out(kCsvHeader);
  out.push_back('\n');
  for (const GazeRecord& r : ds.records()) {
    out += csv_escape(r.language);
    out += fmt::format(",{},{},", r.sentence_id, r.word_index);
    out += csv_escape(r.word);
    for (double v : r.gaze) {
      out.push_back(',');
      out += format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << to_csv(ds);
}

// ---------------------------------------------------------------------------
// Scaling

ScalerParams fit_scaler(const Dataset& train) {
  if (train.empty()) throw DataError("cannot fit scaler on an empty dataset");
  ScalerParams p;
  p.min = train.records().front().gaze;
  p.max = p.min;
  for (const GazeRecord& r : train.records()) {
    for (std::size_t k = 0; k < kNumTargets; ++k) {
      p.min[k] = std::min(p.min[k], r.gaze[k]);
      p.max[k] = std::max(p.max[k], r.gaze[k]);
    }
  }
  return p;
}

double scale_value(double x, double lo, double hi) {
  if (hi == lo) return 0.0;
  return (x - lo) / (hi - lo) * 100.0;
}

Dataset apply_scaler(const Dataset& ds, const ScalerParams& params) {
  std::vector<GazeRecord> out = ds.records();
  for (GazeRecord& r : out) {
    for (std::size_t k = 0; k < kNumTargets; ++k) {
      r.gaze[k] = scale_value(r.gaze[k], params.min[k], params.max[k]);
    }
  }
  return Dataset(std::move(out), ds.split());
}

// ---------------------------------------------------------------------------
// Fixture

namespace {

struct Alphabet {
  std::u32string letters;
  std::size_t min_len;
  std::size_t max_len;
};

Alphabet alphabet_for(std::string_view language) {
  auto range = [](char32_t first, std::size_t n) {
    std::u32string s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(first + static_cast<char32_t>(i));
    return s;
  };
  if (language == "zh" || language == "ja") return {range(0x4E00, 48), 1, 3};
  if (language == "ru") return {range(0x0430, 32), 2, 10};
  if (language == "hi") return {range(0x0915, 37), 2, 8};
  if (language == "de") return {range(U'a', 26) + U"äöüß", 2, 12};
  return {range(U'a', 26), 1, 10};
}

struct LexEntry {
  std::string word;
  double length = 0;
  double log_prob = 0;
};

struct Lexicon {
  std::vector<LexEntry> entries;
  std::vector<double> cumulative;

  const LexEntry& sample(Rng& rng) const {
    const double u = rng.uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = std::min<std::size_t>(it - cumulative.begin(), entries.size() - 1);
    return entries[idx];
  }
};

Lexicon make_lexicon(Rng& rng, std::string_view language, std::size_t size) {
  const Alphabet alpha = alphabet_for(language);
  std::set<std::u32string> seen;
  Lexicon lex;
  std::size_t attempts = 0;
  while (lex.entries.size() < size && attempts < size * 100) {
    ++attempts;
    const std::size_t span = alpha.max_len - alpha.min_len + 1;
    // Triangular length distribution centred in the range.
    const std::size_t len = alpha.min_len + (rng.below(span) + rng.below(span)) / 2;
    std::u32string w;
    for (std::size_t i = 0; i < len; ++i) w.push_back(alpha.letters[rng.below(alpha.letters.size())]);
    if (!seen.insert(w).second) continue;
    lex.entries.push_back({utf8::encode(w), static_cast<double>(len), 0.0});
  }
  // Zipfian probabilities over a random rank order.
  rng.shuffle(lex.entries);
  double z = 0;
  for (std::size_t r = 0; r < lex.entries.size(); ++r) z += 1.0 / std::pow(r + 1.0, 1.1);
  double acc = 0;
  for (std::size_t r = 0; r < lex.entries.size(); ++r) {
    const double p = 1.0 / std::pow(r + 1.0, 1.1) / z;
    lex.entries[r].log_prob = std::log(p);
    acc += p;
    lex.cumulative.push_back(acc);
  }
  return lex;
}

}  // namespace

PlantedEffects planted_effects(const FixtureOptions& options) {
  PlantedEffects e;
  e.base = {180.0, 50.0, 220.0, 90.0};
  e.length = {6.0, 3.0, 18.0, 8.0};
  e.log_frequency = {-8.0, -4.0, -15.0, -7.0};
  e.position = {3.5, 1.5, 6.0, 2.5};
  for (double& c : e.position) c *= options.context_strength;
  return e;
}

FixtureSplits generate_fixture(std::uint64_t seed, std::size_t n_sentences,
                               std::span<const std::string> languages,
                               const FixtureOptions& options) {
  if (n_sentences < 3) throw std::invalid_argument("generate_fixture: need at least 3 sentences");
  if (languages.empty()) throw std::invalid_argument("generate_fixture: no languages given");
  if (options.min_sentence_length == 0 ||
      options.max_sentence_length < options.min_sentence_length) {
    throw std::invalid_argument("generate_fixture: bad sentence length range");
  }
  Rng rng(seed);
  std::vector<Lexicon> lexicons;
  for (const std::string& lang : languages) lexicons.push_back(make_lexicon(rng, lang, options.lexicon_size));

  const PlantedEffects eff = planted_effects(options);
  struct Raw {
    GazeRecord record;
    Targets signal;
  };
  std::vector<std::vector<Raw>> sentences(n_sentences);
  const std::size_t len_span = options.max_sentence_length - options.min_sentence_length + 1;
  for (std::size_t s = 0; s < n_sentences; ++s) {
    const std::size_t li = s % languages.size();
    const std::size_t n_words = options.min_sentence_length + rng.below(len_span);
    for (std::size_t w = 0; w < n_words; ++w) {
      const LexEntry& e = lexicons[li].sample(rng);
      Raw raw;
      raw.record.language = languages[li];
      raw.record.sentence_id = s;
      raw.record.word_index = static_cast<std::uint32_t>(w);
      raw.record.word = e.word;
      for (std::size_t k = 0; k < kNumTargets; ++k) {
        raw.signal[k] = eff.base[k] + eff.length[k] * e.length +
                        eff.log_frequency[k] * e.log_prob +
                        eff.position[k] * static_cast<double>(w);
      }
      sentences[s].push_back(std::move(raw));
    }
  }

  // Noise is relative to the spread of the noiseless signal.
  Targets mean{}, sd{};
  std::size_t count = 0;
  for (const auto& sent : sentences) {
    for (const Raw& r : sent) {
      for (std::size_t k = 0; k < kNumTargets; ++k) mean[k] += r.signal[k];
      ++count;
    }
  }
  for (double& m : mean) m /= static_cast<double>(count);
  for (const auto& sent : sentences) {
    for (const Raw& r : sent) {
      for (std::size_t k = 0; k < kNumTargets; ++k) sd[k] += (r.signal[k] - mean[k]) * (r.signal[k] - mean[k]);
    }
  }
  for (double& v : sd) v = std::sqrt(v / static_cast<double>(count));
  for (auto& sent : sentences) {
    for (Raw& r : sent) {
      for (std::size_t k = 0; k < kNumTargets; ++k) {
        r.record.gaze[k] = r.signal[k] + options.noise * sd[k] * rng.normal();
      }
    }
  }

  std::vector<std::size_t> order(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i) order[i] = i;
  rng.shuffle(order);
  const auto n = static_cast<double>(n_sentences);
  const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.15 * n)));
  const std::size_t n_dev = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.05 * n)));
  std::vector<std::size_t> test_ids(order.begin(), order.begin() + n_test);
  std::vector<std::size_t> dev_ids(order.begin() + n_test, order.begin() + n_test + n_dev);
  std::vector<std::size_t> train_ids(order.begin() + n_test + n_dev, order.end());

  auto collect = [&](std::vector<std::size_t> ids, Split split) {
    std::sort(ids.begin(), ids.end());
    std::vector<GazeRecord> recs;
    for (std::size_t id : ids) {
      for (const Raw& r : sentences[id]) recs.push_back(r.record);
    }
    return Dataset(std::move(recs), split);
  };
  const Dataset raw_train = collect(train_ids, Split::Train);
  FixtureSplits out;
  out.scaler = fit_scaler(raw_train);
  out.train = apply_scaler(raw_train, out.scaler);
  out.dev = apply_scaler(collect(dev_ids, Split::Dev), out.scaler);
  out.test = apply_scaler(collect(test_ids, Split::Test), out.scaler);
  return out;
}

void write_fixture(const FixtureSplits& splits, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_dataset(splits.train, dir / "train.csv");
  write_dataset(splits.dev, dir / "dev.csv");
  write_dataset(splits.test, dir / "test.csv");
}

DataBundle load_data_dir(const std::filesystem::path& dir) {
  return {load_dataset(dir / "train.csv", Split::Train), load_dataset(dir / "dev.csv", Split::Dev),
          load_dataset(dir / "test.csv", Split::Test)};
}

}  // namespace gazepred
