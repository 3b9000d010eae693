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

#include "gazepred/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "gazepred/errors.hpp"
#include "gazepred/utf8.hpp"

namespace gazepred {

namespace {
constexpr std::size_t kMaxPieceChars = 12;
}

std::string_view to_string(Family family) { return family == Family::A ? "A" : "B"; }
std::string_view family_label(Family family) { return family == Family::A ? "bert" : "xlm"; }

SubwordVocab::SubwordVocab(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.size() < 2 || pieces_[kUnkId] != kUnk || pieces_[kBosId] != kBos) {
    throw ParseError("vocabulary must start with the reserved tokens [UNK] and [BOS]");
  }
  ids_.reserve(pieces_.size());
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const std::string& p = pieces_[i];
    if (p.empty() || p.find_first_of("\r\n") != std::string::npos) {
      throw ParseError(fmt::format("vocabulary piece {} is empty or contains a line break", i));
    }
    if (!ids_.emplace(p, static_cast<PieceId>(i)).second) {
      throw ParseError(fmt::format("duplicate vocabulary piece '{}'", p));
    }
    // Upper bound: a word-initial piece may itself start with the marker.
    if (i >= 2) max_piece_chars_ = std::max(max_piece_chars_, utf8::length(p));
  }
}

PieceId SubwordVocab::find(std::string_view piece) const {
  auto it = ids_.find(std::string(piece));
  return it == ids_.end() ? -1 : it->second;
}

std::string SubwordVocab::to_text() const {
  std::string out;
  for (const std::string& p : pieces_) {
    out += p;
    out.push_back('\n');
  }
  return out;
}

SubwordVocab SubwordVocab::from_text(std::string_view text) {
  std::vector<std::string> pieces;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (line.ends_with('\r')) line.remove_suffix(1);
    pieces.emplace_back(line);
    pos = nl + 1;
  }
  return SubwordVocab(std::move(pieces));
}

void SubwordVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << to_text();
}

SubwordVocab SubwordVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::string piece_of(std::u32string_view chars, bool initial) {
  std::string s = initial ? std::string() : std::string(SubwordVocab::kContinuation);
  return s + utf8::encode(chars);
}

using WordCounts = std::map<std::u32string, std::size_t>;

void add_most_frequent_substrings(const WordCounts& words, std::size_t budget,
                                  std::vector<std::string>& pieces, std::set<std::string>& present) {
  std::map<std::string, std::size_t> counts;
  for (const auto& [w, c] : words) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (std::size_t len = 2; len <= kMaxPieceChars && i + len <= w.size(); ++len) {
        counts[piece_of(std::u32string_view(w).substr(i, len), i == 0)] += c;
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [piece, count] : ranked) {
    if (budget == 0) break;
    if (present.insert(piece).second) {
      pieces.push_back(piece);
      --budget;
    }
  }
}

void add_pair_merges(const WordCounts& words, std::size_t budget, std::vector<std::string>& pieces,
                     std::set<std::string>& present) {
  struct Item {
    std::vector<std::string> symbols;
    std::size_t count;
  };
  std::vector<Item> items;
  for (const auto& [w, c] : words) {
    Item it{{}, c};
    for (std::size_t i = 0; i < w.size(); ++i) it.symbols.push_back(piece_of(w.substr(i, 1), i == 0));
    items.push_back(std::move(it));
  }
  while (budget > 0) {
    std::map<std::pair<std::string, std::string>, std::size_t> pairs;
    for (const Item& it : items) {
      for (std::size_t i = 0; i + 1 < it.symbols.size(); ++i) {
        pairs[{it.symbols[i], it.symbols[i + 1]}] += it.count;
      }
    }
    if (pairs.empty()) break;
    // Highest count wins; ties go to the lexicographically smallest pair.
    auto best = pairs.begin();
    for (auto p = pairs.begin(); p != pairs.end(); ++p) {
      if (p->second > best->second) best = p;
    }
    const auto [left, right] = best->first;
    const std::string merged = left + right.substr(SubwordVocab::kContinuation.size());
    for (Item& it : items) {
      std::vector<std::string> next;
      next.reserve(it.symbols.size());
      for (std::size_t i = 0; i < it.symbols.size(); ++i) {
        if (i + 1 < it.symbols.size() && it.symbols[i] == left && it.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(it.symbols[i]);
        }
      }
      it.symbols = std::move(next);
    }
    if (present.insert(merged).second) {
      pieces.push_back(merged);
      --budget;
    }
  }
}

}  // namespace

SubwordVocab train_vocab(std::span<const std::string> corpus, std::size_t target_size,
                         Family family) {
  if (corpus.empty()) throw std::invalid_argument("train_vocab: empty corpus");
  if (target_size < 8) throw std::invalid_argument("train_vocab: target_size must be at least 8");

  WordCounts words;
  std::set<char32_t> chars;
  for (const std::string& w : corpus) {
    std::u32string cps = utf8::decode(w);
    std::erase_if(cps, [](char32_t c) { return utf8::is_space(c); });
    if (cps.empty()) continue;
    chars.insert(cps.begin(), cps.end());
    ++words[cps];
  }

  std::vector<std::string> pieces{std::string(SubwordVocab::kUnk), std::string(SubwordVocab::kBos)};
  for (char32_t c : chars) pieces.push_back(piece_of(std::u32string(1, c), true));
  for (char32_t c : chars) pieces.push_back(piece_of(std::u32string(1, c), false));
  if (pieces.size() > target_size) {
    throw std::invalid_argument(fmt::format(
        "train_vocab: target_size {} cannot hold the reserved tokens plus {} character pieces",
        target_size, pieces.size() - 2));
  }
  std::set<std::string> present(pieces.begin(), pieces.end());
  const std::size_t budget = target_size - pieces.size();
  if (family == Family::A) {
    add_most_frequent_substrings(words, budget, pieces, present);
  } else {
    add_pair_merges(words, budget, pieces, present);
  }
  return SubwordVocab(std::move(pieces));
}

// ---------------------------------------------------------------------------
// Tokenization

std::vector<PieceId> tokenize_word(const SubwordVocab& vocab, std::string_view word) {
  const std::u32string cps = utf8::decode(word);
  std::vector<PieceId> ids;
  std::size_t i = 0;
  const std::size_t longest = std::max<std::size_t>(vocab.max_piece_chars_, 1);
  while (i < cps.size()) {
    PieceId found = -1;
    std::size_t len = std::min(longest, cps.size() - i);
    for (; len > 0; --len) {
      auto it = vocab.ids_.find(piece_of(std::u32string_view(cps).substr(i, len), i == 0));
      if (it != vocab.ids_.end()) {
        found = it->second;
        break;
      }
    }
    if (found < 0) {
      ids.push_back(vocab.unk_id());
      ++i;
    } else {
      ids.push_back(found);
      i += len;
    }
  }
  if (ids.empty()) ids.push_back(vocab.unk_id());
  return ids;
}

TokenizedSequence tokenize_sequence(const SubwordVocab& vocab, std::span<const std::string> words) {
  if (words.empty()) throw std::invalid_argument("tokenize_sequence: no words");
  TokenizedSequence seq;
  seq.ids.push_back(vocab.bos_id());
  for (const std::string& w : words) {
    TokenizedWord tw;
    tw.word = w;
    tw.piece_ids = tokenize_word(vocab, w);
    tw.span = Span{seq.ids.size(), seq.ids.size() + tw.piece_ids.size()};
    seq.ids.insert(seq.ids.end(), tw.piece_ids.begin(), tw.piece_ids.end());
    seq.alignment.push_back(std::move(tw));
  }
  return seq;
}

}  // namespace gazepred
