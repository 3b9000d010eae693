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

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gazepred/types.hpp"

namespace gazepred {

// Two segmenter families standing in for the bert / xlm encoder axis.
//   A: vocabulary of the most frequent word substrings (WordPiece-like).
//   B: vocabulary grown by iterative most-frequent-pair merges (BPE-like).
// Both tokenize by greedy longest match.
enum class Family { A, B };

std::string_view to_string(Family family);   // "A" / "B"
std::string_view family_label(Family family);  // "bert" / "xlm"

class SubwordVocab {
 public:
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kBos = "[BOS]";
  static constexpr std::string_view kContinuation = "##";
  static constexpr PieceId kUnkId = 0;
  static constexpr PieceId kBosId = 1;

  SubwordVocab() : SubwordVocab(std::vector<std::string>{std::string(kUnk), std::string(kBos)}) {}
  // pieces[0] and pieces[1] must be the reserved tokens; pieces must be unique.
  explicit SubwordVocab(std::vector<std::string> pieces);

  [[nodiscard]] std::size_t size() const { return pieces_.size(); }
  [[nodiscard]] const std::string& piece(PieceId id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  [[nodiscard]] const std::vector<std::string>& pieces() const { return pieces_; }
  [[nodiscard]] PieceId unk_id() const { return kUnkId; }
  [[nodiscard]] PieceId bos_id() const { return kBosId; }
  [[nodiscard]] std::string_view continuation_marker() const { return kContinuation; }

  // -1 when absent.
  [[nodiscard]] PieceId find(std::string_view piece) const;
  [[nodiscard]] bool contains(std::string_view piece) const { return find(piece) >= 0; }

  // One piece per line; line number is the id.
  [[nodiscard]] std::string to_text() const;
  static SubwordVocab from_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static SubwordVocab load(const std::filesystem::path& path);

  friend bool operator==(const SubwordVocab& a, const SubwordVocab& b) {
    return a.pieces_ == b.pieces_;
  }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, PieceId> ids_;
  std::size_t max_piece_chars_ = 0;

  friend std::vector<PieceId> tokenize_word(const SubwordVocab&, std::string_view);
};

// Every character of the corpus appears in the vocabulary both as a
// word-initial piece and as a continuation piece, so tokenization of corpus
// words never produces unk. Throws std::invalid_argument when target_size is
// below 8 or cannot hold the reserved tokens plus that character inventory.
SubwordVocab train_vocab(std::span<const std::string> corpus, std::size_t target_size,
                         Family family);

std::vector<PieceId> tokenize_word(const SubwordVocab& vocab, std::string_view word);

struct TokenizedWord {
  std::string word;
  std::vector<PieceId> piece_ids;
  Span span;  // positions within the containing sequence
};

struct TokenizedSequence {
  std::vector<PieceId> ids;  // bos followed by every word's pieces
  std::vector<TokenizedWord> alignment;
};

TokenizedSequence tokenize_sequence(const SubwordVocab& vocab, std::span<const std::string> words);

}  // namespace gazepred
