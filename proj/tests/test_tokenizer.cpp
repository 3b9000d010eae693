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

#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gazepred/corpus.hpp"
#include "gazepred/errors.hpp"
#include "gazepred/utf8.hpp"

namespace gazepred {
namespace {

SubwordVocab vocab_of(std::vector<std::string> extra) {
  std::vector<std::string> pieces = {std::string(SubwordVocab::kUnk), std::string(SubwordVocab::kBos)};
  for (auto& p : extra) pieces.push_back(std::move(p));
  return SubwordVocab(std::move(pieces));
}

TEST(Vocab, ReservedIdsAndInverseMap) {
  const SubwordVocab v = vocab_of({"a", "##b"});
  EXPECT_EQ(v.unk_id(), 0);
  EXPECT_EQ(v.bos_id(), 1);
  EXPECT_NE(v.unk_id(), v.bos_id());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.find(v.piece(static_cast<PieceId>(i))), static_cast<PieceId>(i));
  EXPECT_EQ(v.find("zz"), -1);
}

TEST(Vocab, RejectsDuplicatesAndBadReserved) {
  EXPECT_THROW(vocab_of({"a", "a"}), ParseError);
  EXPECT_THROW(SubwordVocab(std::vector<std::string>{"x", "y"}), ParseError);
  EXPECT_THROW(vocab_of({"a\nb"}), ParseError);
}

TEST(Vocab, TextRoundTrip) {
  const SubwordVocab v = vocab_of({"a", "##b", "\xD0\xB4\xD0\xB0"});
  EXPECT_EQ(SubwordVocab::from_text(v.to_text()), v);
  const auto path = std::filesystem::temp_directory_path() / "gazepred_vocab.txt";
  v.save(path);
  EXPECT_EQ(SubwordVocab::load(path), v);
  std::filesystem::remove(path);
}

TEST(TrainVocab, FamilyAMergesFrequentPair) {
  const std::vector<std::string> corpus = {"aa", "aa", "ab"};
  const SubwordVocab v = train_vocab(corpus, 8, Family::A);
  EXPECT_LE(v.size(), 8u);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("b"));
  EXPECT_TRUE(v.contains("aa"));
}

TEST(TrainVocab, FamilyBMergesFrequentPair) {
  const std::vector<std::string> corpus = {"aa", "aa", "ab"};
  const SubwordVocab v = train_vocab(corpus, 8, Family::B);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("b"));
  EXPECT_TRUE(v.contains("aa"));
}

TEST(TrainVocab, EveryCharacterPresent) {
  const std::vector<std::string> corpus = {"Straße", "\xE4\xBD\xA0\xE5\xA5\xBD", "мир", "x"};
  for (Family f : {Family::A, Family::B}) {
    const SubwordVocab v = train_vocab(corpus, 64, f);
    for (const std::string& w : corpus) {
      for (char32_t cp : utf8::decode(w)) {
        EXPECT_TRUE(v.contains(utf8::encode(cp))) << utf8::encode(cp);
        EXPECT_TRUE(v.contains("##" + utf8::encode(cp)));
      }
      for (PieceId id : tokenize_word(v, w)) EXPECT_NE(id, v.unk_id());
    }
  }
}

TEST(TrainVocab, DeterministicAndSizeChecked) {
  const std::vector<std::string> corpus = {"reading", "readers", "reads", "ready", "tree"};
  EXPECT_EQ(train_vocab(corpus, 40, Family::A), train_vocab(corpus, 40, Family::A));
  EXPECT_EQ(train_vocab(corpus, 40, Family::B), train_vocab(corpus, 40, Family::B));
  EXPECT_THROW(train_vocab(corpus, 7, Family::A), std::invalid_argument);
  EXPECT_THROW(train_vocab(corpus, 12, Family::B), std::invalid_argument);
  EXPECT_THROW(train_vocab(std::vector<std::string>{}, 40, Family::A), std::invalid_argument);
}

TEST(TrainVocab, FamiliesSegmentDifferently) {
  const std::vector<std::string> langs = {"en", "de"};
  const FixtureSplits f = generate_fixture(9, 60, langs);
  std::vector<std::string> words;
  for (const GazeRecord& r : f.train.records()) words.push_back(r.word);
  const SubwordVocab a = train_vocab(words, 256, Family::A);
  const SubwordVocab b = train_vocab(words, 256, Family::B);
  std::size_t differing = 0;
  for (const std::string& w : words) {
    const auto ta = tokenize_word(a, w);
    const auto tb = tokenize_word(b, w);
    std::vector<std::string> sa, sb;
    for (PieceId id : ta) sa.push_back(a.piece(id));
    for (PieceId id : tb) sb.push_back(b.piece(id));
    if (sa != sb) ++differing;
  }
  EXPECT_GT(differing, 0u);
}

TEST(TrainVocab, TwoMultiCharacterWordsSuffice) {
  const std::vector<std::string> corpus = {"abcab", "cabca", "abcab"};
  const SubwordVocab a = train_vocab(corpus, 20, Family::A);
  const SubwordVocab b = train_vocab(corpus, 20, Family::B);
  bool differ = false;
  for (const std::string& w : {std::string("abcab"), std::string("cabca")}) {
    std::vector<std::string> sa, sb;
    for (PieceId id : tokenize_word(a, w)) sa.push_back(a.piece(id));
    for (PieceId id : tokenize_word(b, w)) sb.push_back(b.piece(id));
    differ = differ || sa != sb;
  }
  EXPECT_TRUE(differ);
}

TEST(TokenizeWord, WholePieceIsOneId) {
  const SubwordVocab v = vocab_of({"a", "##b", "ab"});
  EXPECT_EQ(tokenize_word(v, "ab"), (std::vector<PieceId>{v.find("ab")}));
}

TEST(TokenizeWord, GreedyWithContinuationMarker) {
  const SubwordVocab with_marker = vocab_of({"a", "b", "##b"});
  EXPECT_EQ(tokenize_word(with_marker, "ab"), (std::vector<PieceId>{with_marker.find("a"), with_marker.find("##b")}));
  // Without a continuation form of "b" the second character is unknown.
  const SubwordVocab plain = vocab_of({"a", "b"});
  EXPECT_EQ(tokenize_word(plain, "ab"), (std::vector<PieceId>{plain.find("a"), plain.unk_id()}));
}

TEST(TokenizeWord, LongestMatchWins) {
  const SubwordVocab v = vocab_of({"r", "re", "rea", "##a", "##d", "##ad", "##e"});
  const auto ids = tokenize_word(v, "read");
  ASSERT_EQ(ids.size(), 2u);
  EXPECT_EQ(v.piece(ids[0]), "rea");
  EXPECT_EQ(v.piece(ids[1]), "##d");
}

TEST(TokenizeWord, UnknownCharacterIsUnk) {
  const SubwordVocab v = vocab_of({"a", "##a"});
  EXPECT_EQ(tokenize_word(v, "a\xE2\x82\xAC" "a"), (std::vector<PieceId>{v.find("a"), 0, v.find("##a")}));
  EXPECT_EQ(tokenize_word(v, ""), (std::vector<PieceId>{0}));
}

TEST(TokenizeSequence, SpansAndBos) {
  const SubwordVocab v = vocab_of({"x", "ab", "##cd", "ef", "##g", "##h"});
  const std::vector<std::string> one = {"x"};
  const TokenizedSequence s1 = tokenize_sequence(v, one);
  EXPECT_EQ(s1.ids.size(), 2u);
  EXPECT_EQ(s1.ids[0], v.bos_id());
  EXPECT_EQ(s1.alignment[0].span, (Span{1, 2}));

  const std::vector<std::string> two = {"abcd", "efgh"};
  const TokenizedSequence s2 = tokenize_sequence(v, two);
  EXPECT_EQ(s2.alignment[0].span, (Span{1, 3}));
  EXPECT_EQ(s2.alignment[1].span, (Span{3, 6}));
  EXPECT_EQ(s2.ids.size(), 6u);
  // Spans cut the sequence back into per-word piece lists.
  for (const TokenizedWord& w : s2.alignment) {
    const std::vector<PieceId> cut(s2.ids.begin() + static_cast<std::ptrdiff_t>(w.span.begin),
                                   s2.ids.begin() + static_cast<std::ptrdiff_t>(w.span.end));
    EXPECT_EQ(cut, w.piece_ids);
    EXPECT_EQ(cut, tokenize_word(v, w.word));
  }
  EXPECT_THROW(tokenize_sequence(v, std::vector<std::string>{}), std::invalid_argument);
}

}  // namespace
}  // namespace gazepred
