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
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gazepred/corpus.hpp"
#include "gazepred/tokenizer.hpp"
#include "support.hpp"

namespace gazepred {
namespace {

const std::vector<std::string> kAbc = {"a", "b", "c"};

TEST(BuildContext, ModesAndErrors) {
  EXPECT_EQ(build_context(kAbc, 0, ContextMode::Sys1), (std::vector<std::string>{"a"}));
  EXPECT_EQ(build_context(kAbc, 0, ContextMode::Sys2), (std::vector<std::string>{"a"}));
  EXPECT_EQ(build_context(kAbc, 2, ContextMode::Sys2), kAbc);
  EXPECT_EQ(build_context(kAbc, 2, ContextMode::Sys1), (std::vector<std::string>{"c"}));
  EXPECT_EQ(build_context(kAbc, 1, ContextMode::Sys2), (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW(build_context(kAbc, 3, ContextMode::Sys1), std::out_of_range);
}

TEST(Pool, HandExample) {
  Matrix h(3, 2);
  h << 9, 9, 1, 2, 3, 4;
  const Span s{1, 3};
  EXPECT_EQ(pool(h, s, Pooling::First), (RowVector(2) << 1, 2).finished());
  EXPECT_EQ(pool(h, s, Pooling::Mean), (RowVector(2) << 2, 3).finished());
  EXPECT_EQ(pool(h, s, Pooling::Sum), (RowVector(2) << 4, 6).finished());
}

TEST(Pool, SingleRowAllStrategiesAgree) {
  Matrix h(2, 3);
  h << 0, 0, 0, 0.1, -7, 3.25;
  const Span s{1, 2};
  EXPECT_EQ(pool(h, s, Pooling::First), pool(h, s, Pooling::Mean));
  EXPECT_EQ(pool(h, s, Pooling::First), pool(h, s, Pooling::Sum));
}

TEST(Pool, InvalidSpans) {
  const Matrix h = Matrix::Ones(4, 2);
  EXPECT_THROW(pool(h, Span{2, 2}, Pooling::Mean), std::out_of_range);
  EXPECT_THROW(pool(h, Span{0, 2}, Pooling::Mean), std::out_of_range);
  EXPECT_THROW(pool(h, Span{3, 5}, Pooling::Sum), std::out_of_range);
}

TEST(Pool, SumIsLengthTimesMean) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rows = static_cast<Eigen::Index>(2 + rng.below(10));
    Matrix h(rows, 5);
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.uniform(-10, 10);
    const std::size_t b = 1 + rng.below(static_cast<std::uint64_t>(rows - 1));
    const std::size_t e = b + 1 + rng.below(static_cast<std::uint64_t>(rows) - b);
    const Span s{b, e};
    const RowVector sum = pool(h, s, Pooling::Sum);
    const RowVector scaled_mean = static_cast<double>(s.size()) * pool(h, s, Pooling::Mean);
    for (Eigen::Index k = 0; k < 5; ++k) {
      EXPECT_LE(std::abs(sum(k) - scaled_mean(k)), 1e-12 * std::max(1.0, std::abs(sum(k))));
    }
  }
}

Dataset small_train() {
  return Dataset({{"en", 0, 0, "The", {}}, {"en", 0, 1, "cat", {}}, {"en", 0, 2, "the", {}},
                  {"en", 1, 0, "the", {}}, {"en", 1, 1, "dog", {}}, {"de", 0, 0, "Hund", {}}},
                 Split::Train);
}

TEST(FrequencyTable, CountsAreCaseFoldedPerLanguage) {
  const FrequencyTable t = FrequencyTable::build(small_train());
  EXPECT_EQ(t.count("en", "the"), 3u);
  EXPECT_EQ(t.count("en", "THE"), 3u);
  EXPECT_EQ(t.count("en", "cat"), 1u);
  EXPECT_EQ(t.count("de", "the"), 0u);
  EXPECT_EQ(t.count("de", "hund"), 1u);
  EXPECT_EQ(t.total("en"), 5u);
  EXPECT_EQ(t.total("de"), 1u);
  EXPECT_EQ(t.total("fr"), 0u);
}

TEST(FrequencyTable, TotalsMatchIndependentRecount) {
  const std::vector<std::string> langs = {"en", "ru", "zh"};
  const FixtureSplits f = generate_fixture(2, 60, langs);
  const FrequencyTable t = FrequencyTable::build(f.train);
  std::map<std::string, std::size_t> recount;
  for (const GazeRecord& r : f.train.records()) ++recount[r.language];
  for (const auto& [lang, n] : recount) EXPECT_EQ(t.total(lang), n) << lang;
  for (const auto& [lang, words] : t.counts()) {
    std::size_t sum = 0;
    for (const auto& [w, c] : words) {
      EXPECT_GE(c, 1u);
      sum += c;
    }
    EXPECT_EQ(sum, t.total(lang));
  }
}

TEST(LexicalFeatures, LengthAndSmoothedLogFrequency) {
  const FrequencyTable t = FrequencyTable::build(small_train());
  EXPECT_EQ(lexical_features("abc", "en", t)[0], 3.0);
  EXPECT_EQ(lexical_features("zzz", "en", t)[1], 0.0);
  EXPECT_EQ(lexical_features("The", "en", t)[1], std::log(4.0));
  // Length counts scalar values, not bytes.
  EXPECT_EQ(lexical_features("\xE4\xBD\xA0\xE5\xA5\xBD", "zh", t)[0], 2.0);
  EXPECT_EQ(lexical_features("\xD0\xBC\xD0\xB8\xD1\x80", "ru", t)[0], 3.0);
}

TEST(AugmentNorm, TrainingFeaturesAreStandardized) {
  const std::vector<std::string> langs = {"en", "de"};
  const FixtureSplits f = generate_fixture(5, 80, langs);
  const LexicalContext lex = LexicalContext::fit(f.train);
  double m[2] = {0, 0}, s[2] = {0, 0};
  const auto n = static_cast<double>(f.train.size());
  std::vector<std::array<double, 2>> z;
  for (const GazeRecord& r : f.train.records()) z.push_back(lex.norm.normalize(lexical_features(r.word, r.language, lex.table)));
  for (const auto& v : z) {
    m[0] += v[0] / n;
    m[1] += v[1] / n;
  }
  for (const auto& v : z) {
    s[0] += (v[0] - m[0]) * (v[0] - m[0]) / n;
    s[1] += (v[1] - m[1]) * (v[1] - m[1]) / n;
  }
  EXPECT_NEAR(m[0], 0.0, 1e-9);
  EXPECT_NEAR(m[1], 0.0, 1e-9);
  EXPECT_NEAR(std::sqrt(s[0]), 1.0, 1e-9);
  EXPECT_NEAR(std::sqrt(s[1]), 1.0, 1e-9);
}

TEST(AugmentNorm, ZeroVarianceFeatureIsZero) {
  const Dataset ds({{"en", 0, 0, "ab", {}}, {"en", 0, 1, "cd", {}}}, Split::Train);
  const LexicalContext lex = LexicalContext::fit(ds);
  EXPECT_EQ(lex.norm.length_std, 0.0);
  EXPECT_EQ(lex.norm.normalize({2.0, 0.5})[0], 0.0);
  EXPECT_EQ(lex.norm.normalize({7.0, 0.5})[0], 0.0);
}

TEST(AugmentNorm, FittedOnTrainingSplitOnly) {
  const std::vector<std::string> langs = {"en"};
  const FixtureSplits f = generate_fixture(8, 40, langs);
  const LexicalContext before = LexicalContext::fit(f.train);
  // Looking at dev and test changes nothing.
  (void)FrequencyTable::build(f.dev);
  (void)FrequencyTable::build(f.test);
  EXPECT_EQ(LexicalContext::fit(f.train), before);
  EXPECT_NE(LexicalContext::fit(f.test).table, before.table);
}

TEST(Augment, AppendsTwoFeatures) {
  const FrequencyTable t = FrequencyTable::build(small_train());
  const AugmentNorm norm = AugmentNorm::fit(small_train(), t);
  RowVector v(3);
  v << 1, 2, 3;
  const FeatureVector fv = augment(v, "cat", "en", t, norm);
  ASSERT_EQ(fv.values.size(), 5);
  EXPECT_EQ(fv.values.head(3), v);
  const auto z = norm.normalize(lexical_features("cat", "en", t));
  EXPECT_EQ(fv.values(3), z[0]);
  EXPECT_EQ(fv.values(4), z[1]);
}

TEST(PrepareExamples, Sys1AndSys2AgreeAtSentenceStart) {
  const std::vector<std::string> langs = {"en"};
  const FixtureSplits f = generate_fixture(6, 20, langs);
  std::vector<std::string> words;
  for (const GazeRecord& r : f.train.records()) words.push_back(r.word);
  const SubwordVocab v = train_vocab(words, 128, Family::A);
  const LexicalContext lex = LexicalContext::fit(f.train);
  const auto s1 = prepare_examples(f.train, v, ContextMode::Sys1, &lex);
  const auto s2 = prepare_examples(f.train, v, ContextMode::Sys2, &lex);
  ASSERT_EQ(s1.size(), f.train.size());
  ASSERT_EQ(s2.size(), f.train.size());

  EncoderConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.vocab_size = 128;
  const EncoderParams p = init_params(c);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    const GazeRecord& r = f.train.records()[i];
    EXPECT_EQ(s1[i].gold, r.gaze);
    EXPECT_EQ(s1[i].target.end, s1[i].ids.size());
    EXPECT_EQ(s2[i].target.end, s2[i].ids.size());
    EXPECT_EQ(s1[i].target.begin, 1u);
    if (r.word_index == 0) {
      EXPECT_EQ(s1[i].ids, s2[i].ids);
      for (Pooling pl : {Pooling::First, Pooling::Mean, Pooling::Sum}) {
        const RowVector a = head_input(pool(encode(p, c, s1[i].ids), s1[i].target, pl), s1[i], true);
        const RowVector b = head_input(pool(encode(p, c, s2[i].ids), s2[i].target, pl), s2[i], true);
        EXPECT_EQ(a, b);
      }
    } else {
      EXPECT_GT(s2[i].ids.size(), s1[i].ids.size());
    }
  }
}

TEST(HeadInput, DimensionFollowsAugmentation) {
  Example ex;
  ex.lexical = {0.5, -1.5};
  RowVector pooled = RowVector::Ones(4);
  EXPECT_EQ(head_input(pooled, ex, false).size(), 4);
  const RowVector aug = head_input(pooled, ex, true);
  ASSERT_EQ(aug.size(), 6);
  EXPECT_EQ(aug(4), 0.5);
  EXPECT_EQ(aug(5), -1.5);
}

}  // namespace
}  // namespace gazepred
