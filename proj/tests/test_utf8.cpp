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

#include "gazepred/utf8.hpp"

#include <gtest/gtest.h>

namespace gazepred::utf8 {
namespace {

TEST(Utf8, DecodeEncodeRoundTrip) {
  const std::string s = "a\xC3\xA9\xE4\xBD\xA0\xF0\x9F\x98\x80";
  const std::u32string cps = decode(s);
  ASSERT_EQ(cps.size(), 4u);
  EXPECT_EQ(cps[1], U'é');
  EXPECT_EQ(cps[3], U'\U0001F600');
  EXPECT_EQ(encode(cps), s);
  EXPECT_EQ(length(s), 4u);
}

TEST(Utf8, MalformedBytesBecomeReplacement) {
  EXPECT_EQ(decode("\xFF"), std::u32string(1, kReplacement));
  EXPECT_EQ(decode("a\xE4\xBD"), (std::u32string{U'a', kReplacement, kReplacement}));
  EXPECT_EQ(decode("\xC0\xAF"), (std::u32string{kReplacement, kReplacement}));
}

TEST(Utf8, Lowercase) {
  EXPECT_EQ(to_lower("The"), "the");
  EXPECT_EQ(to_lower("\xC3\x84pfel"), "\xC3\xA4pfel");
  EXPECT_EQ(to_lower("\xD0\x9C\xD0\x98\xD0\xA0"), "\xD0\xBC\xD0\xB8\xD1\x80");
  EXPECT_EQ(to_lower("\xE4\xBD\xA0"), "\xE4\xBD\xA0");
}

TEST(Utf8, Spaces) {
  EXPECT_TRUE(is_space(U' '));
  EXPECT_TRUE(is_space(U'　'));
  EXPECT_FALSE(is_space(U'x'));
}

}  // namespace
}  // namespace gazepred::utf8
