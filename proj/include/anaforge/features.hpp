// Copyright 2026 The Anaforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Lexicons and bucketing shared by the resolvers.

#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>

#include "anaforge/corpus.hpp"

namespace anaforge {

enum class GrammaticalNumber { kSingular, kPlural, kUnknown };

inline const std::set<std::string> &personal_pronouns() {
  static const std::set<std::string> words = {
      "i", "me", "my", "mine", "you", "your", "yours", "he", "him", "his", "she", "her",
      "hers", "we", "us", "our", "ours", "they", "them", "their", "theirs", "it", "its"};
  return words;
}

// Pronouns for the "non-pronominal" string-match merge: personal pronouns
// plus reflexives, demonstratives and relatives.
inline const std::set<std::string> &pronouns() {
  static const std::set<std::string> words = [] {
    std::set<std::string> w = personal_pronouns();
    for (const char *x : {"myself", "yourself", "yourselves", "himself", "herself", "itself", "ourselves",
                          "themselves", "this", "that", "these", "those", "which", "who", "whom", "whose",
                          "one", "ones"})
      w.insert(x);
    return w;
  }();
  return words;
}

inline bool is_personal_pronoun(std::string_view surface) {
  return personal_pronouns().count(lowercase(surface)) > 0;
}

inline bool is_pronoun(std::string_view surface) { return pronouns().count(lowercase(surface)) > 0; }

inline GrammaticalNumber pronoun_number(std::string_view surface) {
  static const std::set<std::string> plural = {"we", "us", "our", "ours", "they", "them", "their", "theirs"};
  static const std::set<std::string> singular = {"i", "me", "my", "mine", "he", "him", "his", "she",
                                                 "her", "hers", "it", "its"};
  std::string s = lowercase(surface);
  if (plural.count(s)) return GrammaticalNumber::kPlural;
  if (singular.count(s)) return GrammaticalNumber::kSingular;
  return GrammaticalNumber::kUnknown;
}

// Surface forms considered as discourse-deixis anaphor candidates.
inline bool is_deixis_candidate_form(std::string_view surface) {
  std::string s = lowercase(surface);
  return s == "this" || s == "that" || s == "it" || s == "which";
}

// [0, 1, 2, 3, 4, 5-7, 8-15, 16-31, 32-63, >=64]
inline constexpr size_t kLogBuckets = 10;
inline size_t log_bucket(size_t d) {
  if (d <= 4) return d;
  if (d <= 7) return 5;
  if (d <= 15) return 6;
  if (d <= 31) return 7;
  if (d <= 63) return 8;
  return 9;
}

// Sentence distance: [0, 1, 2, 3, 4, 5-7, >=8]
inline constexpr size_t kSentenceBuckets = 7;
inline size_t sentence_bucket(size_t d) {
  if (d <= 4) return d;
  if (d <= 7) return 5;
  return 6;
}

// Subtoken distance: [0-4, 5-8, 9-16, 17-32, 33-64, 65-128, >=129]
inline constexpr size_t kTokenBuckets = 7;
inline size_t token_bucket(size_t d) {
  if (d <= 4) return 0;
  if (d <= 8) return 1;
  if (d <= 16) return 2;
  if (d <= 32) return 3;
  if (d <= 64) return 4;
  if (d <= 128) return 5;
  return 6;
}

inline size_t abs_diff(size_t a, size_t b) { return a > b ? a - b : b - a; }

}  // namespace anaforge
