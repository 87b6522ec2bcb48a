// Copyright 2026 The fedpriv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDPRIV_LEXICON_HPP_
#define FEDPRIV_LEXICON_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fedpriv {

enum class Category {
  kHealth,
  kNegemo,
  kAffect,
  kSocial,
  kWork,
  kReligion,
  kPercept,
  kMotion,
  kSpace,
  kGeneric,
  kEntertainment,
};

inline constexpr int kNumCategories = 11;

std::string_view CategoryName(Category c);
std::optional<Category> ParseCategory(std::string_view name);

// Open psycholinguistic word list. Lookup is lowercase-exact first, then the
// longest matching prefix entry (entries written with a trailing '*').
// Tokens matching nothing fall back to {generic}.
class Lexicon {
 public:
  Lexicon() = default;

  void Add(std::string entry, std::set<Category> categories);

  std::set<Category> Categories(std::string_view token) const;

  // True iff `token` matches an entry (exact or wildcard).
  bool Contains(std::string_view token) const;

  // Exact (non-wildcard) entries carrying `c`, sorted.
  std::vector<std::string> WordsIn(Category c) const;

  bool empty() const { return exact_.empty() && prefixes_.empty(); }
  std::size_t size() const { return exact_.size() + prefixes_.size(); }

  // Bundled default word list (~300 entries).
  static const Lexicon& Default();

  // Tab-separated file: `token<TAB>cat1,cat2`. '#' starts a comment line.
  static Lexicon Load(const std::string& path);

 private:
  std::map<std::string, std::set<Category>, std::less<>> exact_;
  std::map<std::string, std::set<Category>, std::less<>> prefixes_;
};

// True iff the category set marks a planted condition marker.
inline bool IsMarkerCategory(const std::set<Category>& cats) {
  return cats.contains(Category::kHealth) || cats.contains(Category::kNegemo);
}

}  // namespace fedpriv

#endif  // FEDPRIV_LEXICON_HPP_
