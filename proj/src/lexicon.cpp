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

#include "fedpriv/lexicon.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <utility>

#include "fedpriv/errors.hpp"

namespace fedpriv {

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "health", "negemo",   "affect",  "social",  "work",         "religion",
    "percept", "motion", "space",   "generic", "entertainment"};

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

struct Group {
  std::set<Category> categories;
  std::string_view words;  // whitespace separated
};

// Condition markers (health, negemo) are listed first; the synthetic corpus
// generator draws its planted vocabulary from their exact entries.
const std::array<Group, 12> kDefaultGroups = {{
    {{Category::kHealth},
     "tumor prescribed aching intermittent medication therapy therapist "
     "doctor hospital insomnia fatigue pills antidepressant diagnosis "
     "diagnosed symptoms clinic psychiatrist migraine nausea dose dosage "
     "chronic pain sick illness surgery prescription withdrawal appetite "
     "sleepless exhausted headache ward recovery relapse sertraline prozac "
     "counseling escalated"},
    {{Category::kNegemo, Category::kAffect},
     "sad hopeless worthless lonely crying cried tears miserable empty numb "
     "guilt ashamed hate anxious afraid scared hurt grief despair vanish "
     "witnessed suffering broken alone pathetic regret angry upset depressed "
     "awful terrible unhappy gloomy tired failure useless panic worried "
     "dread heartbroken"},
    {{Category::kAffect},
     "magnificent happy love joy great wonderful excited glad proud cheerful "
     "delighted fun smile laugh beautiful amazing calm hope grateful "
     "peaceful"},
    {{Category::kSocial},
     "friend* family mom dad brother sister talk advising advice people "
     "neighbor buddy partner wife husband kids chat together roommate "
     "cousin"},
    {{Category::kWork},
     "work* job office boss career meeting deadline governments government "
     "salary colleague project manager business employer shift contract "
     "interview resume promotion"},
    {{Category::kReligion},
     "pilgrim pilgrimage church pray* god faith mosque temple bible soul "
     "heaven spiritual worship sermon restraint"},
    {{Category::kPercept},
     "graphics scans see look* watch* hear* sound listen color bright view "
     "saw touch taste smell"},
    {{Category::kMotion},
     "removal walk* run running drive driving move* travel went arrive "
     "leave flew ride climb"},
    {{Category::kSpace},
     "eastwood environments environment inside outside above below around "
     "near far place area room upstairs downstairs"},
    {{Category::kEntertainment},
     "eurovision maverick movie* film music song concert game* netflix "
     "episode series album band festival guitar football soccer anime "
     "comic* playlist cinema podcast trailer celebrity"},
    {{Category::kGeneric},
     "premise traditionally confluence egypt penguins witchcraft ethanol "
     "fresco surfer the and of to in is it that was for on with as"},
    {{Category::kHealth, Category::kNegemo}, "overdose selfharm"},
}};

}  // namespace

std::string_view CategoryName(Category c) {
  return kCategoryNames[static_cast<std::size_t>(c)];
}

std::optional<Category> ParseCategory(std::string_view name) {
  const std::string lowered = Lower(name);
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == lowered) return static_cast<Category>(i);
  }
  return std::nullopt;
}

void Lexicon::Add(std::string entry, std::set<Category> categories) {
  entry = Lower(entry);
  if (!entry.empty() && entry.back() == '*') {
    entry.pop_back();
    prefixes_[entry].insert(categories.begin(), categories.end());
  } else {
    exact_[entry].insert(categories.begin(), categories.end());
  }
}

std::set<Category> Lexicon::Categories(std::string_view token) const {
  const std::string key = Lower(token);
  if (auto it = exact_.find(key); it != exact_.end()) return it->second;
  // Longest prefix wins.
  const std::set<Category>* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& [prefix, cats] : prefixes_) {
    if (prefix.size() >= best_len && key.starts_with(prefix)) {
      best = &cats;
      best_len = prefix.size();
    }
  }
  if (best != nullptr) return *best;
  return {Category::kGeneric};
}

bool Lexicon::Contains(std::string_view token) const {
  const std::string key = Lower(token);
  if (exact_.contains(key)) return true;
  for (const auto& [prefix, cats] : prefixes_) {
    if (key.starts_with(prefix)) return true;
  }
  return false;
}

std::vector<std::string> Lexicon::WordsIn(Category c) const {
  std::vector<std::string> out;
  for (const auto& [word, cats] : exact_) {
    if (cats.contains(c)) out.push_back(word);
  }
  return out;
}

const Lexicon& Lexicon::Default() {
  static const Lexicon lexicon = [] {
    Lexicon lex;
    for (const Group& g : kDefaultGroups) {
      std::istringstream words{std::string(g.words)};
      std::string w;
      while (words >> w) lex.Add(w, g.categories);
    }
    return lex;
  }();
  return lexicon;
}

Lexicon Lexicon::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open lexicon file '" + path + "'");
  Lexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "missing tab");
    std::set<Category> cats;
    std::istringstream list(line.substr(tab + 1));
    std::string name;
    while (std::getline(list, name, ',')) {
      auto c = ParseCategory(name);
      if (!c) throw ParseError(line_no, "unknown category '" + name + "'");
      cats.insert(*c);
    }
    lex.Add(line.substr(0, tab), std::move(cats));
  }
  return lex;
}

}  // namespace fedpriv
