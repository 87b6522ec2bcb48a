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

#include "fedpriv/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <unordered_set>
#include <utility>

#include "fedpriv/errors.hpp"
#include "fedpriv/random.hpp"
#include "json.hpp"

namespace fedpriv {

namespace {

using ContractionEntry = std::pair<std::string_view, std::string_view>;

constexpr std::array<ContractionEntry, 44> kContractions = {{
    {"ain't", "am not"},       {"aren't", "are not"},
    {"can't", "cannot"},       {"couldn't", "could not"},
    {"didn't", "did not"},     {"doesn't", "does not"},
    {"don't", "do not"},       {"hadn't", "had not"},
    {"hasn't", "has not"},     {"haven't", "have not"},
    {"he'd", "he would"},      {"he'll", "he will"},
    {"he's", "he is"},         {"i'd", "i would"},
    {"i'll", "i will"},        {"i'm", "i am"},
    {"i've", "i have"},        {"isn't", "is not"},
    {"it'd", "it would"},      {"it'll", "it will"},
    {"it's", "it is"},         {"let's", "let us"},
    {"shouldn't", "should not"}, {"she'd", "she would"},
    {"she'll", "she will"},    {"she's", "she is"},
    {"that's", "that is"},     {"there's", "there is"},
    {"they'd", "they would"},  {"they'll", "they will"},
    {"they're", "they are"},   {"they've", "they have"},
    {"wasn't", "was not"},     {"we'd", "we would"},
    {"we're", "we are"},       {"we've", "we have"},
    {"weren't", "were not"},   {"what's", "what is"},
    {"won't", "will not"},     {"wouldn't", "would not"},
    {"you'd", "you would"},    {"you'll", "you will"},
    {"you're", "you are"},     {"you've", "you have"},
}};

std::string ToLowerAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// Maps U+2019 (right single quotation mark) to an ASCII apostrophe.
std::string NormalizeApostrophes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
        static_cast<unsigned char>(s[i + 1]) == 0x80 &&
        static_cast<unsigned char>(s[i + 2]) == 0x99) {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

bool IsUrl(std::string_view lower) {
  return lower.starts_with("http://") || lower.starts_with("https://") ||
         lower.starts_with("www.");
}

// Digits plus numeric punctuation only, with at least one digit.
bool IsNumeric(std::string_view tok) {
  bool digit = false;
  for (char c : tok) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (std::string_view(".,:;/-+%$#()").find(c) ==
               std::string_view::npos) {
      return false;
    }
  }
  return digit;
}

std::string_view ExpandContraction(std::string_view lower) {
  for (const auto& [from, to] : kContractions) {
    if (from == lower) return to;
  }
  return lower;
}

// Pronounceable pseudo-words outside the lexicon, stable across seeds.
std::vector<std::string> GenericVocabulary(int size, const Lexicon& lexicon) {
  static constexpr std::string_view kConsonants = "bdfghklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  Rng rng(0x9e4e41c0ULL);
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  words.reserve(static_cast<std::size_t>(size));
  while (static_cast<int>(words.size()) < size) {
    const std::size_t syllables = 2 + rng.UniformIndex(3);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w.push_back(kConsonants[rng.UniformIndex(kConsonants.size())]);
      w.push_back(kVowels[rng.UniformIndex(kVowels.size())]);
    }
    if (lexicon.Contains(w) || !seen.insert(w).second) continue;
    words.push_back(std::move(w));
  }
  return words;
}

std::vector<std::string> ExclusiveWords(const Lexicon& lexicon, Category in,
                                        Category out, int count,
                                        const char* what) {
  std::vector<std::string> words;
  for (std::string& w : lexicon.WordsIn(in)) {
    if (!lexicon.Categories(w).contains(out)) words.push_back(std::move(w));
  }
  if (static_cast<int>(words.size()) < count) {
    throw InvalidArgument(std::string("lexicon has only ") +
                          std::to_string(words.size()) + " " + what +
                          " words, spec requests " + std::to_string(count));
  }
  words.resize(static_cast<std::size_t>(count));
  return words;
}

// Standard normal quantile by bisection on the CDF.
double NormalQuantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::string_view LabelName(Label l) {
  return l == Label::kTreatment ? "treatment" : "control";
}

std::optional<Label> ParseLabel(std::string_view name) {
  if (name == "treatment") return Label::kTreatment;
  if (name == "control") return Label::kControl;
  return std::nullopt;
}

std::string Preprocess(std::string_view text) {
  const std::string normalized = NormalizeApostrophes(text);
  std::vector<std::string> kept;
  bool leading = true;
  for (std::string_view tok : Tokenize(normalized)) {
    const std::string lower = ToLowerAscii(tok);
    if (tok.front() == '@' || IsUrl(lower) || IsNumeric(tok)) continue;
    if (leading && lower == "rt") continue;
    leading = false;
    kept.emplace_back(ExpandContraction(lower));
  }
  std::string out;
  for (const std::string& k : kept) {
    if (!out.empty()) out.push_back(' ');
    out += k;
  }
  return out;
}

DatasetSplit StratifiedSplit(std::span<const UserRecord> records,
                             std::uint64_t seed) {
  std::vector<UserRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const UserRecord& a, const UserRecord& b) {
              return a.user_id < b.user_id;
            });
  DatasetSplit split;
  for (Label label : {Label::kTreatment, Label::kControl}) {
    std::vector<UserRecord> group;
    for (const UserRecord& r : sorted) {
      if (r.label == label) group.push_back(r);
    }
    const std::size_t n = group.size();
    const std::size_t n_train = n * 7 / 10;
    const std::size_t n_val = n / 10;
    const std::size_t n_test = n - n_train - n_val;
    if (n_train == 0 || n_val == 0 || n_test == 0) {
      throw TooFewRecords("label '" + std::string(LabelName(label)) +
                          "' has " + std::to_string(n) +
                          " records; every split needs at least one");
    }
    Rng rng(DeriveSeed(seed, {static_cast<std::uint64_t>(LabelValue(label))}));
    rng.Shuffle(group);
    auto it = std::make_move_iterator(group.begin());
    split.train.insert(split.train.end(), it, it + n_train);
    split.validation.insert(split.validation.end(), it + n_train,
                            it + n_train + n_val);
    split.test.insert(split.test.end(), it + n_train + n_val,
                      std::make_move_iterator(group.end()));
  }
  auto by_id = [](const UserRecord& a, const UserRecord& b) {
    return a.user_id < b.user_id;
  };
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.validation.begin(), split.validation.end(), by_id);
  std::sort(split.test.begin(), split.test.end(), by_id);
  return split;
}

void SynthSpec::Validate() const {
  if (n_treatment <= 0 || n_control <= 0) {
    throw InvalidArgument("synth user counts must be positive");
  }
  if (vocab_marker_health <= 0 || vocab_marker_negemo <= 0 ||
      vocab_generic <= 0 || vocab_entertainment <= 0) {
    throw InvalidArgument("synth vocabulary sizes must be positive");
  }
  // Zero density is accepted as the no-signal control condition.
  if (!(marker_density >= 0.0 && marker_density < 1.0)) {
    throw InvalidArgument("marker_density must lie in [0, 1)");
  }
  if (!(entertainment_share >= 0.0 &&
        marker_density + entertainment_share < 1.0)) {
    throw InvalidArgument("entertainment_share out of range");
  }
  if (!(token_mean > 0.0) || !(token_sd > 0.0)) {
    throw InvalidArgument("token count mean and SD must be positive");
  }
}

std::vector<std::string> PlantedMarkers(const SynthSpec& spec,
                                        const Lexicon& lexicon) {
  auto health = ExclusiveWords(lexicon, Category::kHealth, Category::kNegemo,
                               spec.vocab_marker_health, "health");
  auto negemo = ExclusiveWords(lexicon, Category::kNegemo, Category::kHealth,
                               spec.vocab_marker_negemo, "negemo");
  health.insert(health.end(), negemo.begin(), negemo.end());
  return health;
}

std::vector<UserRecord> SynthGenerate(const SynthSpec& spec,
                                      const Lexicon& lexicon) {
  spec.Validate();
  const auto health = ExclusiveWords(lexicon, Category::kHealth,
                                     Category::kNegemo,
                                     spec.vocab_marker_health, "health");
  const auto negemo = ExclusiveWords(lexicon, Category::kNegemo,
                                     Category::kHealth,
                                     spec.vocab_marker_negemo, "negemo");
  std::vector<std::string> entertainment =
      lexicon.WordsIn(Category::kEntertainment);
  if (static_cast<int>(entertainment.size()) < spec.vocab_entertainment) {
    throw InvalidArgument("lexicon has too few entertainment words");
  }
  entertainment.resize(static_cast<std::size_t>(spec.vocab_entertainment));
  const auto generic = GenericVocabulary(spec.vocab_generic, lexicon);

  const double ratio = spec.token_sd / spec.token_mean;
  const double log_var = std::log1p(ratio * ratio);
  const double log_sd = std::sqrt(log_var);
  const double log_mu = std::log(spec.token_mean) - 0.5 * log_var;

  const int n_users = spec.n_treatment + spec.n_control;
  std::vector<Label> labels;
  labels.insert(labels.end(), static_cast<std::size_t>(spec.n_treatment),
                Label::kTreatment);
  labels.insert(labels.end(), static_cast<std::size_t>(spec.n_control),
                Label::kControl);
  Rng label_rng(DeriveSeed(spec.seed, {0}));
  label_rng.Shuffle(labels);

  // Token counts use stratified log-normal quantiles: user u gets the
  // midpoint of stratum strata[u], so sample moments track the target.
  std::vector<std::size_t> strata(static_cast<std::size_t>(n_users));
  std::iota(strata.begin(), strata.end(), std::size_t{0});
  Rng strata_rng(DeriveSeed(spec.seed, {2}));
  strata_rng.Shuffle(strata);

  std::vector<UserRecord> users;
  users.reserve(static_cast<std::size_t>(n_users));
  for (int u = 0; u < n_users; ++u) {
    Rng rng(DeriveSeed(spec.seed, {1, static_cast<std::uint64_t>(u)}));
    UserRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "user%05d", u);
    rec.user_id = id;
    rec.label = labels[static_cast<std::size_t>(u)];
    const double density = rec.label == Label::kTreatment
                               ? spec.marker_density
                               : spec.marker_density / 10.0;
    const double q = (static_cast<double>(strata[static_cast<std::size_t>(u)]) + 0.5) /
                     static_cast<double>(n_users);
    const double drawn = std::exp(log_mu + log_sd * NormalQuantile(q));
    const auto n_tokens =
        static_cast<std::size_t>(std::max(1.0, std::round(drawn)));

    std::string post;
    std::size_t post_len = 0;
    std::size_t post_target = 10 + rng.UniformIndex(31);
    auto flush = [&]() {
      if (rng.Uniform() < 0.05) post += " https://t.co/x" + std::to_string(u);
      rec.posts.push_back(std::move(post));
      post.clear();
      post_len = 0;
      post_target = 10 + rng.UniformIndex(31);
    };
    for (std::size_t i = 0; i < n_tokens; ++i) {
      if (post_len == 0 && rng.Uniform() < 0.1) {
        post = "RT @friend" + std::to_string(rng.UniformIndex(1000));
      }
      const double x = rng.Uniform();
      const std::string* tok;
      if (x < density) {
        tok = rng.Uniform() < 0.5 ? &health[rng.UniformIndex(health.size())]
                                  : &negemo[rng.UniformIndex(negemo.size())];
      } else if (x < density + spec.entertainment_share) {
        tok = &entertainment[rng.UniformIndex(entertainment.size())];
      } else {
        tok = &generic[rng.UniformIndex(generic.size())];
      }
      if (!post.empty()) post.push_back(' ');
      post += *tok;
      if (++post_len == post_target) flush();
    }
    if (post_len > 0) flush();
    users.push_back(std::move(rec));
  }
  return users;
}

std::string UserText(const UserRecord& record) {
  std::string text;
  for (const std::string& p : record.posts) {
    if (p.empty()) continue;
    if (!text.empty()) text.push_back(' ');
    text += p;
  }
  return text;
}

std::vector<Example> VectorizeUsers(std::span<const UserRecord> users,
                                    const FeatureSpace& space) {
  std::vector<Example> out;
  out.reserve(users.size());
  for (const UserRecord& u : users) {
    out.push_back({Vectorize(UserText(u), space), LabelValue(u.label)});
  }
  return out;
}

std::vector<ClientShard> PartitionClients(std::span<const UserRecord> users,
                                          const FeatureSpace& space) {
  std::vector<ClientShard> shards;
  shards.reserve(users.size());
  for (const UserRecord& u : users) {
    ClientShard shard;
    shard.client_id = u.user_id;
    shard.examples.push_back(
        {Vectorize(UserText(u), space), LabelValue(u.label)});
    shard.empty_history = shard.examples.front().x.nnz() == 0;
    shards.push_back(std::move(shard));
  }
  return shards;
}

std::vector<UserRecord> LoadDataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open dataset '" + path + "'");
  std::vector<UserRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
    for (const char* key : {"user_id", "label", "posts"}) {
      if (!j.contains(key)) {
        throw ParseError(line_no, std::string("missing \"") + key + "\"");
      }
    }
    if (!j["user_id"].is_string() || !j["label"].is_string() ||
        !j["posts"].is_array()) {
      throw ParseError(line_no, "field has the wrong type");
    }
    UserRecord rec;
    rec.user_id = j["user_id"].get<std::string>();
    auto label = ParseLabel(j["label"].get<std::string>());
    if (!label) throw ParseError(line_no, "label must be treatment|control");
    rec.label = *label;
    if (j["posts"].empty()) throw ParseError(line_no, "posts is empty");
    for (const auto& p : j["posts"]) {
      if (!p.is_string()) throw ParseError(line_no, "post is not a string");
      rec.posts.push_back(Preprocess(p.get<std::string>()));
    }
    if (!ids.insert(rec.user_id).second) throw DuplicateUserId(rec.user_id);
    records.push_back(std::move(rec));
  }
  return records;
}

void WriteDataset(const std::string& path,
                  std::span<const UserRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write dataset '" + path + "'");
  for (const UserRecord& r : records) {
    nlohmann::json j = {{"user_id", r.user_id},
                        {"label", LabelName(r.label)},
                        {"posts", r.posts}};
    out << j.dump() << '\n';
  }
}

}  // namespace fedpriv
