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

#ifndef FEDPRIV_CORPUS_HPP_
#define FEDPRIV_CORPUS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedpriv/features.hpp"
#include "fedpriv/lexicon.hpp"

namespace fedpriv {

enum class Label { kTreatment, kControl };

inline int LabelValue(Label l) { return l == Label::kTreatment ? 1 : 0; }
std::string_view LabelName(Label l);
std::optional<Label> ParseLabel(std::string_view name);

// One user. posts holds at least one entry (entries may be empty strings).
struct UserRecord {
  std::string user_id;
  Label label = Label::kControl;
  std::vector<std::string> posts;

  bool operator==(const UserRecord&) const = default;
};

struct DatasetSplit {
  std::vector<UserRecord> train;
  std::vector<UserRecord> validation;
  std::vector<UserRecord> test;
};

// Parameters of the synthetic user-level corpus.
//
// Every user draws a token count from a log-normal with the given mean and
// SD (clipped at 1). Each token is a marker with probability marker_density
// for treatment users and marker_density / 10 for control users, split evenly
// between health and negative-emotion markers; otherwise it is an
// entertainment token with probability entertainment_share, else generic.
// Marker and entertainment vocabularies are the exact entries of the bundled
// lexicon; generic tokens are pseudo-words outside it.
struct SynthSpec {
  int n_treatment = 93;
  int n_control = 107;
  int vocab_marker_health = 30;
  int vocab_marker_negemo = 30;
  int vocab_generic = 12000;
  int vocab_entertainment = 20;
  double marker_density = 0.15;
  double entertainment_share = 0.05;
  double token_mean = 6324.0;
  double token_sd = 10686.0;
  std::uint64_t seed = 1;

  void Validate() const;
};

// Cleans one raw post: drops leading RT markers, @-mentions, URLs and
// standalone numeric tokens, expands English contractions, lowercases, and
// joins the surviving tokens with single spaces.
std::string Preprocess(std::string_view text);

// Stratified 70/10/20 split by label. Records are sorted by user_id before a
// seeded shuffle, so the result does not depend on input order. Per label,
// train = floor(0.7 n), validation = floor(0.1 n), test = the rest.
DatasetSplit StratifiedSplit(std::span<const UserRecord> records,
                             std::uint64_t seed);

std::vector<UserRecord> SynthGenerate(const SynthSpec& spec,
                                      const Lexicon& lexicon =
                                          Lexicon::Default());

// Tokens the generator plants as condition markers for `spec`.
std::vector<std::string> PlantedMarkers(const SynthSpec& spec,
                                        const Lexicon& lexicon =
                                            Lexicon::Default());

// Joins a user's posts with single spaces.
std::string UserText(const UserRecord& record);

struct ClientShard {
  std::string client_id;
  std::vector<Example> examples;
  // Set when the user's history vectorizes to the zero vector.
  bool empty_history = false;

  std::size_t example_count() const { return examples.size(); }
};

// One shard per user, holding one example: the concatenated post history.
std::vector<ClientShard> PartitionClients(std::span<const UserRecord> users,
                                          const FeatureSpace& space);

// Vectorizes each user's concatenated history.
std::vector<Example> VectorizeUsers(std::span<const UserRecord> users,
                                    const FeatureSpace& space);

// JSON Lines: {"user_id": str, "label": "treatment"|"control",
// "posts": [str, ...]}. Every post is passed through Preprocess.
std::vector<UserRecord> LoadDataset(const std::string& path);

// Writes records in the LoadDataset schema (posts as stored).
void WriteDataset(const std::string& path,
                  std::span<const UserRecord> records);

}  // namespace fedpriv

#endif  // FEDPRIV_CORPUS_HPP_
