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

#ifndef FEDPRIV_FEATURES_HPP_
#define FEDPRIV_FEATURES_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fedpriv {

// Sparse vector with strictly increasing indices; zeros are implicit.
struct SparseVector {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }
  double SquaredNorm() const;
  bool operator==(const SparseVector&) const = default;
};

// One vectorized, labelled example. label is 1 for treatment, 0 for control.
struct Example {
  SparseVector x;
  int label = 0;
};

enum class FeatureMode { kTermFrequency, kTfIdf };

// Hashing feature space. Immutable after Fit; safe to share across threads.
class FeatureSpace {
 public:
  static constexpr std::uint32_t kDefaultDim = 1u << 15;
  static constexpr std::uint64_t kHashSeed = 0x5eed'f00d'c0de'2024ULL;
  static constexpr std::string_view kSchema = "fedpriv.feature_space/v1";

  FeatureSpace() = default;

  std::uint32_t dim() const { return dim_; }
  FeatureMode mode() const { return mode_; }
  const std::optional<std::vector<double>>& idf() const { return idf_; }
  const std::map<std::uint32_t, std::set<std::string>>& registry() const {
    return registry_;
  }

  // Tokens observed in the fitting corpus that hash to `index`.
  const std::set<std::string>& TokensAt(std::uint32_t index) const;

  // Registry indices shared by more than one token.
  std::vector<std::uint32_t> Collisions() const;

  std::uint32_t Bucket(std::string_view token) const;

  nlohmann::json ToJson() const;
  static FeatureSpace FromJson(const nlohmann::json& j);

  friend FeatureSpace Fit(std::span<const std::string> corpus,
                          std::uint32_t dim, FeatureMode mode);

 private:
  std::uint32_t dim_ = kDefaultDim;
  FeatureMode mode_ = FeatureMode::kTermFrequency;
  std::optional<std::vector<double>> idf_;
  std::map<std::uint32_t, std::set<std::string>> registry_;
};

// Splits on ASCII whitespace.
std::vector<std::string_view> Tokenize(std::string_view text);

// Fits a hashing space on cleaned documents. dim must be a power of two >= 2.
// In TfIdf mode idf_i = ln((1 + N) / (1 + df_i)) + 1.
FeatureSpace Fit(std::span<const std::string> corpus,
                 std::uint32_t dim = FeatureSpace::kDefaultDim,
                 FeatureMode mode = FeatureMode::kTermFrequency);

// Bucketed term counts (times idf in TfIdf mode), L2-normalized.
SparseVector Vectorize(std::string_view text, const FeatureSpace& space);

}  // namespace fedpriv

#endif  // FEDPRIV_FEATURES_HPP_
