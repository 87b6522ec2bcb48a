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

#include "fedpriv/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_set>

#include "fedpriv/errors.hpp"
#include "fedpriv/random.hpp"

namespace fedpriv {

namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

void ValidateDim(std::uint32_t dim) {
  if (dim < 2 || !std::has_single_bit(dim)) {
    throw InvalidArgument("feature dim must be a power of two >= 2, got " +
                          std::to_string(dim));
  }
}

}  // namespace

double SparseVector::SquaredNorm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

std::vector<std::string_view> Tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsSpace(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !IsSpace(text[j])) ++j;
    if (j > i) tokens.push_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::uint32_t FeatureSpace::Bucket(std::string_view token) const {
  return static_cast<std::uint32_t>(StableHash(token, kHashSeed) &
                                    (dim_ - 1));
}

const std::set<std::string>& FeatureSpace::TokensAt(
    std::uint32_t index) const {
  static const std::set<std::string> kEmpty;
  auto it = registry_.find(index);
  return it == registry_.end() ? kEmpty : it->second;
}

std::vector<std::uint32_t> FeatureSpace::Collisions() const {
  std::vector<std::uint32_t> out;
  for (const auto& [index, tokens] : registry_) {
    if (tokens.size() > 1) out.push_back(index);
  }
  return out;
}

FeatureSpace Fit(std::span<const std::string> corpus, std::uint32_t dim,
                 FeatureMode mode) {
  ValidateDim(dim);
  if (corpus.empty()) throw InvalidArgument("cannot fit on an empty corpus");
  FeatureSpace space;
  space.dim_ = dim;
  space.mode_ = mode;
  std::vector<std::uint32_t> df(mode == FeatureMode::kTfIdf ? dim : 0, 0);
  std::unordered_set<std::uint32_t> seen;
  for (const std::string& doc : corpus) {
    seen.clear();
    for (std::string_view tok : Tokenize(doc)) {
      const std::uint32_t b = space.Bucket(tok);
      space.registry_[b].emplace(tok);
      seen.insert(b);
    }
    if (mode == FeatureMode::kTfIdf) {
      for (std::uint32_t b : seen) ++df[b];
    }
  }
  if (mode == FeatureMode::kTfIdf) {
    const double n = static_cast<double>(corpus.size());
    std::vector<double> idf(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      idf[i] = std::log((1.0 + n) / (1.0 + df[i])) + 1.0;
    }
    space.idf_ = std::move(idf);
  }
  return space;
}

SparseVector Vectorize(std::string_view text, const FeatureSpace& space) {
  std::vector<std::uint32_t> buckets;
  for (std::string_view tok : Tokenize(text)) {
    buckets.push_back(space.Bucket(tok));
  }
  std::sort(buckets.begin(), buckets.end());
  SparseVector v;
  for (std::size_t i = 0; i < buckets.size();) {
    std::size_t j = i;
    while (j < buckets.size() && buckets[j] == buckets[i]) ++j;
    double value = static_cast<double>(j - i);
    if (space.idf()) value *= (*space.idf())[buckets[i]];
    v.indices.push_back(buckets[i]);
    v.values.push_back(value);
    i = j;
  }
  const double norm = std::sqrt(v.SquaredNorm());
  if (norm > 0.0) {
    for (double& x : v.values) x /= norm;
  }
  return v;
}

nlohmann::json FeatureSpace::ToJson() const {
  nlohmann::json j;
  j["schema"] = kSchema;
  j["dim"] = dim_;
  j["mode"] = mode_ == FeatureMode::kTfIdf ? "tfidf" : "tf";
  j["hash"] = "fnv1a64+splitmix64";
  j["hash_seed"] = kHashSeed;
  if (idf_) j["idf"] = *idf_;
  nlohmann::json reg = nlohmann::json::array();
  for (const auto& [index, tokens] : registry_) {
    reg.push_back({index, tokens});
  }
  j["registry"] = std::move(reg);
  return j;
}

FeatureSpace FeatureSpace::FromJson(const nlohmann::json& j) {
  if (j.value("schema", "") != kSchema) {
    throw InvalidArgument("unsupported feature space schema");
  }
  FeatureSpace space;
  space.dim_ = j.at("dim").get<std::uint32_t>();
  ValidateDim(space.dim_);
  space.mode_ = j.at("mode").get<std::string>() == "tfidf"
                    ? FeatureMode::kTfIdf
                    : FeatureMode::kTermFrequency;
  if (j.contains("idf")) space.idf_ = j["idf"].get<std::vector<double>>();
  if (space.idf_.has_value() != (space.mode_ == FeatureMode::kTfIdf)) {
    throw InvalidArgument("idf must be present iff mode is tfidf");
  }
  for (const auto& entry : j.at("registry")) {
    space.registry_[entry[0].get<std::uint32_t>()] =
        entry[1].get<std::set<std::string>>();
  }
  return space;
}

}  // namespace fedpriv
