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

#ifndef FEDPRIV_ANALYSIS_HPP_
#define FEDPRIV_ANALYSIS_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedpriv/features.hpp"
#include "fedpriv/lexicon.hpp"
#include "fedpriv/model.hpp"
#include "json.hpp"

namespace fedpriv {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Scores for the binary task. Class 0 of `per_class` is treatment (label 1),
// class 1 is control (label 0). Macro values are plain means over the two.
struct MetricsReport {
  std::array<ClassScores, 2> per_class;
  double macro_f1 = 0.0;
  double macro_recall = 0.0;
  std::size_t n = 0;

  const ClassScores& treatment() const { return per_class[0]; }
  const ClassScores& control() const { return per_class[1]; }
};

// Labels and predictions are 1 (treatment) or 0 (control). A class that is
// never predicted gets precision = F1 = 0; a class that never occurs gets
// recall = 0.
MetricsReport ScorePredictions(std::span<const int> labels,
                               std::span<const int> predictions);

// Threshold-0.5 predictions of `w` on `examples`.
MetricsReport Evaluate(const ParameterVector& w,
                       std::span<const Example> examples);

nlohmann::json MetricsToJson(const MetricsReport& m);
MetricsReport MetricsFromJson(const nlohmann::json& j);

struct ComparisonResult {
  double statistic = 0.0;  // W = min(W+, W-)
  double p_value = 1.0;    // exact, two-sided
  int n_effective = 0;     // pairs with non-zero difference
  bool all_zero = false;
};

// Exact two-sided Wilcoxon signed-rank test. Zero differences are dropped;
// tied magnitudes get midranks. The null distribution is counted over all
// 2^n sign assignments, so n_effective is limited to 20 (TooLarge beyond).
ComparisonResult WilcoxonSignedRank(std::span<const double> a,
                                    std::span<const double> b);

struct StabilityReport {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample SD (n - 1)
  double ci_low = 0.0;
  double ci_high = 0.0;  // mean +/- 1.96 sd / sqrt(n)
};

StabilityReport Stability(std::span<const double> values);
StabilityReport Stability(std::span<const MetricsReport> reports);

// Exact SHAP values of the logit w . x + b against a reference point:
// phi_j = w_j (x_j - background_j).
std::vector<double> ShapLinear(const ParameterVector& w,
                               const SparseVector& x,
                               std::span<const double> background);

// Mean of the examples' feature vectors.
std::vector<double> BackgroundMean(std::span<const Example> examples,
                                   std::size_t dim);

struct AttributedFeature {
  std::uint32_t index = 0;
  std::vector<std::string> tokens;  // every registry token at this index
  double mean_abs_shap = 0.0;
  double weight = 0.0;
  bool marker = false;  // some token is a health/negemo lexicon entry
};

struct AttributionReport {
  std::vector<AttributedFeature> top;
  // Counts of lexicon categories over the union of tokens in `top`.
  std::map<std::string, std::size_t> category_histogram;
  // Fraction of `top` features carrying a condition-marker token.
  double marker_share = 0.0;
  std::string background = "train_mean";
};

// Ranks features by mean |phi_j| over `eval`, ties broken by ascending index.
AttributionReport TopFeatures(const ParameterVector& w,
                              std::span<const Example> eval,
                              std::span<const double> background,
                              const FeatureSpace& space,
                              const Lexicon& lexicon, std::size_t k = 50);

nlohmann::json AttributionToJson(const AttributionReport& r);
AttributionReport AttributionFromJson(const nlohmann::json& j);

// Fixed-width ranked table of an attribution report.
std::string RenderAttributionTable(const AttributionReport& r);

}  // namespace fedpriv

#endif  // FEDPRIV_ANALYSIS_HPP_
