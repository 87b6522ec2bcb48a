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

#include "fedpriv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "fedpriv/errors.hpp"

namespace fedpriv {

namespace {

ClassScores Score(std::size_t tp, std::size_t fp, std::size_t tn,
                  std::size_t fn) {
  ClassScores s;
  s.tp = tp;
  s.fp = fp;
  s.tn = tn;
  s.fn = fn;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

nlohmann::json ClassToJson(const ClassScores& c) {
  return {{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
          {"tp", c.tp},               {"fp", c.fp},         {"tn", c.tn},
          {"fn", c.fn}};
}

ClassScores ClassFromJson(const nlohmann::json& j) {
  ClassScores c;
  c.precision = j.at("precision").get<double>();
  c.recall = j.at("recall").get<double>();
  c.f1 = j.at("f1").get<double>();
  c.tp = j.at("tp").get<std::size_t>();
  c.fp = j.at("fp").get<std::size_t>();
  c.tn = j.at("tn").get<std::size_t>();
  c.fn = j.at("fn").get<std::size_t>();
  return c;
}

}  // namespace

MetricsReport ScorePredictions(std::span<const int> labels,
                               std::span<const int> predictions) {
  if (labels.size() != predictions.size()) {
    throw DimensionMismatch(labels.size(), predictions.size());
  }
  if (labels.empty()) throw InvalidArgument("cannot score an empty set");
  std::size_t tt = 0, tc = 0, ct = 0, cc = 0;  // (label, prediction)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool y = labels[i] == 1;
    const bool p = predictions[i] == 1;
    if (y && p) ++tt;
    if (y && !p) ++tc;
    if (!y && p) ++ct;
    if (!y && !p) ++cc;
  }
  MetricsReport m;
  m.n = labels.size();
  m.per_class[0] = Score(tt, ct, cc, tc);
  m.per_class[1] = Score(cc, tc, tt, ct);
  m.macro_f1 = 0.5 * (m.per_class[0].f1 + m.per_class[1].f1);
  m.macro_recall = 0.5 * (m.per_class[0].recall + m.per_class[1].recall);
  return m;
}

MetricsReport Evaluate(const ParameterVector& w,
                       std::span<const Example> examples) {
  std::vector<int> labels, preds;
  labels.reserve(examples.size());
  preds.reserve(examples.size());
  for (const Example& ex : examples) {
    labels.push_back(ex.label);
    preds.push_back(PredictLabel(w, ex.x));
  }
  return ScorePredictions(labels, preds);
}

nlohmann::json MetricsToJson(const MetricsReport& m) {
  return {{"macro_f1", m.macro_f1},
          {"macro_recall", m.macro_recall},
          {"n", m.n},
          {"treatment", ClassToJson(m.per_class[0])},
          {"control", ClassToJson(m.per_class[1])}};
}

MetricsReport MetricsFromJson(const nlohmann::json& j) {
  MetricsReport m;
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.macro_recall = j.at("macro_recall").get<double>();
  m.n = j.at("n").get<std::size_t>();
  m.per_class[0] = ClassFromJson(j.at("treatment"));
  m.per_class[1] = ClassFromJson(j.at("control"));
  return m;
}

ComparisonResult WilcoxonSignedRank(std::span<const double> a,
                                    std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  if (a.size() < 2) throw InvalidArgument("need at least two pairs");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  ComparisonResult result;
  result.n_effective = static_cast<int>(diffs.size());
  if (diffs.empty()) {
    result.all_zero = true;
    result.statistic = 0.0;
    result.p_value = 1.0;
    return result;
  }
  if (diffs.size() > 20) {
    throw TooLarge("exact enumeration supports at most 20 non-zero pairs, got " +
                   std::to_string(diffs.size()));
  }

  // Doubled midranks are integers: tied positions i..j share rank i+j+2.
  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(diffs[x]) < std::abs(diffs[y]);
  });
  std::vector<int> rank2(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) {
      ++j;
    }
    for (std::size_t k = i; k <= j; ++k) {
      rank2[order[k]] = static_cast<int>(i + j + 2);
    }
    i = j + 1;
  }
  int plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diffs[i] > 0) plus2 += rank2[i];
  }
  const int w2 = std::min(plus2, total2 - plus2);

  // counts[s]: number of sign assignments whose doubled W+ equals s.
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(total2) + 1, 0);
  counts[0] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (int s = total2; s >= rank2[i]; --s) {
      counts[static_cast<std::size_t>(s)] +=
          counts[static_cast<std::size_t>(s - rank2[i])];
    }
  }
  std::uint64_t extreme = 0;
  for (int s = 0; s <= total2; ++s) {
    if (std::min(s, total2 - s) <= w2) {
      extreme += counts[static_cast<std::size_t>(s)];
    }
  }
  result.statistic = w2 / 2.0;
  result.p_value = std::ldexp(static_cast<double>(extreme),
                              -static_cast<int>(n));
  return result;
}

StabilityReport Stability(std::span<const double> values) {
  if (values.size() < 2) throw InvalidArgument("stability needs >= 2 values");
  StabilityReport r;
  r.n = values.size();
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / r.n;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.sd = std::sqrt(ss / static_cast<double>(r.n - 1));
  const double half = 1.96 * r.sd / std::sqrt(static_cast<double>(r.n));
  r.ci_low = r.mean - half;
  r.ci_high = r.mean + half;
  return r;
}

StabilityReport Stability(std::span<const MetricsReport> reports) {
  std::vector<double> f1;
  for (const MetricsReport& m : reports) f1.push_back(m.macro_f1);
  return Stability(f1);
}

std::vector<double> ShapLinear(const ParameterVector& w,
                               const SparseVector& x,
                               std::span<const double> background) {
  if (background.size() != w.dim()) {
    throw DimensionMismatch(w.dim(), background.size());
  }
  std::vector<double> phi(w.dim());
  for (std::size_t j = 0; j < phi.size(); ++j) {
    phi[j] = -w.weights[j] * background[j];
  }
  for (std::size_t k = 0; k < x.indices.size(); ++k) {
    const std::uint32_t j = x.indices[k];
    if (j >= w.dim()) throw DimensionMismatch(w.dim(), j + 1);
    phi[j] = w.weights[j] * (x.values[k] - background[j]);
  }
  return phi;
}

std::vector<double> BackgroundMean(std::span<const Example> examples,
                                   std::size_t dim) {
  std::vector<double> mean(dim, 0.0);
  if (examples.empty()) return mean;
  for (const Example& ex : examples) {
    for (std::size_t k = 0; k < ex.x.indices.size(); ++k) {
      mean[ex.x.indices[k]] += ex.x.values[k];
    }
  }
  for (double& m : mean) m /= static_cast<double>(examples.size());
  return mean;
}

AttributionReport TopFeatures(const ParameterVector& w,
                              std::span<const Example> eval,
                              std::span<const double> background,
                              const FeatureSpace& space,
                              const Lexicon& lexicon, std::size_t k) {
  if (background.size() != w.dim()) {
    throw DimensionMismatch(w.dim(), background.size());
  }
  if (eval.empty()) throw InvalidArgument("attribution needs examples");
  const std::size_t dim = w.dim();
  const double n = static_cast<double>(eval.size());
  // Sum of |phi_j| over examples: every example contributes |w_j bg_j| unless
  // it has a non-zero at j, in which case that term is replaced.
  std::vector<double> sum_abs(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    sum_abs[j] = n * std::abs(w.weights[j] * background[j]);
  }
  for (const Example& ex : eval) {
    for (std::size_t q = 0; q < ex.x.indices.size(); ++q) {
      const std::uint32_t j = ex.x.indices[q];
      sum_abs[j] += std::abs(w.weights[j] * (ex.x.values[q] - background[j])) -
                    std::abs(w.weights[j] * background[j]);
    }
  }
  std::vector<std::uint32_t> order(dim);
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t top_k = std::min(k, dim);
  std::partial_sort(order.begin(), order.begin() + top_k, order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (sum_abs[a] != sum_abs[b]) return sum_abs[a] > sum_abs[b];
                      return a < b;
                    });
  AttributionReport report;
  std::set<std::string> union_tokens;
  std::size_t markers = 0;
  for (std::size_t r = 0; r < top_k; ++r) {
    AttributedFeature f;
    f.index = order[r];
    f.mean_abs_shap = sum_abs[f.index] / n;
    f.weight = w.weights[f.index];
    const auto& tokens = space.TokensAt(f.index);
    f.tokens.assign(tokens.begin(), tokens.end());
    for (const std::string& t : f.tokens) {
      if (IsMarkerCategory(lexicon.Categories(t))) f.marker = true;
      union_tokens.insert(t);
    }
    if (f.marker) ++markers;
    report.top.push_back(std::move(f));
  }
  for (const std::string& t : union_tokens) {
    for (Category c : lexicon.Categories(t)) {
      ++report.category_histogram[std::string(CategoryName(c))];
    }
  }
  report.marker_share =
      top_k > 0 ? static_cast<double>(markers) / static_cast<double>(top_k)
                : 0.0;
  return report;
}

nlohmann::json AttributionToJson(const AttributionReport& r) {
  nlohmann::json top = nlohmann::json::array();
  for (const AttributedFeature& f : r.top) {
    top.push_back({{"index", f.index},
                   {"tokens", f.tokens},
                   {"mean_abs_shap", f.mean_abs_shap},
                   {"weight", f.weight},
                   {"marker", f.marker}});
  }
  return {{"top", std::move(top)},
          {"category_histogram", r.category_histogram},
          {"marker_share", r.marker_share},
          {"background", r.background}};
}

AttributionReport AttributionFromJson(const nlohmann::json& j) {
  AttributionReport r;
  for (const auto& f : j.at("top")) {
    AttributedFeature a;
    a.index = f.at("index").get<std::uint32_t>();
    a.tokens = f.at("tokens").get<std::vector<std::string>>();
    a.mean_abs_shap = f.at("mean_abs_shap").get<double>();
    a.weight = f.at("weight").get<double>();
    a.marker = f.at("marker").get<bool>();
    r.top.push_back(std::move(a));
  }
  r.category_histogram =
      j.at("category_histogram").get<std::map<std::string, std::size_t>>();
  r.marker_share = j.at("marker_share").get<double>();
  r.background = j.value("background", "train_mean");
  return r;
}

std::string RenderAttributionTable(const AttributionReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%4s  %7s  %12s  %10s  %-6s  %s\n", "rank",
                "index", "mean|shap|", "weight", "marker", "tokens");
  out << line;
  for (std::size_t i = 0; i < r.top.size(); ++i) {
    const AttributedFeature& f = r.top[i];
    std::string tokens;
    for (const std::string& t : f.tokens) {
      if (!tokens.empty()) tokens += ",";
      tokens += t;
    }
    if (tokens.empty()) tokens = "-";
    std::snprintf(line, sizeof(line), "%4zu  %7u  %12.6g  %10.4g  %-6s  ",
                  i + 1, f.index, f.mean_abs_shap, f.weight,
                  f.marker ? "yes" : "no");
    out << line << tokens << '\n';
  }
  std::snprintf(line, sizeof(line), "marker share: %.2f\n", r.marker_share);
  out << line;
  return out.str();
}

}  // namespace fedpriv
