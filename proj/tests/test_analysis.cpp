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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedpriv/analysis.hpp"
#include "fedpriv/errors.hpp"
#include "fedpriv/features.hpp"
#include "fedpriv/lexicon.hpp"
#include "fedpriv/random.hpp"

namespace fedpriv {
namespace {

std::vector<int> Repeat(int value, std::size_t n) {
  return std::vector<int>(n, value);
}

std::vector<int> Labels(std::size_t treatment, std::size_t control) {
  std::vector<int> y = Repeat(1, treatment);
  y.insert(y.end(), control, 0);
  return y;
}

double Round2(double x) { return std::round(x * 10000.0) / 100.0; }

TEST(Evaluate, DegenerateClassifiersOnFixedSplitSizes) {
  // Depression test split, everyone predicted control.
  const auto dep = Labels(528, 608);
  const auto m1 = ScorePredictions(dep, Repeat(0, dep.size()));
  EXPECT_EQ(Round2(m1.macro_f1), 34.86);
  EXPECT_EQ(Round2(m1.macro_recall), 50.00);
  EXPECT_NEAR(m1.macro_f1, 0.5 * 2.0 * (608.0 / 1136.0) / (1.0 + 608.0 / 1136.0),
              1e-15);
  EXPECT_EQ(m1.treatment().f1, 0.0);
  EXPECT_EQ(m1.treatment().precision, 0.0);

  const auto stb = Labels(171, 153);
  const auto m2 = ScorePredictions(stb, Repeat(1, stb.size()));
  EXPECT_EQ(Round2(m2.macro_f1), 34.55);
  EXPECT_NEAR(m2.macro_f1, 171.0 / 495.0, 1e-15);
  EXPECT_EQ(Round2(m2.macro_recall), 50.00);
  const auto m3 = ScorePredictions(stb, Repeat(0, stb.size()));
  // Exactly 153/477 = 0.320754..., i.e. 32.08 when rounded (32.07 truncated).
  EXPECT_NEAR(m3.macro_f1, 153.0 / 477.0, 1e-15);
  EXPECT_LT(std::abs(100.0 * m3.macro_f1 - 32.07), 0.01);
  EXPECT_EQ(Round2(m3.macro_recall), 50.00);
}

TEST(Evaluate, PerfectAndConfusion) {
  const std::vector<int> y = {1, 1, 0, 0, 0};
  const auto perfect = ScorePredictions(y, y);
  EXPECT_EQ(perfect.macro_f1, 1.0);
  EXPECT_EQ(perfect.macro_recall, 1.0);

  const std::vector<int> p = {1, 0, 1, 0, 0};
  const auto m = ScorePredictions(y, p);
  EXPECT_EQ(m.treatment().tp, 1u);
  EXPECT_EQ(m.treatment().fn, 1u);
  EXPECT_EQ(m.treatment().fp, 1u);
  EXPECT_DOUBLE_EQ(m.treatment().f1, 0.5);
  EXPECT_DOUBLE_EQ(m.control().recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.control().f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, (0.5 + 2.0 / 3.0) / 2.0);
  EXPECT_THROW(ScorePredictions(y, std::vector<int>{1}), DimensionMismatch);
}

TEST(Evaluate, ModelThreshold) {
  ParameterVector w(2);
  w.weights = {4.0, -4.0};
  std::vector<Example> ex(2);
  ex[0].x = {{0}, {1.0}};
  ex[0].label = 1;
  ex[1].x = {{1}, {1.0}};
  ex[1].label = 0;
  EXPECT_EQ(Evaluate(w, ex).macro_f1, 1.0);
  const auto j = MetricsToJson(Evaluate(w, ex));
  EXPECT_EQ(MetricsToJson(MetricsFromJson(j)), j);
}

// Independent oracle: enumerate every sign vector over (mid)ranks.
double BruteForceP(const std::vector<double>& a, const std::vector<double>& b,
                   double* w_out) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  const std::size_t n = d.size();
  if (n == 0) {
    *w_out = 0;
    return 1.0;
  }
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++below;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = below + (equal + 1.0) / 2.0;
  }
  double total = 0, plus = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank[i];
    if (d[i] > 0) plus += rank[i];
  }
  const double w = std::min(plus, total - plus);
  std::size_t extreme = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) s += rank[i];
    }
    if (std::min(s, total - s) <= w + 1e-9) ++extreme;
  }
  *w_out = w;
  return static_cast<double>(extreme) / static_cast<double>(std::size_t{1} << n);
}

TEST(Wilcoxon, MatchesBruteForceEnumeration) {
  Rng rng(123);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.UniformIndex(11);  // 2..12
    std::vector<double> a(n), b(n);
    const bool coarse = trial % 2 == 0;  // coarse grids force ties and zeros
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = coarse ? std::round(rng.Normal() * 3) / 4 : rng.Normal();
      b[i] = coarse ? std::round(rng.Normal() * 3) / 4 : rng.Normal();
    }
    double w = 0;
    const double p = BruteForceP(a, b, &w);
    const ComparisonResult r = WilcoxonSignedRank(a, b);
    EXPECT_DOUBLE_EQ(r.p_value, p) << "trial " << trial;
    EXPECT_DOUBLE_EQ(r.statistic, w) << "trial " << trial;
    EXPECT_LE(r.n_effective, static_cast<int>(n));
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

TEST(Wilcoxon, HandCases) {
  const std::vector<double> a = {0.9, 0.8, 0.7}, b = {0.5, 0.6, 0.65};
  const auto r = WilcoxonSignedRank(a, b);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 0.25);
  EXPECT_EQ(r.n_effective, 3);

  const auto same = WilcoxonSignedRank(a, a);
  EXPECT_TRUE(same.all_zero);
  EXPECT_EQ(same.p_value, 1.0);
  EXPECT_EQ(same.statistic, 0.0);
}

TEST(Wilcoxon, SevenPairsWithTailMassFourteen) {
  // Ranks 1..7 with ranks 1 and 5 negative: W = 6, and 14 of the 128 sign
  // vectors have W+ <= 6, so the two-sided p is 28/128.
  std::vector<double> a, b;
  for (int r = 1; r <= 7; ++r) {
    const double d = 0.01 * r * ((r == 1 || r == 5) ? -1 : 1);
    a.push_back(0.5 + d);
    b.push_back(0.5);
  }
  double w = 0;
  EXPECT_EQ(BruteForceP(a, b, &w), 0.21875);
  const auto r = WilcoxonSignedRank(a, b);
  EXPECT_EQ(r.statistic, 6.0);
  EXPECT_EQ(r.p_value, 0.21875);
  EXPECT_LE(r.n_effective, 7);
}

TEST(Wilcoxon, Limits) {
  std::vector<double> a(21), b(21, 0.0);
  for (int i = 0; i < 21; ++i) a[i] = i + 1;
  EXPECT_THROW(WilcoxonSignedRank(a, b), TooLarge);
  a.resize(20);
  b.resize(20);
  EXPECT_NEAR(WilcoxonSignedRank(a, b).p_value, std::ldexp(2.0, -20), 1e-18);
  EXPECT_THROW(WilcoxonSignedRank(std::vector<double>{1}, std::vector<double>{2}),
               InvalidArgument);
}

TEST(Stability, Examples) {
  const std::vector<double> two = {0.8, 0.9};
  const auto s = Stability(two);
  EXPECT_NEAR(s.mean, 0.85, 1e-15);
  EXPECT_NEAR(s.sd, 0.0707, 1e-4);
  EXPECT_NEAR(s.sd, std::sqrt(0.005), 1e-15);
  EXPECT_NEAR(s.ci_high - s.mean, 1.96 * s.sd / std::sqrt(2.0), 1e-15);

  const std::vector<double> same(5, 0.7);
  const auto z = Stability(same);
  EXPECT_EQ(z.sd, 0.0);
  EXPECT_EQ(z.ci_low, z.ci_high);
  EXPECT_THROW(Stability(std::vector<double>{0.5}), InvalidArgument);
}

SparseVector RandomSparse(Rng& rng, std::size_t dim) {
  SparseVector x;
  for (std::size_t j = 0; j < dim; ++j) {
    if (rng.Uniform() < 0.3) {
      x.indices.push_back(static_cast<std::uint32_t>(j));
      x.values.push_back(rng.Normal());
    }
  }
  return x;
}

TEST(Shap, HandExample) {
  ParameterVector w(2);
  w.weights = {2.0, -1.0};
  const SparseVector x{{0, 1}, {1.0, 1.0}};
  const std::vector<double> bg = {0.0, 0.0};
  const auto phi = ShapLinear(w, x, bg);
  EXPECT_EQ(phi, (std::vector<double>{2.0, -1.0}));
  EXPECT_EQ(phi[0] + phi[1], 1.0);
}

TEST(Shap, EfficiencyOverRandomInstances) {
  Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t dim = 1 + rng.UniformIndex(40);
    ParameterVector w(dim);
    for (double& v : w.weights) v = rng.Normal();
    w.bias = rng.Normal();
    const SparseVector x = RandomSparse(rng, dim);
    std::vector<double> bg(dim);
    for (double& v : bg) v = rng.Uniform();
    const auto phi = ShapLinear(w, x, bg);
    double sum = 0, f_bg = w.bias;
    for (std::size_t j = 0; j < dim; ++j) {
      sum += phi[j];
      f_bg += w.weights[j] * bg[j];
    }
    EXPECT_NEAR(sum, Logit(w, x) - f_bg, 1e-9);
  }
}

TEST(Shap, InvariancesAndZeroAtBackground) {
  ParameterVector w(3);
  w.weights = {0.5, -2.0, 3.0};
  const SparseVector x{{0, 2}, {0.4, 0.9}};
  const std::vector<double> at_x = {0.4, 0.0, 0.9};
  for (double v : ShapLinear(w, x, at_x)) EXPECT_EQ(v, 0.0);

  const std::vector<double> bg = {0.1, 0.2, 0.3};
  const auto phi = ShapLinear(w, x, bg);
  const double alpha = 4.0;
  ParameterVector ws = w;
  ws.weights[2] /= alpha;
  SparseVector xs = x;
  xs.values[1] *= alpha;
  std::vector<double> bgs = bg;
  bgs[2] *= alpha;
  EXPECT_NEAR(ShapLinear(ws, xs, bgs)[2], phi[2], 1e-15);
}

TEST(BackgroundMean, Averages) {
  std::vector<Example> ex(2);
  ex[0].x = {{0, 2}, {1.0, 2.0}};
  ex[1].x = {{2}, {4.0}};
  EXPECT_EQ(BackgroundMean(ex, 3), (std::vector<double>{0.5, 0.0, 3.0}));
}

TEST(TopFeatures, RanksAndCategorizes) {
  const std::vector<std::string> corpus = {"tumor pain movie zorblax",
                                           "movie quux"};
  const FeatureSpace space = Fit(corpus, 1u << 15);
  std::vector<Example> eval;
  for (const auto& doc : corpus) eval.push_back({Vectorize(doc, space), 0});
  const auto bg = BackgroundMean(eval, space.dim());
  ParameterVector w(space.dim());
  w.weights[space.Bucket("tumor")] = 5.0;
  w.weights[space.Bucket("zorblax")] = -1.0;
  w.weights[space.Bucket("quux")] = 0.5;

  const AttributionReport r =
      TopFeatures(w, eval, bg, space, Lexicon::Default(), 3);
  ASSERT_EQ(r.top.size(), 3u);
  EXPECT_EQ(r.top[0].index, space.Bucket("tumor"));
  EXPECT_TRUE(r.top[0].marker);
  EXPECT_EQ(r.top[1].index, space.Bucket("zorblax"));
  EXPECT_FALSE(r.top[1].marker);
  EXPECT_NEAR(r.marker_share, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(r.category_histogram.at("health"), 1u);
  for (std::size_t i = 1; i < r.top.size(); ++i) {
    EXPECT_GE(r.top[i - 1].mean_abs_shap, r.top[i].mean_abs_shap);
  }
  const auto j = AttributionToJson(r);
  EXPECT_EQ(AttributionToJson(AttributionFromJson(j)), j);
  EXPECT_NE(RenderAttributionTable(r).find("tumor"), std::string::npos);
}

TEST(TopFeatures, EmptyLexiconIsAllGeneric) {
  const std::vector<std::string> corpus = {"tumor sad", "happy"};
  const FeatureSpace space = Fit(corpus, 1u << 10);
  std::vector<Example> eval;
  for (const auto& doc : corpus) eval.push_back({Vectorize(doc, space), 1});
  ParameterVector w(space.dim());
  for (double& v : w.weights) v = 1.0;
  const Lexicon empty;
  const auto r = TopFeatures(w, eval, BackgroundMean(eval, space.dim()), space,
                             empty, 3);
  EXPECT_EQ(r.marker_share, 0.0);
  ASSERT_EQ(r.category_histogram.size(), 1u);
  EXPECT_EQ(r.category_histogram.begin()->first, "generic");
  EXPECT_TRUE(empty.Categories("tumor").contains(Category::kGeneric));
}

TEST(Lexicon, LookupRules) {
  const Lexicon& lex = Lexicon::Default();
  EXPECT_TRUE(lex.Categories("tumor").contains(Category::kHealth));
  EXPECT_TRUE(lex.Categories("friendship").contains(Category::kSocial));
  EXPECT_TRUE(lex.Categories("zzqx").contains(Category::kGeneric));
  EXPECT_FALSE(lex.Contains("zzqx"));
  Lexicon custom;
  custom.Add("sad", {Category::kNegemo});
  custom.Add("sa*", {Category::kSpace});
  custom.Add("sadn*", {Category::kAffect});
  EXPECT_TRUE(custom.Categories("sad").contains(Category::kNegemo));
  EXPECT_TRUE(custom.Categories("sadness").contains(Category::kAffect));
  EXPECT_TRUE(custom.Categories("salt").contains(Category::kSpace));
}

}  // namespace
}  // namespace fedpriv
