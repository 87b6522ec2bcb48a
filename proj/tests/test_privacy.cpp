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

#include <cmath>
#include <vector>

#include "fedpriv/errors.hpp"
#include "fedpriv/privacy.hpp"
#include "fedpriv/random.hpp"

namespace fedpriv {
namespace {

ParameterVector Vec(std::vector<double> w, double b = 0.0) {
  ParameterVector p;
  p.weights = std::move(w);
  p.bias = b;
  return p;
}

TEST(ClipUpdate, Examples) {
  const ParameterVector c = ClipUpdate(Vec({3, 4}), 1.0);
  EXPECT_NEAR(c.weights[0], 0.6, 1e-15);
  EXPECT_NEAR(c.weights[1], 0.8, 1e-15);
  EXPECT_EQ(ClipUpdate(Vec({0.3, 0.4}), 1.0), Vec({0.3, 0.4}));
  EXPECT_EQ(ClipUpdate(Vec({0, 0}), 1.0), Vec({0, 0}));
  // The bias counts toward the norm.
  EXPECT_NEAR(ClipUpdate(Vec({0}, 2.0), 1.0).bias, 1.0, 1e-15);
}

TEST(ClipUpdate, NormNeverExceedsBound) {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    ParameterVector d(1 + rng.UniformIndex(50));
    const double scale = std::exp(8.0 * rng.Normal());
    for (double& x : d.weights) x = scale * rng.Normal();
    d.bias = scale * rng.Normal();
    const double c = 0.01 + 3.0 * rng.Uniform();
    EXPECT_LE(ClipUpdate(d, c).Norm(), c + 1e-12);
  }
}

TEST(Calibration, ClassicalClosedForm) {
  EXPECT_NEAR(ClassicalGaussianSigma(1.0, 1e-5, 1.0),
              std::sqrt(2.0 * std::log(1.25e5)), 1e-12);
  // Reference value is quoted to four decimals; exact form is checked above.
  EXPECT_NEAR(ClassicalGaussianSigma(1.0, 1e-5, 1.0), 4.8446, 5e-4);
  EXPECT_NEAR(ClassicalGaussianSigma(0.1, 1e-7, 1.0),
              std::sqrt(2.0 * std::log(1.25e7)) / 0.1, 1e-9);
  EXPECT_EQ(ClassicalGaussianSigma(0.3, 1e-6, 2.0),
            2.0 * ClassicalGaussianSigma(0.3, 1e-6, 1.0));
  EXPECT_THROW(ClassicalGaussianSigma(1.5, 1e-5, 1.0), CalibrationOutOfRange);
  EXPECT_THROW(ClassicalGaussianSigma(0.5, 0.0, 1.0), InvalidArgument);
}

TEST(Calibration, AnalyticMeetsConditionAndIsTighter) {
  for (double eps : {0.05, 0.3, 1.0, 3.0, 10.0}) {
    for (double delta : {1e-5, 1e-7}) {
      const double s = AnalyticGaussianSigma(eps, delta, 1.0);
      EXPECT_LE(GaussianMechanismDelta(s, eps, 1.0), delta * (1 + 1e-9));
      EXPECT_GT(GaussianMechanismDelta(s * 0.999, eps, 1.0), delta);
      if (eps <= 1.0) EXPECT_LT(s, ClassicalGaussianSigma(eps, delta, 1.0));
      EXPECT_NEAR(AnalyticGaussianSigma(eps, delta, 3.0), 3.0 * s, 1e-9 * s);
    }
  }
}

TEST(Calibration, SpecScheduleAndSensitivity) {
  PrivacySpec spec;
  spec.epsilon_total = 3.0;
  spec.delta = 1e-4;
  spec.rounds = 10;
  const double s1 = CalibrateSigma(spec, 1);
  EXPECT_NEAR(s1, ClassicalGaussianSigma(0.3, 1e-5, 1.0), 1e-12);
  EXPECT_EQ(CalibrateSigma(spec, 7), s1);

  spec.schedule = NoiseSchedule::kSqrtDecay;
  EXPECT_EQ(CalibrateSigma(spec, 4), s1 / 2.0);

  spec.schedule = NoiseSchedule::kConstant;
  spec.clip_norm = 2.0;
  EXPECT_EQ(CalibrateSigma(spec, 1), 2.0 * s1);
  spec.clip_norm = 1.0;
  spec.sensitivity = SensitivityConvention::kReplace;
  EXPECT_EQ(CalibrateSigma(spec, 1), 2.0 * s1);

  spec.sensitivity = SensitivityConvention::kAddRemove;
  spec.epsilon_total = 100.0;
  EXPECT_THROW(CalibrateSigma(spec, 1), CalibrationOutOfRange);
  spec.calibration = SigmaCalibration::kAnalytic;
  EXPECT_NEAR(CalibrateSigma(spec, 1), AnalyticGaussianSigma(10.0, 1e-5, 1.0),
              1e-12);
  EXPECT_THROW(CalibrateSigma(spec, 11), InvalidArgument);
}

TEST(Privatize, ZeroSigmaIsClipping) {
  Rng rng(1);
  ClientUpdate u{"c", Vec({3, 4}, 0), 17, false, false};
  const ClientUpdate p = PrivatizeWithSigma(u, 1.0, 0.0, rng);
  EXPECT_EQ(p.delta, ClipUpdate(u.delta, 1.0));
  EXPECT_TRUE(p.clipped);
  EXPECT_TRUE(p.noised);
  EXPECT_EQ(p.n_k, 1u);
}

TEST(Privatize, EmpiricalNoiseStd) {
  Rng rng(2024);
  const double sigma = 2.5;
  ClientUpdate u{"c", ParameterVector(1'000'000 - 1), 1, false, false};
  const ClientUpdate p = PrivatizeWithSigma(u, 1.0, sigma, rng);
  double s = 0, sq = 0;
  const double n = 1e6;
  for (double x : p.delta.weights) s += x, sq += x * x;
  s += p.delta.bias;
  sq += p.delta.bias * p.delta.bias;
  const double mean = s / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(sd, sigma, 0.01 * sigma);
  EXPECT_NEAR(mean, 0.0, 5.0 * sigma / std::sqrt(n));
}

TEST(Privatize, ClientStreamsAreIndependent) {
  // Same master seed, different client ids, as the orchestrator derives them.
  const std::uint64_t master = 99;
  Rng a(DeriveSeed(master, {1, StableHash("alice")}));
  Rng b(DeriveSeed(master, {1, StableHash("bob")}));
  ClientUpdate u{"x", ParameterVector(100'000), 1, false, false};
  const auto pa = PrivatizeWithSigma(u, 1.0, 1.0, a);
  const auto pb = PrivatizeWithSigma(u, 1.0, 1.0, b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < pa.delta.dim(); ++i) {
    sab += pa.delta.weights[i] * pb.delta.weights[i];
    saa += pa.delta.weights[i] * pa.delta.weights[i];
    sbb += pb.delta.weights[i] * pb.delta.weights[i];
  }
  EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 0.01);
}

TEST(Privatize, UsesLedgerSigma) {
  PrivacySpec spec;
  spec.epsilon_total = 2.0;
  spec.rounds = 4;
  PrivacyLedger ledger;
  ClientUpdate u{"c", Vec({0.1, 0.2}), 1, false, false};
  Rng rng(1);
  EXPECT_THROW(Privatize(u, spec, 1, ledger, rng), BudgetExhausted);
  ledger.RecordRound(1, spec);
  Rng r1(5), r2(5);
  EXPECT_EQ(Privatize(u, spec, 1, ledger, r1).delta,
            PrivatizeWithSigma(u, 1.0, CalibrateSigma(spec, 1), r2).delta);
}

TEST(Ledger, AdditiveComposition) {
  PrivacySpec spec;
  spec.epsilon_total = 5.0;
  spec.rounds = 10;
  PrivacyLedger ledger;
  for (int t = 1; t <= 10; ++t) ledger.RecordRound(t, spec);
  EXPECT_EQ(ledger.epsilon_spent(), 5.0);
  EXPECT_EQ(ledger.entries().back().cumulative_epsilon, 5.0);
  EXPECT_NEAR(ledger.delta_spent(), spec.delta, 1e-20);
  EXPECT_THROW(ledger.RecordRound(11, spec), BudgetExhausted);
  EXPECT_EQ(ledger.entries().size(), 10u);
}

TEST(Ledger, ExactTotalsForAwkwardSplits) {
  for (double total : {1.0, 10.0, 100.0, 0.7, 3.3}) {
    for (int rounds : {3, 7, 30, 100}) {
      PrivacySpec spec;
      spec.epsilon_total = total;
      spec.rounds = rounds;
      spec.calibration = SigmaCalibration::kAnalytic;
      PrivacyLedger ledger;
      for (int t = 1; t <= rounds; ++t) ledger.RecordRound(t, spec);
      EXPECT_EQ(ledger.epsilon_spent(), rounds * (total / rounds))
          << total << "/" << rounds;
      EXPECT_NEAR(ledger.epsilon_spent(), total, 1e-12 * total);
      EXPECT_THROW(ledger.RecordRound(rounds + 1, spec), BudgetExhausted);
    }
  }
}

TEST(Ledger, OrderAndLookup) {
  PrivacySpec spec;
  spec.epsilon_total = 1.0;
  spec.rounds = 3;
  PrivacyLedger ledger;
  EXPECT_THROW(ledger.RecordRound(2, spec), InvalidArgument);
  ledger.RecordRound(1, spec);
  EXPECT_TRUE(ledger.Covers(1));
  EXPECT_FALSE(ledger.Covers(2));
  EXPECT_THROW(ledger.Entry(2), BudgetExhausted);
  EXPECT_EQ(ledger.ToJson().size(), 1u);
  EXPECT_EQ(ledger.ToJson()[0]["t"], 1);
}

}  // namespace
}  // namespace fedpriv
