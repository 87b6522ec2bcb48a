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

#ifndef FEDPRIV_PRIVACY_HPP_
#define FEDPRIV_PRIVACY_HPP_

#include <string_view>
#include <vector>

#include "fedpriv/client_update.hpp"
#include "fedpriv/model.hpp"
#include "fedpriv/random.hpp"
#include "json.hpp"

namespace fedpriv {

// Noise scale over rounds: Constant s(t) = 1, SqrtDecay s(t) = 1 / sqrt(t).
enum class NoiseSchedule { kConstant, kSqrtDecay };

// AddRemove: sensitivity = C. Replace: sensitivity = 2C.
enum class SensitivityConvention { kAddRemove, kReplace };

// Classical: sigma = S * sqrt(2 ln(1.25 / delta)) / eps, defined for eps <= 1.
// Analytic: smallest sigma meeting the exact Gaussian-mechanism condition,
// found by bisection; valid for any eps > 0.
enum class SigmaCalibration { kClassical, kAnalytic };

// Client-level privacy parameters. The total budget is split evenly across
// `rounds` (basic sequential composition).
struct PrivacySpec {
  double epsilon_total = 10.0;
  double delta = 1e-5;
  double clip_norm = 1.0;
  int rounds = 100;
  NoiseSchedule schedule = NoiseSchedule::kConstant;
  SensitivityConvention sensitivity = SensitivityConvention::kAddRemove;
  SigmaCalibration calibration = SigmaCalibration::kClassical;

  void Validate() const;
  double Sensitivity() const;
  double EpsilonPerRound() const { return epsilon_total / rounds; }
  double DeltaPerRound() const { return delta / rounds; }
};

std::string_view ScheduleName(NoiseSchedule s);
std::string_view CalibrationName(SigmaCalibration c);

double ClassicalGaussianSigma(double epsilon, double delta,
                              double sensitivity);

// delta(sigma) of the Gaussian mechanism at the given epsilon and
// sensitivity: Phi(S/(2s) - e s/S) - e^e Phi(-S/(2s) - e s/S).
double GaussianMechanismDelta(double sigma, double epsilon,
                              double sensitivity);

double AnalyticGaussianSigma(double epsilon, double delta, double sensitivity);

double ScheduleFactor(NoiseSchedule schedule, int t);

// sigma_t for round t in [1, rounds].
double CalibrateSigma(const PrivacySpec& spec, int t);

// delta * min(1, C / |delta|_2), bias included in the norm.
ParameterVector ClipUpdate(const ParameterVector& delta, double clip_norm);

struct LedgerEntry {
  int round = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double cumulative_epsilon = 0.0;
  double cumulative_delta = 0.0;
};

// Append-only record of per-round privacy spend. The orchestrator is the
// single writer.
class PrivacyLedger {
 public:
  // Appends round t. Rounds must be recorded in order 1, 2, ...; throws
  // BudgetExhausted when t exceeds the budgeted rounds or the cumulative
  // epsilon would exceed epsilon_total.
  const LedgerEntry& RecordRound(int t, const PrivacySpec& spec);

  bool Covers(int t) const;
  const LedgerEntry& Entry(int t) const;

  const std::vector<LedgerEntry>& entries() const { return entries_; }
  double epsilon_spent() const { return eps_sum_ + eps_comp_; }
  double delta_spent() const { return delta_sum_ + delta_comp_; }

  nlohmann::json ToJson() const;

 private:
  std::vector<LedgerEntry> entries_;
  // Neumaier-compensated running sums.
  double eps_sum_ = 0.0, eps_comp_ = 0.0;
  double delta_sum_ = 0.0, delta_comp_ = 0.0;
};

// Clips to C and adds N(0, sigma^2) to every coordinate, sets the flags and
// forces n_k = 1.
ClientUpdate PrivatizeWithSigma(ClientUpdate update, double clip_norm,
                                double sigma, Rng& rng);

// Same, with sigma_t taken from the ledger. Throws BudgetExhausted when the
// ledger does not cover round t.
ClientUpdate Privatize(ClientUpdate update, const PrivacySpec& spec, int t,
                       const PrivacyLedger& ledger, Rng& rng);

}  // namespace fedpriv

#endif  // FEDPRIV_PRIVACY_HPP_
