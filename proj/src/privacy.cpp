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

#include "fedpriv/privacy.hpp"

#include <cmath>
#include <numbers>

#include "fedpriv/errors.hpp"

namespace fedpriv {

namespace {

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void NeumaierAdd(double& sum, double& comp, double x) {
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x)) {
    comp += (sum - t) + x;
  } else {
    comp += (x - t) + sum;
  }
  sum = t;
}

}  // namespace

void PrivacySpec::Validate() const {
  if (!(epsilon_total > 0.0)) throw InvalidArgument("epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("delta must lie in (0, 1)");
  }
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip_norm must be > 0");
  if (rounds < 1) throw InvalidArgument("privacy rounds must be >= 1");
}

double PrivacySpec::Sensitivity() const {
  return sensitivity == SensitivityConvention::kReplace ? 2.0 * clip_norm
                                                        : clip_norm;
}

std::string_view ScheduleName(NoiseSchedule s) {
  return s == NoiseSchedule::kSqrtDecay ? "sqrt_decay" : "constant";
}

std::string_view CalibrationName(SigmaCalibration c) {
  return c == SigmaCalibration::kAnalytic ? "analytic" : "classical";
}

double ClassicalGaussianSigma(double epsilon, double delta,
                              double sensitivity) {
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) ||
      !(sensitivity > 0.0)) {
    throw InvalidArgument("Gaussian mechanism parameters out of domain");
  }
  if (epsilon > 1.0) {
    throw CalibrationOutOfRange(
        "classical Gaussian calibration requires per-round epsilon <= 1, got " +
        std::to_string(epsilon) +
        "; raise rounds, lower epsilon, or use analytic calibration");
  }
  return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

double GaussianMechanismDelta(double sigma, double epsilon,
                              double sensitivity) {
  const double a = sensitivity / (2.0 * sigma);
  const double b = epsilon * sigma / sensitivity;
  const double tail = NormalCdf(-a - b);
  const double scaled = tail > 0.0 ? std::exp(epsilon + std::log(tail)) : 0.0;
  return NormalCdf(a - b) - scaled;
}

double AnalyticGaussianSigma(double epsilon, double delta,
                             double sensitivity) {
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) ||
      !(sensitivity > 0.0)) {
    throw InvalidArgument("Gaussian mechanism parameters out of domain");
  }
  // delta(sigma) is decreasing in sigma.
  double hi = sensitivity;
  while (GaussianMechanismDelta(hi, epsilon, sensitivity) > delta) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= 0.0) break;
    if (GaussianMechanismDelta(mid, epsilon, sensitivity) > delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double ScheduleFactor(NoiseSchedule schedule, int t) {
  if (t < 1) throw InvalidArgument("round index must be >= 1");
  return schedule == NoiseSchedule::kSqrtDecay
             ? 1.0 / std::sqrt(static_cast<double>(t))
             : 1.0;
}

double CalibrateSigma(const PrivacySpec& spec, int t) {
  spec.Validate();
  if (t < 1 || t > spec.rounds) {
    throw InvalidArgument("round " + std::to_string(t) + " outside [1, " +
                          std::to_string(spec.rounds) + "]");
  }
  const double eps = spec.EpsilonPerRound();
  const double del = spec.DeltaPerRound();
  const double base =
      spec.calibration == SigmaCalibration::kAnalytic
          ? AnalyticGaussianSigma(eps, del, spec.Sensitivity())
          : ClassicalGaussianSigma(eps, del, spec.Sensitivity());
  return base * ScheduleFactor(spec.schedule, t);
}

ParameterVector ClipUpdate(const ParameterVector& delta, double clip_norm) {
  const double norm = delta.Norm();
  ParameterVector out = delta;
  if (norm > clip_norm) out *= clip_norm / norm;
  return out;
}

const LedgerEntry& PrivacyLedger::RecordRound(int t, const PrivacySpec& spec) {
  spec.Validate();
  const int expected = static_cast<int>(entries_.size()) + 1;
  if (t != expected) {
    throw InvalidArgument("ledger expects round " + std::to_string(expected) +
                          ", got " + std::to_string(t));
  }
  if (t > spec.rounds) {
    throw BudgetExhausted("round " + std::to_string(t) +
                          " exceeds the budgeted " +
                          std::to_string(spec.rounds) + " rounds");
  }
  LedgerEntry e;
  e.round = t;
  e.epsilon = spec.EpsilonPerRound();
  e.delta = spec.DeltaPerRound();
  double es = eps_sum_, ec = eps_comp_;
  NeumaierAdd(es, ec, e.epsilon);
  if (es + ec > spec.epsilon_total * (1.0 + 1e-12)) {
    throw BudgetExhausted("cumulative epsilon would exceed " +
                          std::to_string(spec.epsilon_total));
  }
  e.sigma = CalibrateSigma(spec, t);
  eps_sum_ = es;
  eps_comp_ = ec;
  NeumaierAdd(delta_sum_, delta_comp_, e.delta);
  e.cumulative_epsilon = epsilon_spent();
  e.cumulative_delta = delta_spent();
  entries_.push_back(e);
  return entries_.back();
}

bool PrivacyLedger::Covers(int t) const {
  return t >= 1 && t <= static_cast<int>(entries_.size());
}

const LedgerEntry& PrivacyLedger::Entry(int t) const {
  if (!Covers(t)) {
    throw BudgetExhausted("round " + std::to_string(t) +
                          " has no recorded privacy budget");
  }
  return entries_[static_cast<std::size_t>(t - 1)];
}

nlohmann::json PrivacyLedger::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const LedgerEntry& e : entries_) {
    rows.push_back({{"t", e.round},
                    {"epsilon_t", e.epsilon},
                    {"delta_t", e.delta},
                    {"sigma_t", e.sigma},
                    {"cumulative_epsilon", e.cumulative_epsilon},
                    {"cumulative_delta", e.cumulative_delta}});
  }
  return rows;
}

ClientUpdate PrivatizeWithSigma(ClientUpdate update, double clip_norm,
                                double sigma, Rng& rng) {
  update.delta = ClipUpdate(update.delta, clip_norm);
  if (sigma > 0.0) {
    for (double& v : update.delta.weights) v += sigma * rng.Normal();
    update.delta.bias += sigma * rng.Normal();
  }
  update.clipped = true;
  update.noised = true;
  update.n_k = 1;
  return update;
}

ClientUpdate Privatize(ClientUpdate update, const PrivacySpec& spec, int t,
                       const PrivacyLedger& ledger, Rng& rng) {
  const double sigma = ledger.Entry(t).sigma;
  return PrivatizeWithSigma(std::move(update), spec.clip_norm, sigma, rng);
}

}  // namespace fedpriv
