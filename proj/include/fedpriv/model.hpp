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

#ifndef FEDPRIV_MODEL_HPP_
#define FEDPRIV_MODEL_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fedpriv/features.hpp"
#include "json.hpp"

namespace fedpriv {

// Dense logistic-regression parameters. Also used for deltas and gradients;
// the bias is treated as one more coordinate by the vector operations.
struct ParameterVector {
  std::vector<double> weights;
  double bias = 0.0;

  ParameterVector() = default;
  explicit ParameterVector(std::size_t dim) : weights(dim, 0.0) {}

  std::size_t dim() const { return weights.size(); }

  double SquaredNorm() const;
  double Norm() const;
  bool AllFinite() const;

  ParameterVector& operator+=(const ParameterVector& other);
  ParameterVector& operator-=(const ParameterVector& other);
  ParameterVector& operator*=(double s);
  // this += s * other
  void Axpy(double s, const ParameterVector& other);

  bool operator==(const ParameterVector&) const = default;
};

ParameterVector operator-(const ParameterVector& a, const ParameterVector& b);
ParameterVector operator+(const ParameterVector& a, const ParameterVector& b);

// Largest |a_i - b_i| over all coordinates including the bias.
double MaxAbsDiff(const ParameterVector& a, const ParameterVector& b);

enum class LocalOptimizer { kSgd, kAdam };

struct TrainConfig {
  double lr = 4e-5;
  int epochs = 50;
  // Epochs without validation-loss improvement before stopping; 0 disables.
  int patience = 5;
  int batch_size = 32;
  double l2 = 0.0;
  double prox_mu = 0.0;
  LocalOptimizer optimizer = LocalOptimizer::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct LocalStats {
  int epochs_run = 0;
  std::size_t example_count = 0;
  double final_train_loss = 0.0;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  // Full-data training loss after each epoch.
  std::vector<double> train_loss_history;
};

double Logit(const ParameterVector& w, const SparseVector& x);
double Sigmoid(double z);

// sigma(w . x + b). Throws DimensionMismatch if an index of x is out of range.
double PredictProba(const ParameterVector& w, const SparseVector& x);
int PredictLabel(const ParameterVector& w, const SparseVector& x);

// Mean binary cross-entropy + (l2/2)|w|^2 + (mu/2)|theta - theta_ref|^2.
// The ridge term excludes the bias; the proximal term includes it.
double Loss(const ParameterVector& w, std::span<const Example> batch,
            const ParameterVector& w_ref, double mu, double l2 = 0.0);

// Exact gradient of Loss.
ParameterVector Gradient(const ParameterVector& w,
                         std::span<const Example> batch,
                         const ParameterVector& w_ref, double mu,
                         double l2 = 0.0);

// Mini-batch training from w_init. The proximal reference is w_init. With a
// validation set and patience > 0, stops after `patience` epochs without
// improvement and returns the best-validation checkpoint.
std::pair<ParameterVector, LocalStats> TrainLocal(
    const ParameterVector& w_init, std::span<const Example> data,
    const TrainConfig& cfg, std::span<const Example> val = {});

nlohmann::json ModelToJson(const ParameterVector& w);
ParameterVector ModelFromJson(const nlohmann::json& j);

}  // namespace fedpriv

#endif  // FEDPRIV_MODEL_HPP_
