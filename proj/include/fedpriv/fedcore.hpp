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

#ifndef FEDPRIV_FEDCORE_HPP_
#define FEDPRIV_FEDCORE_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedpriv/analysis.hpp"
#include "fedpriv/client_update.hpp"
#include "fedpriv/corpus.hpp"
#include "fedpriv/model.hpp"
#include "fedpriv/privacy.hpp"
#include "fedpriv/random.hpp"
#include "json.hpp"

namespace fedpriv {

enum class Aggregator { kFedAvg, kFedProx, kFedOpt };
enum class ServerOptimizer { kSgd, kAdam };

std::string_view AggregatorName(Aggregator a);

struct FedConfig {
  int rounds = 100;
  TrainConfig local;
  double client_fraction = 0.1;
  Aggregator aggregator = Aggregator::kFedAvg;
  // Proximal constant, used only by FedProx.
  double prox_mu = 0.01;
  // Server optimizer settings, used only by FedOpt.
  double server_lr = 1e-3;
  ServerOptimizer server_opt = ServerOptimizer::kAdam;
  double server_beta1 = 0.9;
  double server_beta2 = 0.99;
  double server_tau = 1e-3;
  // Rounds without validation-loss improvement before stopping; 0 disables.
  int patience = 5;
  // Apply TrainConfig::patience inside each client's local training.
  bool client_early_stop = false;
  std::uint64_t seed = 0;
  // Worker threads for client training within a round.
  int threads = 1;

  void Validate() const;
};

// max(1, round(c * N)), rounding half to even.
std::size_t SampleSize(std::size_t n, double fraction);

// Uniform sample without replacement, returned sorted. The result depends
// only on the set of ids (not their order) and the rng state.
std::vector<std::string> SampleClients(std::span<const std::string> all_ids,
                                       double fraction, Rng& rng);

enum class Weighting { kExampleCount, kUniform };

// Weighted (n_k / sum n) or uniform (1 / m) average of the deltas, summed in
// the given order.
ParameterVector AggregateWeighted(std::span<const ClientUpdate> updates,
                                  Weighting weighting =
                                      Weighting::kExampleCount);

struct ServerState {
  ParameterVector w;
  ParameterVector m;  // FedOpt-Adam first moment
  ParameterVector v;  // FedOpt-Adam second moment
  int step = 0;

  explicit ServerState(ParameterVector init);
};

// FedAvg/FedProx: w += delta. FedOpt: pseudo-gradient g = -delta through
// server SGD (w -= lr g) or Adam with bias correction and adaptivity floor
// tau: w -= lr * m_hat / (sqrt(v_hat) + tau).
void ServerStep(ServerState& state, const ParameterVector& aggregate_delta,
                const FedConfig& cfg);

struct RoundRecord {
  int round = 0;
  std::vector<std::string> sampled;
  double aggregate_norm = 0.0;
  double val_loss = 0.0;
  MetricsReport val_metrics;
  double wall_ms = 0.0;
};

enum class StopReason { kCompleted, kEarlyStopped, kBudgetExhausted };
std::string_view StopReasonName(StopReason r);

struct TrainingHistory {
  std::vector<RoundRecord> rounds;
  ParameterVector final_model;
  int best_round = 0;
  StopReason stop_reason = StopReason::kCompleted;
  std::optional<MetricsReport> test_metrics;
  std::optional<PrivacyLedger> ledger;
};

// Called after every completed round with the new global model.
using RoundObserver =
    std::function<void(const RoundRecord&, const ParameterVector&)>;

// Runs federated training from a zero model of dimension `dim`. When `privacy` is set, each
// round is charged to the ledger before training (BudgetExhausted ends the
// run), every update is clipped and noised client-side, and aggregation is
// uniform. With a non-empty validation set and patience > 0 the returned
// model is the best-validation-loss checkpoint.
TrainingHistory RunFederated(std::span<const ClientShard> shards,
                             const FedConfig& cfg, std::size_t dim,
                             std::span<const Example> val,
                             std::span<const Example> test,
                             const PrivacySpec* privacy = nullptr,
                             const RoundObserver& observer = {});

struct CentralizedResult {
  ParameterVector model;
  MetricsReport test_metrics;
  LocalStats stats;
};

// Pooled training with early stopping on validation loss.
CentralizedResult RunCentralized(std::span<const Example> train,
                                 std::span<const Example> val,
                                 std::span<const Example> test,
                                 const TrainConfig& cfg, std::size_t dim);

// Mean binary cross-entropy of w on examples (no regularization).
double MeanLoss(const ParameterVector& w, std::span<const Example> examples);

nlohmann::json RoundToJson(const RoundRecord& r);

}  // namespace fedpriv

#endif  // FEDPRIV_FEDCORE_HPP_
