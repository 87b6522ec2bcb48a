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

#include "fedpriv/fedcore.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "fedpriv/errors.hpp"

namespace fedpriv {

namespace {

constexpr std::uint64_t kSampleStream = 0x53414d50ULL;
constexpr std::uint64_t kNoiseStream = 0x4e4f4953ULL;

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void ParallelFor(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::string_view AggregatorName(Aggregator a) {
  switch (a) {
    case Aggregator::kFedAvg:
      return "fedavg";
    case Aggregator::kFedProx:
      return "fedprox";
    case Aggregator::kFedOpt:
      return "fedopt";
  }
  return "unknown";
}

std::string_view StopReasonName(StopReason r) {
  switch (r) {
    case StopReason::kCompleted:
      return "completed";
    case StopReason::kEarlyStopped:
      return "early_stopped";
    case StopReason::kBudgetExhausted:
      return "budget_exhausted";
  }
  return "unknown";
}

void FedConfig::Validate() const {
  if (rounds < 1) throw InvalidArgument("rounds must be >= 1");
  if (!(client_fraction > 0.0 && client_fraction <= 1.0)) {
    throw InvalidArgument("client_fraction must lie in (0, 1]");
  }
  if (!(prox_mu >= 0.0)) throw InvalidArgument("prox_mu must be >= 0");
  if (!(server_lr >= 0.0)) throw InvalidArgument("server_lr must be >= 0");
  if (patience < 0) throw InvalidArgument("patience must be >= 0");
  local.Validate();
}

std::size_t SampleSize(std::size_t n, double fraction) {
  // nearbyint honours the default round-half-to-even mode.
  const double k = std::nearbyint(fraction * static_cast<double>(n));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 1.0)),
                                 1, n);
}

std::vector<std::string> SampleClients(std::span<const std::string> all_ids,
                                       double fraction, Rng& rng) {
  if (all_ids.empty()) throw InvalidArgument("no clients to sample from");
  std::vector<std::string> ids(all_ids.begin(), all_ids.end());
  std::sort(ids.begin(), ids.end());
  const std::size_t k = SampleSize(ids.size(), fraction);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(ids[i], ids[i + rng.UniformIndex(ids.size() - i)]);
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ParameterVector AggregateWeighted(std::span<const ClientUpdate> updates,
                                  Weighting weighting) {
  if (updates.empty()) throw InvalidArgument("nothing to aggregate");
  const std::size_t dim = updates.front().delta.dim();
  ParameterVector out(dim);
  if (weighting == Weighting::kUniform) {
    for (const ClientUpdate& u : updates) out += u.delta;
    out *= 1.0 / static_cast<double>(updates.size());
    return out;
  }
  double total = 0.0;
  for (const ClientUpdate& u : updates) {
    if (u.n_k < 1) throw InvalidArgument("client update with n_k = 0");
    total += static_cast<double>(u.n_k);
  }
  for (const ClientUpdate& u : updates) {
    if (u.delta.dim() != dim) throw DimensionMismatch(dim, u.delta.dim());
    out.Axpy(static_cast<double>(u.n_k) / total, u.delta);
  }
  return out;
}

ServerState::ServerState(ParameterVector init)
    : w(std::move(init)), m(w.dim()), v(w.dim()) {}

void ServerStep(ServerState& state, const ParameterVector& aggregate_delta,
                const FedConfig& cfg) {
  ++state.step;
  if (cfg.aggregator != Aggregator::kFedOpt) {
    state.w += aggregate_delta;
    return;
  }
  if (cfg.server_opt == ServerOptimizer::kSgd) {
    // g = -delta; w -= lr * g
    state.w.Axpy(cfg.server_lr, aggregate_delta);
    return;
  }
  const double b1 = cfg.server_beta1, b2 = cfg.server_beta2;
  const double c1 = 1.0 - std::pow(b1, state.step);
  const double c2 = 1.0 - std::pow(b2, state.step);
  auto apply = [&](double& w, double& m, double& v, double delta) {
    const double g = -delta;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    w -= cfg.server_lr * (m / c1) / (std::sqrt(v / c2) + cfg.server_tau);
  };
  for (std::size_t i = 0; i < state.w.weights.size(); ++i) {
    apply(state.w.weights[i], state.m.weights[i], state.v.weights[i],
          aggregate_delta.weights[i]);
  }
  apply(state.w.bias, state.m.bias, state.v.bias, aggregate_delta.bias);
}

double MeanLoss(const ParameterVector& w, std::span<const Example> examples) {
  if (examples.empty()) return std::numeric_limits<double>::quiet_NaN();
  return Loss(w, examples, w, 0.0, 0.0);
}

TrainingHistory RunFederated(std::span<const ClientShard> shards,
                             const FedConfig& cfg, std::size_t dim,
                             std::span<const Example> val,
                             std::span<const Example> test,
                             const PrivacySpec* privacy,
                             const RoundObserver& observer) {
  cfg.Validate();
  if (shards.empty()) throw InvalidArgument("no client shards");
  if (privacy != nullptr) privacy->Validate();

  std::map<std::string, const ClientShard*> by_id;
  for (const ClientShard& s : shards) {
    if (s.examples.empty()) {
      throw InvalidArgument("client '" + s.client_id + "' has no examples");
    }
    if (!by_id.emplace(s.client_id, &s).second) {
      throw DuplicateUserId(s.client_id);
    }
  }
  std::vector<std::string> ids;
  for (const auto& [id, shard] : by_id) ids.push_back(id);

  TrainConfig local = cfg.local;
  local.prox_mu = cfg.aggregator == Aggregator::kFedProx ? cfg.prox_mu : 0.0;
  if (!cfg.client_early_stop) local.patience = 0;

  TrainingHistory history;
  if (privacy != nullptr) history.ledger.emplace();
  ServerState server{ParameterVector(dim)};
  const bool early_stop = !val.empty() && cfg.patience > 0;
  double best_val = std::numeric_limits<double>::infinity();
  ParameterVector best = server.w;
  int stale = 0;

  for (int t = 1; t <= cfg.rounds; ++t) {
    const auto start = std::chrono::steady_clock::now();
    if (privacy != nullptr) {
      try {
        history.ledger->RecordRound(t, *privacy);
      } catch (const BudgetExhausted&) {
        history.stop_reason = StopReason::kBudgetExhausted;
        break;
      }
    }
    Rng sample_rng(DeriveSeed(cfg.seed, {kSampleStream,
                                         static_cast<std::uint64_t>(t)}));
    RoundRecord record;
    record.round = t;
    record.sampled = SampleClients(ids, cfg.client_fraction, sample_rng);

    std::vector<ClientUpdate> updates(record.sampled.size());
    ParallelFor(updates.size(), cfg.threads, [&](std::size_t i) {
      const std::string& id = record.sampled[i];
      const ClientShard& shard = *by_id.at(id);
      const std::uint64_t client_key = StableHash(id);
      TrainConfig client_cfg = local;
      client_cfg.seed =
          DeriveSeed(cfg.seed, {static_cast<std::uint64_t>(t), client_key});
      auto [w_local, stats] = TrainLocal(
          server.w, shard.examples, client_cfg,
          cfg.client_early_stop ? val : std::span<const Example>{});
      ClientUpdate u;
      u.client_id = id;
      u.delta = std::move(w_local);
      u.delta -= server.w;
      u.n_k = shard.examples.size();
      if (privacy != nullptr) {
        Rng noise(DeriveSeed(cfg.seed, {kNoiseStream,
                                        static_cast<std::uint64_t>(t),
                                        client_key}));
        u = Privatize(std::move(u), *privacy, t, *history.ledger, noise);
      }
      updates[i] = std::move(u);
    });

    // updates follow the sorted sample order.
    const ParameterVector aggregate = AggregateWeighted(
        updates, privacy != nullptr ? Weighting::kUniform
                                    : Weighting::kExampleCount);
    record.aggregate_norm = aggregate.Norm();
    ServerStep(server, aggregate, cfg);

    if (!val.empty()) {
      record.val_loss = MeanLoss(server.w, val);
      record.val_metrics = Evaluate(server.w, val);
    } else {
      record.val_loss = std::numeric_limits<double>::quiet_NaN();
    }
    record.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    if (observer) observer(record, server.w);
    history.rounds.push_back(std::move(record));

    if (early_stop) {
      const double vl = history.rounds.back().val_loss;
      if (vl < best_val) {
        best_val = vl;
        best = server.w;
        history.best_round = t;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        history.stop_reason = StopReason::kEarlyStopped;
        break;
      }
    }
  }
  if (early_stop && history.best_round > 0) {
    history.final_model = std::move(best);
  } else {
    history.final_model = server.w;
    history.best_round = static_cast<int>(history.rounds.size());
  }
  if (!test.empty()) history.test_metrics = Evaluate(history.final_model, test);
  return history;
}

CentralizedResult RunCentralized(std::span<const Example> train,
                                 std::span<const Example> val,
                                 std::span<const Example> test,
                                 const TrainConfig& cfg, std::size_t dim) {
  if (train.empty()) throw InvalidArgument("empty training split");
  auto [model, stats] = TrainLocal(ParameterVector(dim), train, cfg, val);
  CentralizedResult result;
  result.model = std::move(model);
  result.stats = std::move(stats);
  if (!test.empty()) result.test_metrics = Evaluate(result.model, test);
  return result;
}

nlohmann::json RoundToJson(const RoundRecord& r) {
  return {{"t", r.round},
          {"sampled", r.sampled},
          {"n_sampled", r.sampled.size()},
          {"aggregate_norm", r.aggregate_norm},
          {"val_loss", r.val_loss},
          {"val_macro_f1", r.val_metrics.macro_f1},
          {"val_macro_recall", r.val_metrics.macro_recall}};
}

}  // namespace fedpriv
