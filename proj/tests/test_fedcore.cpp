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
#include <set>
#include <vector>

#include "fedpriv/errors.hpp"
#include "fedpriv/fedcore.hpp"
#include "fedpriv/random.hpp"

namespace fedpriv {
namespace {

ParameterVector Vec(std::vector<double> w, double b = 0.0) {
  ParameterVector p;
  p.weights = std::move(w);
  p.bias = b;
  return p;
}

std::vector<std::string> Ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("client" + std::to_string(i));
  return ids;
}

// Shards of `per_client` random sparse examples each.
std::vector<ClientShard> RandomShards(Rng& rng, int clients, int per_client,
                                      std::size_t dim) {
  std::vector<ClientShard> shards;
  for (int c = 0; c < clients; ++c) {
    ClientShard s;
    s.client_id = "c" + std::to_string(100 + c);
    for (int k = 0; k < per_client; ++k) {
      Example e;
      for (std::size_t j = 0; j < dim; ++j) {
        if (rng.Uniform() < 0.4) {
          e.x.indices.push_back(static_cast<std::uint32_t>(j));
          e.x.values.push_back(rng.Normal());
        }
      }
      e.label = rng.Uniform() < 0.5 ? 1 : 0;
      s.examples.push_back(e);
    }
    shards.push_back(s);
  }
  return shards;
}

std::vector<Example> Pool(const std::vector<ClientShard>& shards) {
  std::vector<Example> out;
  for (const auto& s : shards) {
    out.insert(out.end(), s.examples.begin(), s.examples.end());
  }
  return out;
}

TEST(SampleSize, Examples) {
  EXPECT_EQ(SampleSize(10, 0.1), 1u);
  EXPECT_EQ(SampleSize(10, 1.0), 10u);
  EXPECT_EQ(SampleSize(7, 0.5), 4u);   // 3.5 -> 4 (even)
  EXPECT_EQ(SampleSize(5, 0.5), 2u);   // 2.5 -> 2 (even)
  EXPECT_EQ(SampleSize(3, 0.01), 1u);  // floor at one client
  EXPECT_EQ(SampleSize(140, 0.7), 98u);
  EXPECT_EQ(SampleSize(140, 0.1), 14u);
}

TEST(SampleClients, FullParticipationAndSize) {
  const auto ids = Ids(13);
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    auto all = SampleClients(ids, 1.0, rng);
    EXPECT_EQ(std::set<std::string>(all.begin(), all.end()),
              std::set<std::string>(ids.begin(), ids.end()));
    auto some = SampleClients(ids, 0.3, rng);
    EXPECT_EQ(some.size(), 4u);
    EXPECT_TRUE(std::is_sorted(some.begin(), some.end()));
    EXPECT_EQ(std::set<std::string>(some.begin(), some.end()).size(), 4u);
  }
}

TEST(SampleClients, IndependentOfInputOrder) {
  auto ids = Ids(20);
  Rng a(7), b(7);
  const auto s1 = SampleClients(ids, 0.25, a);
  std::reverse(ids.begin(), ids.end());
  EXPECT_EQ(SampleClients(ids, 0.25, b), s1);
}

TEST(SampleClients, RoughlyUniform) {
  const auto ids = Ids(10);
  std::map<std::string, int> hits;
  Rng rng(11);
  for (int i = 0; i < 20000; ++i) {
    for (const auto& id : SampleClients(ids, 0.3, rng)) ++hits[id];
  }
  for (const auto& [id, n] : hits) EXPECT_NEAR(n, 6000, 300) << id;
}

TEST(AggregateWeighted, Examples) {
  const std::vector<ClientUpdate> one = {{"a", Vec({1, 2}, 3), 5}};
  EXPECT_EQ(AggregateWeighted(one), Vec({1, 2}, 3));

  const std::vector<ClientUpdate> two = {{"a", Vec({1, 3}), 1},
                                         {"b", Vec({3, 5}), 3}};
  const ParameterVector agg = AggregateWeighted(two);
  EXPECT_NEAR(agg.weights[0], 2.5, 1e-15);
  EXPECT_NEAR(agg.weights[1], 4.5, 1e-15);
  const ParameterVector uni = AggregateWeighted(two, Weighting::kUniform);
  EXPECT_NEAR(uni.weights[0], 2.0, 1e-15);
  EXPECT_NEAR(uni.weights[1], 4.0, 1e-15);

  const std::vector<ClientUpdate> same = {{"a", Vec({0.7, -1}, 2), 1},
                                          {"b", Vec({0.7, -1}, 2), 9},
                                          {"c", Vec({0.7, -1}, 2), 4}};
  EXPECT_LE(MaxAbsDiff(AggregateWeighted(same), Vec({0.7, -1}, 2)), 1e-15);
}

TEST(AggregateWeighted, Errors) {
  const std::vector<ClientUpdate> bad = {{"a", Vec({1, 3}), 1},
                                         {"b", Vec({3}), 1}};
  EXPECT_THROW(AggregateWeighted(bad), DimensionMismatch);
  EXPECT_THROW(AggregateWeighted({}), InvalidArgument);
}

TEST(ServerStep, FedOptSgdUnitRateMatchesFedAvg) {
  FedConfig avg, opt;
  opt.aggregator = Aggregator::kFedOpt;
  opt.server_opt = ServerOptimizer::kSgd;
  opt.server_lr = 1.0;
  ServerState a(Vec({0.1, 0.2}, 0.3)), b(Vec({0.1, 0.2}, 0.3));
  const ParameterVector d = Vec({1.5, -0.25}, 0.125);
  ServerStep(a, d, avg);
  ServerStep(b, d, opt);
  EXPECT_EQ(a.w, b.w);
}

TEST(ServerStep, AdamFirstStepByHand) {
  FedConfig cfg;
  cfg.aggregator = Aggregator::kFedOpt;
  cfg.server_opt = ServerOptimizer::kAdam;
  cfg.server_lr = 0.01;
  cfg.server_tau = 1e-3;
  ServerState s(Vec({0, 0, 0}));
  const std::vector<double> delta = {0.5, -2.0, 1e-3};
  ServerStep(s, Vec(delta), cfg);
  for (int i = 0; i < 3; ++i) {
    // g = -delta; bias-corrected m_hat = g, sqrt(v_hat) = |g|.
    const double g = -delta[i];
    const double expected =
        -std::copysign(1.0, g) * cfg.server_lr / (1.0 + cfg.server_tau / std::abs(g));
    EXPECT_NEAR(s.w.weights[i], expected, 1e-15) << i;
  }
  EXPECT_EQ(s.w.bias, 0.0);
}

TEST(ServerStep, ZeroDelta) {
  FedConfig sgd;
  sgd.aggregator = Aggregator::kFedOpt;
  sgd.server_opt = ServerOptimizer::kSgd;
  ServerState s(Vec({1, 2}, 3));
  ServerStep(s, Vec({0, 0}, 0), sgd);
  EXPECT_EQ(s.w, Vec({1, 2}, 3));

  FedConfig adam;
  adam.aggregator = Aggregator::kFedOpt;
  ServerState t(Vec({1, 2}, 3));
  ServerStep(t, Vec({1, -1}, 0), adam);
  const ParameterVector m1 = t.m, v1 = t.v, w1 = t.w;
  ServerStep(t, Vec({0, 0}, 0), adam);
  for (int i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(t.m.weights[i], adam.server_beta1 * m1.weights[i]);
    EXPECT_DOUBLE_EQ(t.v.weights[i], adam.server_beta2 * v1.weights[i]);
  }
  EXPECT_NE(t.w, w1);  // momentum keeps moving the model
}

FedConfig BaseConfig() {
  FedConfig cfg;
  cfg.rounds = 10;
  cfg.local.lr = 0.5;
  cfg.local.epochs = 2;
  cfg.local.batch_size = 2;
  cfg.client_fraction = 0.5;
  cfg.patience = 0;
  cfg.seed = 77;
  return cfg;
}

TEST(RunFederated, FullParticipationEqualsCentralizedStep) {
  Rng rng(5);
  const std::size_t dim = 12;
  const auto shards = RandomShards(rng, 8, 3, dim);
  FedConfig cfg = BaseConfig();
  cfg.rounds = 1;
  cfg.client_fraction = 1.0;
  cfg.local.epochs = 1;
  cfg.local.batch_size = 3;
  cfg.local.lr = 0.7;
  const TrainingHistory h = RunFederated(shards, cfg, dim, {}, {});

  const auto pooled = Pool(shards);
  const ParameterVector w0(dim);
  ParameterVector expected = w0;
  expected.Axpy(-cfg.local.lr, Gradient(w0, pooled, w0, 0.0));
  EXPECT_LE(MaxAbsDiff(h.final_model, expected), 1e-10);
}

TEST(RunFederated, ReductionIdentities) {
  Rng rng(6);
  const std::size_t dim = 16;
  const auto shards = RandomShards(rng, 12, 4, dim);
  const auto val = Pool(RandomShards(rng, 4, 5, dim));
  const FedConfig avg = BaseConfig();
  FedConfig prox = avg;
  prox.aggregator = Aggregator::kFedProx;
  prox.prox_mu = 0.0;
  FedConfig opt = avg;
  opt.aggregator = Aggregator::kFedOpt;
  opt.server_opt = ServerOptimizer::kSgd;
  opt.server_lr = 1.0;

  std::vector<ParameterVector> ref, p, o;
  auto recorder = [](std::vector<ParameterVector>& out) {
    return [&out](const RoundRecord&, const ParameterVector& w) {
      out.push_back(w);
    };
  };
  const auto ha = RunFederated(shards, avg, dim, val, val, nullptr, recorder(ref));
  const auto hp = RunFederated(shards, prox, dim, val, val, nullptr, recorder(p));
  RunFederated(shards, opt, dim, val, val, nullptr, recorder(o));
  ASSERT_EQ(ref.size(), 10u);
  for (std::size_t t = 0; t < ref.size(); ++t) {
    EXPECT_LE(MaxAbsDiff(ref[t], p[t]), 1e-12);
    EXPECT_LE(MaxAbsDiff(ref[t], o[t]), 1e-12);
  }
  for (std::size_t t = 0; t < ha.rounds.size(); ++t) {
    EXPECT_EQ(RoundToJson(ha.rounds[t]), RoundToJson(hp.rounds[t]));
  }
}

TEST(RunFederated, ProximalTermChangesUpdates) {
  Rng rng(6);
  const auto shards = RandomShards(rng, 6, 4, 8);
  FedConfig prox = BaseConfig();
  prox.aggregator = Aggregator::kFedProx;
  prox.prox_mu = 1.0;
  const auto a = RunFederated(shards, BaseConfig(), 8, {}, {});
  const auto b = RunFederated(shards, prox, 8, {}, {});
  EXPECT_GT(MaxAbsDiff(a.final_model, b.final_model), 1e-6);
}

TEST(RunFederated, TrivialRuns) {
  Rng rng(1);
  const auto shards = RandomShards(rng, 4, 2, 5);
  FedConfig cfg = BaseConfig();
  cfg.rounds = 0;
  EXPECT_THROW(RunFederated(shards, cfg, 5, {}, {}), InvalidArgument);
  cfg.rounds = 1;
  cfg.local.lr = 0.0;
  EXPECT_EQ(RunFederated(shards, cfg, 5, {}, {}).final_model,
            ParameterVector(5));
}

TEST(RunFederated, DeterministicAndThreadInvariant) {
  Rng rng(9);
  const auto shards = RandomShards(rng, 20, 2, 10);
  const auto val = Pool(RandomShards(rng, 3, 3, 10));
  FedConfig cfg = BaseConfig();
  PrivacySpec dp;
  dp.epsilon_total = 5.0;
  dp.rounds = 10;
  const auto a = RunFederated(shards, cfg, 10, val, val, &dp);
  cfg.threads = 4;
  const auto b = RunFederated(shards, cfg, 10, val, val, &dp);
  EXPECT_EQ(a.final_model, b.final_model);
  ASSERT_EQ(a.rounds.size(), b.rounds.size());
  for (std::size_t t = 0; t < a.rounds.size(); ++t) {
    EXPECT_EQ(RoundToJson(a.rounds[t]), RoundToJson(b.rounds[t]));
  }
  cfg.seed = 78;
  EXPECT_NE(RunFederated(shards, cfg, 10, val, val, &dp).final_model,
            a.final_model);
}

TEST(RunFederated, PrivacyBudgetStopsTraining) {
  Rng rng(2);
  const auto shards = RandomShards(rng, 10, 1, 6);
  FedConfig cfg = BaseConfig();
  cfg.rounds = 8;
  PrivacySpec dp;
  dp.epsilon_total = 1.0;
  dp.rounds = 5;
  const auto h = RunFederated(shards, cfg, 6, {}, {}, &dp);
  EXPECT_EQ(h.rounds.size(), 5u);
  EXPECT_EQ(h.stop_reason, StopReason::kBudgetExhausted);
  ASSERT_TRUE(h.ledger.has_value());
  EXPECT_EQ(h.ledger->entries().size(), 5u);
  EXPECT_EQ(h.ledger->epsilon_spent(), 1.0);
}

TEST(RunFederated, EarlyStoppingKeepsBestRound) {
  Rng rng(3);
  const auto shards = RandomShards(rng, 10, 3, 30);
  const auto val = Pool(RandomShards(rng, 5, 4, 30));
  FedConfig cfg = BaseConfig();
  cfg.rounds = 200;
  cfg.local.lr = 3.0;
  cfg.patience = 3;
  std::vector<ParameterVector> models;
  const auto h = RunFederated(
      shards, cfg, 30, val, {}, nullptr,
      [&](const RoundRecord&, const ParameterVector& w) { models.push_back(w); });
  EXPECT_EQ(h.stop_reason, StopReason::kEarlyStopped);
  EXPECT_EQ(static_cast<int>(h.rounds.size()), h.best_round + 3);
  EXPECT_EQ(h.final_model, models[static_cast<std::size_t>(h.best_round - 1)]);
}

TEST(RunFederated, RejectsBadShards) {
  Rng rng(4);
  auto shards = RandomShards(rng, 3, 1, 4);
  shards[1].client_id = shards[0].client_id;
  EXPECT_THROW(RunFederated(shards, BaseConfig(), 4, {}, {}), DuplicateUserId);
  shards[1].client_id = "other";
  shards[2].examples.clear();
  EXPECT_THROW(RunFederated(shards, BaseConfig(), 4, {}, {}), InvalidArgument);
}

TEST(RunCentralized, SingleRepeatedExample) {
  Example e;
  e.x.indices = {0, 2};
  e.x.values = {0.6, 0.8};
  e.label = 1;
  const std::vector<Example> data(4, e);
  TrainConfig cfg;
  cfg.lr = 0.5;
  cfg.epochs = 20;
  cfg.batch_size = 2;
  const auto r = RunCentralized(data, {}, data, cfg, 3);
  EXPECT_EQ(r.test_metrics.treatment().recall, 1.0);
  const auto r2 = RunCentralized(data, {}, data, cfg, 3);
  EXPECT_EQ(r.model, r2.model);
}

}  // namespace
}  // namespace fedpriv
