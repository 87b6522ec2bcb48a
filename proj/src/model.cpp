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

#include "fedpriv/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedpriv/errors.hpp"
#include "fedpriv/random.hpp"

namespace fedpriv {

namespace {

void CheckDims(const ParameterVector& a, const ParameterVector& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
}

// log(1 + e^z) without overflow.
double Softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double MeanBce(const ParameterVector& w, std::span<const Example> batch) {
  double total = 0.0;
  for (const Example& ex : batch) {
    const double z = Logit(w, ex.x);
    total += Softplus(z) - ex.label * z;
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace

double ParameterVector::SquaredNorm() const {
  double s = bias * bias;
  for (double v : weights) s += v * v;
  return s;
}

double ParameterVector::Norm() const { return std::sqrt(SquaredNorm()); }

bool ParameterVector::AllFinite() const {
  return std::isfinite(bias) &&
         std::all_of(weights.begin(), weights.end(),
                     [](double v) { return std::isfinite(v); });
}

ParameterVector& ParameterVector::operator+=(const ParameterVector& other) {
  CheckDims(*this, other);
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] += other.weights[i];
  bias += other.bias;
  return *this;
}

ParameterVector& ParameterVector::operator-=(const ParameterVector& other) {
  CheckDims(*this, other);
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] -= other.weights[i];
  bias -= other.bias;
  return *this;
}

ParameterVector& ParameterVector::operator*=(double s) {
  for (double& v : weights) v *= s;
  bias *= s;
  return *this;
}

void ParameterVector::Axpy(double s, const ParameterVector& other) {
  CheckDims(*this, other);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += s * other.weights[i];
  }
  bias += s * other.bias;
}

ParameterVector operator-(const ParameterVector& a, const ParameterVector& b) {
  ParameterVector out = a;
  out -= b;
  return out;
}

ParameterVector operator+(const ParameterVector& a, const ParameterVector& b) {
  ParameterVector out = a;
  out += b;
  return out;
}

double MaxAbsDiff(const ParameterVector& a, const ParameterVector& b) {
  CheckDims(a, b);
  double m = std::abs(a.bias - b.bias);
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    m = std::max(m, std::abs(a.weights[i] - b.weights[i]));
  }
  return m;
}

void TrainConfig::Validate() const {
  if (!(lr >= 0.0)) throw InvalidArgument("lr must be non-negative");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (patience < 0) throw InvalidArgument("patience must be >= 0");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(l2 >= 0.0)) throw InvalidArgument("l2 must be >= 0");
  if (!(prox_mu >= 0.0)) throw InvalidArgument("prox_mu must be >= 0");
}

double Logit(const ParameterVector& w, const SparseVector& x) {
  double z = w.bias;
  for (std::size_t k = 0; k < x.indices.size(); ++k) {
    const std::uint32_t i = x.indices[k];
    if (i >= w.dim()) throw DimensionMismatch(w.dim(), i + 1);
    z += w.weights[i] * x.values[k];
  }
  return z;
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double PredictProba(const ParameterVector& w, const SparseVector& x) {
  return Sigmoid(Logit(w, x));
}

int PredictLabel(const ParameterVector& w, const SparseVector& x) {
  return PredictProba(w, x) >= 0.5 ? 1 : 0;
}

double Loss(const ParameterVector& w, std::span<const Example> batch,
            const ParameterVector& w_ref, double mu, double l2) {
  if (batch.empty()) throw InvalidArgument("loss of an empty batch");
  double loss = MeanBce(w, batch);
  if (l2 > 0.0) {
    double sq = 0.0;
    for (double v : w.weights) sq += v * v;
    loss += 0.5 * l2 * sq;
  }
  if (mu > 0.0) {
    CheckDims(w, w_ref);
    double sq = 0.0;
    for (std::size_t i = 0; i < w.weights.size(); ++i) {
      const double d = w.weights[i] - w_ref.weights[i];
      sq += d * d;
    }
    const double db = w.bias - w_ref.bias;
    loss += 0.5 * mu * (sq + db * db);
  }
  return loss;
}

ParameterVector Gradient(const ParameterVector& w,
                         std::span<const Example> batch,
                         const ParameterVector& w_ref, double mu, double l2) {
  if (batch.empty()) throw InvalidArgument("gradient of an empty batch");
  ParameterVector g(w.dim());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const Example& ex : batch) {
    const double r = (PredictProba(w, ex.x) - ex.label) * inv_n;
    for (std::size_t k = 0; k < ex.x.indices.size(); ++k) {
      g.weights[ex.x.indices[k]] += r * ex.x.values[k];
    }
    g.bias += r;
  }
  if (l2 > 0.0) {
    for (std::size_t i = 0; i < w.weights.size(); ++i) {
      g.weights[i] += l2 * w.weights[i];
    }
  }
  if (mu > 0.0) {
    CheckDims(w, w_ref);
    for (std::size_t i = 0; i < w.weights.size(); ++i) {
      g.weights[i] += mu * (w.weights[i] - w_ref.weights[i]);
    }
    g.bias += mu * (w.bias - w_ref.bias);
  }
  return g;
}

std::pair<ParameterVector, LocalStats> TrainLocal(
    const ParameterVector& w_init, std::span<const Example> data,
    const TrainConfig& cfg, std::span<const Example> val) {
  cfg.Validate();
  if (data.empty()) throw InvalidArgument("training on an empty dataset");
  ParameterVector w = w_init;
  LocalStats stats;
  stats.example_count = data.size();

  const bool early_stop = !val.empty() && cfg.patience > 0;
  ParameterVector best = w;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);

  const bool adam = cfg.optimizer == LocalOptimizer::kAdam;
  ParameterVector m, v;
  if (adam) {
    m = ParameterVector(w.dim());
    v = ParameterVector(w.dim());
  }
  long step = 0;
  std::vector<Example> batch;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
      const ParameterVector g =
          Gradient(w, batch, w_init, cfg.prox_mu, cfg.l2);
      ++step;
      if (!adam) {
        w.Axpy(-cfg.lr, g);
        continue;
      }
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, step);
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, step);
      auto apply = [&](double& wi, double& mi, double& vi, double gi) {
        mi = cfg.adam_beta1 * mi + (1.0 - cfg.adam_beta1) * gi;
        vi = cfg.adam_beta2 * vi + (1.0 - cfg.adam_beta2) * gi * gi;
        wi -= cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps);
      };
      for (std::size_t i = 0; i < w.weights.size(); ++i) {
        apply(w.weights[i], m.weights[i], v.weights[i], g.weights[i]);
      }
      apply(w.bias, m.bias, v.bias, g.bias);
    }
    stats.epochs_run = epoch;
    stats.train_loss_history.push_back(
        Loss(w, data, w_init, cfg.prox_mu, cfg.l2));
    if (early_stop) {
      const double vl = MeanBce(w, val);
      if (vl < best_val) {
        best_val = vl;
        best = w;
        stats.best_epoch = epoch;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
  }
  stats.final_train_loss = stats.train_loss_history.back();
  if (early_stop) {
    stats.best_val_loss = best_val;
    return {std::move(best), std::move(stats)};
  }
  stats.best_val_loss = val.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : MeanBce(w, val);
  stats.best_epoch = stats.epochs_run;
  return {std::move(w), std::move(stats)};
}

nlohmann::json ModelToJson(const ParameterVector& w) {
  return {{"schema", "fedpriv.model/v1"},
          {"dim", w.dim()},
          {"bias", w.bias},
          {"weights", w.weights}};
}

ParameterVector ModelFromJson(const nlohmann::json& j) {
  if (j.value("schema", "") != "fedpriv.model/v1") {
    throw InvalidArgument("unsupported model schema");
  }
  ParameterVector w;
  w.weights = j.at("weights").get<std::vector<double>>();
  w.bias = j.at("bias").get<double>();
  if (w.dim() != j.at("dim").get<std::size_t>()) {
    throw DimensionMismatch(j.at("dim").get<std::size_t>(), w.dim());
  }
  return w;
}

}  // namespace fedpriv
