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

#include "fedpriv/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fedpriv/errors.hpp"
#include "fedpriv/random.hpp"

namespace fedpriv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kBundleSchema = "fedpriv.bundle/v1";

// ---------------------------------------------------------------------------
// Config documents

json YamlToJson(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(YamlToJson(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) {
        obj[kv.first.as<std::string>()] = YamlToJson(kv.second);
      }
      return obj;
    }
    case YAML::NodeType::Scalar: {
      const std::string s = node.Scalar();
      if (node.Tag() == "!") return s;  // quoted
      long long i;
      if (YAML::convert<long long>::decode(node, i)) return i;
      double d;
      if (YAML::convert<double>::decode(node, d)) return d;
      bool b;
      if (YAML::convert<bool>::decode(node, b)) return b;
      return s;
    }
  }
  return nullptr;
}

void MergeInto(json& base, const json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) &&
        base[it.key()].is_object()) {
      MergeInto(base[it.key()], *it);
    } else {
      base[it.key()] = *it;
    }
  }
}

// Field accessor that reports errors with the full dotted path.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected a mapping");
  }

  std::string Path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  void AllowOnly(std::initializer_list<std::string_view> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
        throw ConfigError(Path(it.key()), "unknown key");
      }
    }
  }

  const json& At(std::string_view key) const {
    auto it = j_.find(std::string(key));
    if (it == j_.end()) throw ConfigError(Path(key), "missing");
    return *it;
  }

  bool Has(std::string_view key) const {
    auto it = j_.find(std::string(key));
    return it != j_.end() && !it->is_null();
  }

  double Number(std::string_view key) const {
    const json& v = At(key);
    if (!v.is_number()) throw ConfigError(Path(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(Path(key), "must be finite");
    return d;
  }

  long long Integer(std::string_view key) const {
    const json& v = At(key);
    if (!v.is_number_integer()) {
      throw ConfigError(Path(key), "expected an integer");
    }
    return v.get<long long>();
  }

  std::string String(std::string_view key) const {
    const json& v = At(key);
    if (!v.is_string()) throw ConfigError(Path(key), "expected a string");
    return v.get<std::string>();
  }

  bool Bool(std::string_view key) const {
    const json& v = At(key);
    if (!v.is_boolean()) throw ConfigError(Path(key), "expected a boolean");
    return v.get<bool>();
  }

  // A number or a non-empty list of numbers.
  std::vector<double> NumberList(std::string_view key) const {
    const json& v = At(key);
    std::vector<double> out;
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_array() && !v.empty()) {
      for (const json& x : v) {
        if (!x.is_number()) throw ConfigError(Path(key), "expected numbers");
        out.push_back(x.get<double>());
      }
    } else {
      throw ConfigError(Path(key), "expected a number or a non-empty list");
    }
    return out;
  }

  Section Child(std::string_view key) const { return {At(key), Path(key)}; }

 private:
  const json& j_;
  std::string path_;
};

template <typename E>
E ParseEnum(const Section& s, std::string_view key,
            std::initializer_list<std::pair<std::string_view, E>> options) {
  const std::string v = s.String(key);
  for (const auto& [name, value] : options) {
    if (name == v) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : options) {
    if (!allowed.empty()) allowed += "|";
    allowed += name;
  }
  throw ConfigError(s.Path(key), "expected one of " + allowed);
}

void Require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

std::string FormatNumber(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string GridKey(Pipeline p, std::optional<double> eps,
                    std::optional<double> c) {
  if (p == Pipeline::kCentralized) return "centralized";
  std::string key;
  if (eps) key = "eps=" + FormatNumber(*eps) + ",";
  return key + "c=" + FormatNumber(*c);
}

// ---------------------------------------------------------------------------
// Output helpers

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << text;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> ReadJsonLines(const fs::path& path) {
  std::vector<json> rows;
  if (!fs::exists(path)) return rows;
  std::istringstream in(ReadText(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

std::string SafeName(const std::string& key) {
  std::string out;
  for (char c : key) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ||
                                            c == '.' || c == '-'
                                        ? c
                                        : '_');
  return out;
}

std::string Fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

json StabilityToJson(const std::string& key, const StabilityReport& s) {
  return {{"key", key},         {"n", s.n},
          {"mean", s.mean},     {"sd", s.sd},
          {"ci_low", s.ci_low}, {"ci_high", s.ci_high}};
}

Pipeline ParsePipeline(const std::string& name) {
  if (name == "centralized") return Pipeline::kCentralized;
  if (name == "federated") return Pipeline::kFederated;
  if (name == "dp_federated") return Pipeline::kPrivateFederated;
  throw InvalidArgument("unknown pipeline '" + name + "'");
}

}  // namespace

std::string_view PipelineName(Pipeline p) {
  switch (p) {
    case Pipeline::kCentralized:
      return "centralized";
    case Pipeline::kFederated:
      return "federated";
    case Pipeline::kPrivateFederated:
      return "dp_federated";
  }
  return "unknown";
}

Pipeline ExperimentConfig::pipeline() const {
  if (privacy) return Pipeline::kPrivateFederated;
  if (fed) return Pipeline::kFederated;
  return Pipeline::kCentralized;
}

std::vector<const RunRecord*> ResultsBundle::RunsFor(
    const std::string& key) const {
  std::vector<const RunRecord*> out;
  for (const RunRecord& r : runs) {
    if (r.key == key) out.push_back(&r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presets and parsing

json PresetDefaults(std::string_view preset) {
  const SynthSpec synth;
  json doc = {
      {"name", "experiment"},
      {"preset", std::string(preset)},
      {"seeds", {1, 2, 3, 4, 5}},
      {"output", ""},
      {"threads", 1},
      {"dataset",
       {{"source", "synth"},
        {"path", ""},
        {"split_seed", 7},
        {"synth",
         {{"n_treatment", 2635},
          {"n_control", 3034},
          {"vocab_marker_health", synth.vocab_marker_health},
          {"vocab_marker_negemo", synth.vocab_marker_negemo},
          {"vocab_generic", synth.vocab_generic},
          {"vocab_entertainment", synth.vocab_entertainment},
          {"marker_density", synth.marker_density},
          {"entertainment_share", synth.entertainment_share},
          {"token_mean", synth.token_mean},
          {"token_sd", synth.token_sd},
          {"seed", 1}}}}},
      {"features", {{"dim", FeatureSpace::kDefaultDim}, {"mode", "tf"}}},
      {"model",
       {{"lr", 4e-5},
        {"epochs", 50},
        {"patience", 5},
        {"batch_size", 32},
        {"l2", 0.0},
        {"optimizer", "sgd"}}},
      {"centralized", {{"epochs", 50}}},
      {"fed",
       {{"rounds", 100},
        {"client_fraction", {0.1, 0.3, 0.5, 0.7}},
        {"aggregator", "fedavg"},
        {"mu", 0.01},
        {"server_lr", 1e-3},
        {"server_opt", "adam"},
        {"server_beta1", 0.9},
        {"server_beta2", 0.99},
        {"server_tau", 1e-3},
        {"patience", 5},
        {"client_early_stop", false}}},
      {"privacy",
       {{"epsilon", {1, 5, 10, 50, 100}},
        {"delta", 1e-5},
        {"clip_norm", 1.0},
        {"rounds", nullptr},
        {"schedule", "constant"},
        {"sensitivity", "add_remove"},
        {"calibration", "auto"}}},
      {"analysis", {{"top_k", 50}, {"lexicon", ""}}},
  };
  if (preset == "desk") {
    doc["dataset"]["synth"]["n_treatment"] = synth.n_treatment;
    doc["dataset"]["synth"]["n_control"] = synth.n_control;
    doc["model"]["epochs"] = 3;
    doc["centralized"]["epochs"] = 3;
    doc["model"]["lr"] = 1.0;
    doc["fed"]["rounds"] = 30;
    doc["fed"]["patience"] = 0;
    doc["fed"]["client_fraction"] = {0.1, 0.7};
    doc["privacy"]["epsilon"] = {1, 10, 100};
  } else if (preset != "paper") {
    throw ConfigError("preset", "expected paper|desk");
  }
  return doc;
}

json ReadConfigDocument(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("<file>", "cannot open config '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError("<file>", std::string("malformed config: ") + e.what());
  }
  json doc = YamlToJson(root);
  if (doc.is_null()) doc = json::object();
  if (!doc.is_object()) throw ConfigError("<root>", "expected a mapping");
  return doc;
}

ExperimentConfig ParseConfig(const json& user, std::string_view preset_override) {
  if (!user.is_object()) throw ConfigError("<root>", "expected a mapping");
  std::string preset = "paper";
  if (user.contains("preset")) {
    if (!user["preset"].is_string()) {
      throw ConfigError("preset", "expected a string");
    }
    preset = user["preset"].get<std::string>();
  }
  if (!preset_override.empty()) preset = std::string(preset_override);

  json doc = PresetDefaults(preset);
  MergeInto(doc, user);
  doc["preset"] = preset;
  // Optional pipeline sections are active only when the user provides them.
  for (const char* optional_section : {"fed", "privacy"}) {
    if (!user.contains(optional_section) ||
        user[optional_section].is_null() ||
        (user[optional_section].is_boolean() &&
         !user[optional_section].get<bool>())) {
      doc.erase(optional_section);
    } else if (user[optional_section].is_boolean()) {
      doc[optional_section] = PresetDefaults(preset)[optional_section];
    }
  }

  const Section root(doc, "");
  root.AllowOnly({"name", "preset", "seeds", "output", "threads", "dataset",
                  "features", "model", "centralized", "fed", "privacy",
                  "analysis"});
  ExperimentConfig cfg;
  cfg.name = root.String("name");
  cfg.preset = preset;
  cfg.output_dir = root.String("output");
  cfg.threads = static_cast<int>(root.Integer("threads"));
  Require(cfg.threads >= 1, "threads", "must be >= 1");

  const json& seeds = root.At("seeds");
  Require(seeds.is_array() && !seeds.empty(), "seeds",
          "expected a non-empty list of integers");
  for (const json& s : seeds) {
    Require(s.is_number_integer() && s.get<long long>() >= 0, "seeds",
            "seeds must be non-negative integers");
    cfg.seeds.push_back(s.get<std::uint64_t>());
  }

  // dataset
  const Section ds = root.Child("dataset");
  ds.AllowOnly({"source", "path", "split_seed", "synth"});
  cfg.dataset.synthetic =
      ParseEnum<bool>(ds, "source", {{"synth", true}, {"file", false}});
  cfg.dataset.path = ds.String("path");
  cfg.dataset.split_seed = static_cast<std::uint64_t>(ds.Integer("split_seed"));
  Require(cfg.dataset.synthetic || !cfg.dataset.path.empty(), "dataset.path",
          "required when source is file");
  const Section sy = ds.Child("synth");
  sy.AllowOnly({"n_treatment", "n_control", "vocab_marker_health",
                "vocab_marker_negemo", "vocab_generic", "vocab_entertainment",
                "marker_density", "entertainment_share", "token_mean",
                "token_sd", "seed"});
  SynthSpec& spec = cfg.dataset.synth;
  spec.n_treatment = static_cast<int>(sy.Integer("n_treatment"));
  spec.n_control = static_cast<int>(sy.Integer("n_control"));
  spec.vocab_marker_health = static_cast<int>(sy.Integer("vocab_marker_health"));
  spec.vocab_marker_negemo = static_cast<int>(sy.Integer("vocab_marker_negemo"));
  spec.vocab_generic = static_cast<int>(sy.Integer("vocab_generic"));
  spec.vocab_entertainment = static_cast<int>(sy.Integer("vocab_entertainment"));
  spec.marker_density = sy.Number("marker_density");
  spec.entertainment_share = sy.Number("entertainment_share");
  spec.token_mean = sy.Number("token_mean");
  spec.token_sd = sy.Number("token_sd");
  spec.seed = static_cast<std::uint64_t>(sy.Integer("seed"));
  try {
    spec.Validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("dataset.synth", e.what());
  }

  // features
  const Section fe = root.Child("features");
  fe.AllowOnly({"dim", "mode"});
  const long long dim = fe.Integer("dim");
  Require(dim >= 2 && dim <= (1LL << 30) && (dim & (dim - 1)) == 0,
          "features.dim", "must be a power of two >= 2");
  cfg.feature_dim = static_cast<std::uint32_t>(dim);
  cfg.feature_mode = ParseEnum<FeatureMode>(
      fe, "mode",
      {{"tf", FeatureMode::kTermFrequency}, {"tfidf", FeatureMode::kTfIdf}});

  // model
  const Section mo = root.Child("model");
  mo.AllowOnly({"lr", "epochs", "patience", "batch_size", "l2", "optimizer"});
  cfg.model.lr = mo.Number("lr");
  Require(cfg.model.lr > 0.0, "model.lr", "must be > 0");
  cfg.model.epochs = static_cast<int>(mo.Integer("epochs"));
  Require(cfg.model.epochs >= 1, "model.epochs", "must be >= 1");
  cfg.model.patience = static_cast<int>(mo.Integer("patience"));
  Require(cfg.model.patience >= 0, "model.patience", "must be >= 0");
  cfg.model.batch_size = static_cast<int>(mo.Integer("batch_size"));
  Require(cfg.model.batch_size >= 1, "model.batch_size", "must be >= 1");
  cfg.model.l2 = mo.Number("l2");
  Require(cfg.model.l2 >= 0.0, "model.l2", "must be >= 0");
  cfg.model.optimizer = ParseEnum<LocalOptimizer>(
      mo, "optimizer",
      {{"sgd", LocalOptimizer::kSgd}, {"adam", LocalOptimizer::kAdam}});

  const Section ce = root.Child("centralized");
  ce.AllowOnly({"epochs"});
  cfg.centralized_epochs = static_cast<int>(ce.Integer("epochs"));
  Require(cfg.centralized_epochs >= 0, "centralized.epochs", "must be >= 0");

  // fed
  if (root.Has("fed")) {
    const Section f = root.Child("fed");
    f.AllowOnly({"rounds", "client_fraction", "aggregator", "mu", "server_lr",
                 "server_opt", "server_beta1", "server_beta2", "server_tau",
                 "patience", "client_early_stop"});
    FederatedSection fed;
    FedConfig& fc = fed.base;
    fc.rounds = static_cast<int>(f.Integer("rounds"));
    Require(fc.rounds >= 1, "fed.rounds", "must be >= 1");
    fed.client_fractions = f.NumberList("client_fraction");
    for (double c : fed.client_fractions) {
      Require(c > 0.0 && c <= 1.0, "fed.client_fraction",
              "values must lie in (0, 1]");
    }
    fc.aggregator = ParseEnum<Aggregator>(f, "aggregator",
                                          {{"fedavg", Aggregator::kFedAvg},
                                           {"fedprox", Aggregator::kFedProx},
                                           {"fedopt", Aggregator::kFedOpt}});
    fc.prox_mu = f.Number("mu");
    Require(fc.prox_mu >= 0.0, "fed.mu", "must be >= 0");
    fc.server_lr = f.Number("server_lr");
    Require(fc.server_lr > 0.0, "fed.server_lr", "must be > 0");
    fc.server_opt = ParseEnum<ServerOptimizer>(
        f, "server_opt",
        {{"sgd", ServerOptimizer::kSgd}, {"adam", ServerOptimizer::kAdam}});
    fc.server_beta1 = f.Number("server_beta1");
    fc.server_beta2 = f.Number("server_beta2");
    fc.server_tau = f.Number("server_tau");
    Require(fc.server_tau > 0.0, "fed.server_tau", "must be > 0");
    fc.patience = static_cast<int>(f.Integer("patience"));
    Require(fc.patience >= 0, "fed.patience", "must be >= 0");
    fc.client_early_stop = f.Bool("client_early_stop");
    fc.local = cfg.model;
    fc.threads = cfg.threads;
    cfg.fed = std::move(fed);
  }

  // privacy
  if (root.Has("privacy")) {
    if (!cfg.fed) throw ConfigError("privacy", "requires a fed section");
    const Section p = root.Child("privacy");
    p.AllowOnly({"epsilon", "delta", "clip_norm", "rounds", "schedule",
                 "sensitivity", "calibration"});
    PrivacySection priv;
    priv.epsilons = p.NumberList("epsilon");
    for (double e : priv.epsilons) {
      Require(e > 0.0, "privacy.epsilon", "values must be > 0");
    }
    priv.base.delta = p.Number("delta");
    Require(priv.base.delta > 0.0 && priv.base.delta < 1.0, "privacy.delta",
            "must lie in (0, 1)");
    priv.base.clip_norm = p.Number("clip_norm");
    Require(priv.base.clip_norm > 0.0, "privacy.clip_norm", "must be > 0");
    priv.base.rounds = p.Has("rounds") ? static_cast<int>(p.Integer("rounds"))
                                       : cfg.fed->base.rounds;
    Require(priv.base.rounds >= 1, "privacy.rounds", "must be >= 1");
    doc["privacy"]["rounds"] = priv.base.rounds;
    priv.base.schedule = ParseEnum<NoiseSchedule>(
        p, "schedule",
        {{"constant", NoiseSchedule::kConstant},
         {"sqrt_decay", NoiseSchedule::kSqrtDecay}});
    priv.base.sensitivity = ParseEnum<SensitivityConvention>(
        p, "sensitivity",
        {{"add_remove", SensitivityConvention::kAddRemove},
         {"replace", SensitivityConvention::kReplace}});
    priv.calibration = ParseEnum<CalibrationChoice>(
        p, "calibration",
        {{"classical", CalibrationChoice::kClassical},
         {"analytic", CalibrationChoice::kAnalytic},
         {"auto", CalibrationChoice::kAuto}});
    if (priv.calibration == CalibrationChoice::kClassical) {
      for (double e : priv.epsilons) {
        Require(e / priv.base.rounds <= 1.0, "privacy.calibration",
                "classical calibration needs epsilon / rounds <= 1 (epsilon " +
                    FormatNumber(e) + ")");
      }
    }
    cfg.privacy = std::move(priv);
  }

  const Section an = root.Child("analysis");
  an.AllowOnly({"top_k", "lexicon"});
  const long long k = an.Integer("top_k");
  Require(k >= 1, "analysis.top_k", "must be >= 1");
  cfg.top_k = static_cast<std::size_t>(k);
  cfg.lexicon_path = an.String("lexicon");

  cfg.resolved = std::move(doc);
  return cfg;
}

ExperimentConfig LoadConfig(const std::string& path,
                            std::string_view preset_override) {
  return ParseConfig(ReadConfigDocument(path), preset_override);
}

std::string ConfigHash(const ExperimentConfig& cfg) {
  json canonical = cfg.resolved;
  canonical.erase("output");
  canonical.erase("threads");
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(StableHash(canonical.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Running

ResultsBundle RunExperiment(const ExperimentConfig& cfg) {
  ResultsBundle bundle;
  bundle.config_hash = ConfigHash(cfg);
  bundle.config = cfg.resolved;
  bundle.pipeline = cfg.pipeline();

  const Lexicon lexicon = cfg.lexicon_path.empty()
                              ? Lexicon::Default()
                              : Lexicon::Load(cfg.lexicon_path);
  std::vector<UserRecord> records;
  if (cfg.dataset.synthetic) {
    records = SynthGenerate(cfg.dataset.synth, Lexicon::Default());
    for (UserRecord& r : records) {
      for (std::string& p : r.posts) p = Preprocess(p);
    }
  } else {
    records = LoadDataset(cfg.dataset.path);
  }
  const DatasetSplit split = StratifiedSplit(records, cfg.dataset.split_seed);
  std::vector<std::string> train_text;
  for (const UserRecord& u : split.train) train_text.push_back(UserText(u));
  auto space = std::make_shared<FeatureSpace>(
      Fit(train_text, cfg.feature_dim, cfg.feature_mode));
  const std::vector<Example> train = VectorizeUsers(split.train, *space);
  const std::vector<Example> val = VectorizeUsers(split.validation, *space);
  const std::vector<Example> test = VectorizeUsers(split.test, *space);
  const std::vector<double> background = BackgroundMean(train, space->dim());
  const std::vector<ClientShard> shards = PartitionClients(split.train, *space);
  bundle.space = space;

  struct GridPoint {
    std::optional<double> eps;
    std::optional<double> c;
  };
  std::vector<GridPoint> grid;
  switch (bundle.pipeline) {
    case Pipeline::kCentralized:
      grid.push_back({});
      break;
    case Pipeline::kFederated:
      for (double c : cfg.fed->client_fractions) grid.push_back({{}, c});
      break;
    case Pipeline::kPrivateFederated:
      for (double e : cfg.privacy->epsilons) {
        for (double c : cfg.fed->client_fractions) grid.push_back({e, c});
      }
      break;
  }

  for (const GridPoint& g : grid) {
    const std::string key = GridKey(bundle.pipeline, g.eps, g.c);
    bundle.keys.push_back(key);
    for (std::uint64_t seed : cfg.seeds) {
      RunRecord run;
      run.key = key;
      run.seed = seed;
      run.pipeline = bundle.pipeline;
      run.epsilon = g.eps;
      run.client_fraction = g.c;
      const auto start = std::chrono::steady_clock::now();
      if (bundle.pipeline == Pipeline::kCentralized) {
        TrainConfig tc = cfg.model;
        if (cfg.centralized_epochs > 0) tc.epochs = cfg.centralized_epochs;
        tc.seed = DeriveSeed(seed, {StableHash("centralized")});
        CentralizedResult res = RunCentralized(train, val, test, tc, space->dim());
        run.metrics = res.test_metrics;
        run.rounds_run = res.stats.epochs_run;
        run.best_round = res.stats.best_epoch;
        run.stop_reason =
            res.stats.epochs_run < tc.epochs ? "early_stopped" : "completed";
        run.model = std::move(res.model);
      } else {
        FedConfig fc = cfg.fed->base;
        fc.client_fraction = *g.c;
        fc.seed = seed;
        std::optional<PrivacySpec> ps;
        if (g.eps) {
          ps = cfg.privacy->base;
          ps->epsilon_total = *g.eps;
          const bool classical =
              cfg.privacy->calibration == CalibrationChoice::kClassical ||
              (cfg.privacy->calibration == CalibrationChoice::kAuto &&
               ps->EpsilonPerRound() <= 1.0);
          ps->calibration = classical ? SigmaCalibration::kClassical
                                      : SigmaCalibration::kAnalytic;
        }
        TrainingHistory h = RunFederated(shards, fc, space->dim(), val, test,
                                         ps ? &*ps : nullptr);
        run.metrics = *h.test_metrics;
        run.rounds_run = static_cast<int>(h.rounds.size());
        run.best_round = h.best_round;
        run.stop_reason = std::string(StopReasonName(h.stop_reason));
        for (const RoundRecord& r : h.rounds) {
          run.history.push_back(RoundToJson(r));
          run.wall_ms_rounds.push_back(r.wall_ms);
        }
        if (h.ledger) run.ledger = h.ledger->entries();
        run.model = std::move(h.final_model);
      }
      run.attribution =
          TopFeatures(run.model, test, background, *space, lexicon, cfg.top_k);
      run.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
      bundle.runs.push_back(std::move(run));
    }
  }

  if (cfg.seeds.size() >= 2) {
    for (const std::string& key : bundle.keys) {
      std::vector<double> f1;
      for (const RunRecord* r : bundle.RunsFor(key)) {
        f1.push_back(r->metrics.macro_f1);
      }
      bundle.stability[key] = Stability(f1);
    }
    for (std::size_t i = 0; i < bundle.keys.size(); ++i) {
      for (std::size_t j = i + 1; j < bundle.keys.size(); ++j) {
        std::vector<double> a, b;
        for (const RunRecord* r : bundle.RunsFor(bundle.keys[i])) {
          a.push_back(r->metrics.macro_f1);
        }
        for (const RunRecord* r : bundle.RunsFor(bundle.keys[j])) {
          b.push_back(r->metrics.macro_f1);
        }
        ComparisonRow row;
        row.key_a = bundle.keys[i];
        row.key_b = bundle.keys[j];
        row.pairs = a.size();
        for (std::size_t q = 0; q < a.size(); ++q) row.mean_diff += a[q] - b[q];
        row.mean_diff /= static_cast<double>(a.size());
        row.result = WilcoxonSignedRank(a, b);
        bundle.comparisons.push_back(ComparisonRowToJson(row));
      }
    }
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Bundle I/O

void WriteBundle(const ResultsBundle& bundle, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  json head = {{"schema", kBundleSchema},
               {"config_hash", bundle.config_hash},
               {"pipeline", PipelineName(bundle.pipeline)},
               {"keys", bundle.keys},
               {"config", bundle.config}};
  WriteText(root / "bundle.json", head.dump(2) + "\n");

  std::string metrics, history, ledger, attribution, stability, comparisons;
  for (const RunRecord& r : bundle.runs) {
    json m = {{"config_hash", bundle.config_hash},
              {"key", r.key},
              {"seed", r.seed},
              {"pipeline", PipelineName(r.pipeline)},
              {"epsilon", r.epsilon ? json(*r.epsilon) : json(nullptr)},
              {"client_fraction",
               r.client_fraction ? json(*r.client_fraction) : json(nullptr)},
              {"macro_f1", r.metrics.macro_f1},
              {"macro_recall", r.metrics.macro_recall},
              {"metrics", MetricsToJson(r.metrics)},
              {"stop_reason", r.stop_reason},
              {"rounds_run", r.rounds_run},
              {"best_round", r.best_round}};
    metrics += m.dump() + "\n";
    for (const json& row : r.history) {
      json h = {{"config_hash", bundle.config_hash},
                {"key", r.key},
                {"seed", r.seed}};
      h.update(row);
      history += h.dump() + "\n";
    }
    for (const LedgerEntry& e : r.ledger) {
      json l = {{"config_hash", bundle.config_hash},
                {"key", r.key},
                {"seed", r.seed},
                {"t", e.round},
                {"epsilon_t", e.epsilon},
                {"delta_t", e.delta},
                {"sigma_t", e.sigma},
                {"cumulative_epsilon", e.cumulative_epsilon},
                {"cumulative_delta", e.cumulative_delta}};
      ledger += l.dump() + "\n";
    }
    if (r.attribution) {
      json a = {{"config_hash", bundle.config_hash},
                {"key", r.key},
                {"seed", r.seed},
                {"report", AttributionToJson(*r.attribution)}};
      attribution += a.dump() + "\n";
    }
  }
  for (const std::string& key : bundle.keys) {
    auto it = bundle.stability.find(key);
    if (it != bundle.stability.end()) {
      stability += StabilityToJson(key, it->second).dump() + "\n";
    }
  }
  for (const json& c : bundle.comparisons) comparisons += c.dump() + "\n";

  WriteText(root / "metrics.jsonl", metrics);
  if (!history.empty()) WriteText(root / "history.jsonl", history);
  if (!ledger.empty()) WriteText(root / "ledger.jsonl", ledger);
  if (!attribution.empty()) WriteText(root / "attribution.jsonl", attribution);
  if (!stability.empty()) WriteText(root / "stability.jsonl", stability);
  if (!comparisons.empty()) WriteText(root / "comparisons.jsonl", comparisons);

  if (bundle.space) {
    WriteText(root / "feature_space.json", bundle.space->ToJson().dump() + "\n");
  }
  bool any_model = false;
  for (const RunRecord& r : bundle.runs) any_model |= r.model.dim() > 0;
  if (any_model) {
    fs::create_directories(root / "models");
    for (const RunRecord& r : bundle.runs) {
      if (r.model.dim() == 0) continue;
      json m = ModelToJson(r.model);
      m["config_hash"] = bundle.config_hash;
      m["key"] = r.key;
      m["seed"] = r.seed;
      WriteText(root / "models" /
                    (SafeName(r.key) + "__seed" + std::to_string(r.seed) +
                     ".json"),
                m.dump() + "\n");
    }
  }
}

ResultsBundle ReadBundle(const std::string& dir) {
  const fs::path root(dir);
  const json head = json::parse(ReadText(root / "bundle.json"));
  if (head.value("schema", "") != kBundleSchema) {
    throw InvalidArgument("'" + dir + "' is not a results bundle");
  }
  ResultsBundle bundle;
  bundle.config_hash = head.at("config_hash").get<std::string>();
  bundle.pipeline = ParsePipeline(head.at("pipeline").get<std::string>());
  bundle.keys = head.at("keys").get<std::vector<std::string>>();
  bundle.config = head.at("config");

  std::map<std::pair<std::string, std::uint64_t>, std::size_t> index;
  for (const json& m : ReadJsonLines(root / "metrics.jsonl")) {
    RunRecord r;
    r.key = m.at("key").get<std::string>();
    r.seed = m.at("seed").get<std::uint64_t>();
    r.pipeline = ParsePipeline(m.at("pipeline").get<std::string>());
    if (!m.at("epsilon").is_null()) r.epsilon = m["epsilon"].get<double>();
    if (!m.at("client_fraction").is_null()) {
      r.client_fraction = m["client_fraction"].get<double>();
    }
    r.metrics = MetricsFromJson(m.at("metrics"));
    r.stop_reason = m.at("stop_reason").get<std::string>();
    r.rounds_run = m.at("rounds_run").get<int>();
    r.best_round = m.at("best_round").get<int>();
    index[{r.key, r.seed}] = bundle.runs.size();
    bundle.runs.push_back(std::move(r));
  }
  auto find = [&](const json& row) -> RunRecord& {
    auto it = index.find({row.at("key").get<std::string>(),
                          row.at("seed").get<std::uint64_t>()});
    if (it == index.end()) {
      throw InvalidArgument("bundle row refers to an unknown run");
    }
    return bundle.runs[it->second];
  };
  for (json h : ReadJsonLines(root / "history.jsonl")) {
    RunRecord& r = find(h);
    h.erase("config_hash");
    h.erase("key");
    h.erase("seed");
    r.history.push_back(std::move(h));
  }
  for (const json& l : ReadJsonLines(root / "ledger.jsonl")) {
    LedgerEntry e;
    e.round = l.at("t").get<int>();
    e.epsilon = l.at("epsilon_t").get<double>();
    e.delta = l.at("delta_t").get<double>();
    e.sigma = l.at("sigma_t").get<double>();
    e.cumulative_epsilon = l.at("cumulative_epsilon").get<double>();
    e.cumulative_delta = l.at("cumulative_delta").get<double>();
    find(l).ledger.push_back(e);
  }
  for (const json& a : ReadJsonLines(root / "attribution.jsonl")) {
    find(a).attribution = AttributionFromJson(a.at("report"));
  }
  for (const json& s : ReadJsonLines(root / "stability.jsonl")) {
    StabilityReport st;
    st.n = s.at("n").get<std::size_t>();
    st.mean = s.at("mean").get<double>();
    st.sd = s.at("sd").get<double>();
    st.ci_low = s.at("ci_low").get<double>();
    st.ci_high = s.at("ci_high").get<double>();
    bundle.stability[s.at("key").get<std::string>()] = st;
  }
  for (const json& c : ReadJsonLines(root / "comparisons.jsonl")) {
    bundle.comparisons.push_back(c);
  }
  return bundle;
}

ResultsBundle RunAndWrite(const ExperimentConfig& cfg) {
  const auto started = std::chrono::system_clock::now();
  ResultsBundle bundle = RunExperiment(cfg);
  const std::string dir =
      cfg.output_dir.empty() ? "results/" + cfg.name : cfg.output_dir;
  WriteBundle(bundle, dir);

  auto iso = [](std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
  };
  json runs = json::array();
  for (const RunRecord& r : bundle.runs) {
    runs.push_back({{"key", r.key},
                    {"seed", r.seed},
                    {"wall_ms", r.wall_ms},
                    {"round_wall_ms", r.wall_ms_rounds}});
  }
  json meta = {{"config_hash", bundle.config_hash},
               {"started", iso(started)},
               {"finished", iso(std::chrono::system_clock::now())},
               {"runs", std::move(runs)}};
  WriteText(fs::path(dir) / "meta.json", meta.dump(2) + "\n");
  return bundle;
}

// ---------------------------------------------------------------------------
// Comparison and reporting

nlohmann::json ComparisonRowToJson(const ComparisonRow& row) {
  return {{"key_a", row.key_a},
          {"key_b", row.key_b},
          {"pairs", row.pairs},
          {"mean_diff_f1", row.mean_diff},
          {"W", row.result.statistic},
          {"p_value", row.result.p_value},
          {"n_effective", row.result.n_effective},
          {"all_zero", row.result.all_zero}};
}

std::vector<ComparisonRow> Compare(const ResultsBundle& a,
                                   const ResultsBundle& b) {
  auto by_seed = [](const ResultsBundle& bundle, const std::string& key) {
    std::map<std::uint64_t, double> out;
    for (const RunRecord* r : bundle.RunsFor(key)) {
      out[r->seed] = r->metrics.macro_f1;
    }
    return out;
  };
  auto pair_up = [](const std::map<std::uint64_t, double>& x,
                    const std::map<std::uint64_t, double>& y,
                    std::vector<double>& xa, std::vector<double>& ya) {
    if (x.size() != y.size()) {
      throw MismatchedPairs("bundles ran different seeds");
    }
    for (const auto& [seed, f1] : x) {
      auto it = y.find(seed);
      if (it == y.end()) {
        throw MismatchedPairs("seed " + std::to_string(seed) +
                              " missing from the second bundle");
      }
      xa.push_back(f1);
      ya.push_back(it->second);
    }
  };
  auto make_row = [](std::string ka, std::string kb,
                     const std::vector<double>& xa,
                     const std::vector<double>& ya) {
    ComparisonRow row;
    row.key_a = std::move(ka);
    row.key_b = std::move(kb);
    row.pairs = xa.size();
    for (std::size_t i = 0; i < xa.size(); ++i) row.mean_diff += xa[i] - ya[i];
    if (!xa.empty()) row.mean_diff /= static_cast<double>(xa.size());
    row.result = WilcoxonSignedRank(xa, ya);
    return row;
  };

  std::vector<ComparisonRow> rows;
  if (a.keys.size() == 1 && b.keys.size() == 1) {
    std::vector<double> xa, ya;
    pair_up(by_seed(a, a.keys[0]), by_seed(b, b.keys[0]), xa, ya);
    rows.push_back(make_row(a.keys[0], b.keys[0], xa, ya));
    return rows;
  }
  if (std::set<std::string>(a.keys.begin(), a.keys.end()) !=
      std::set<std::string>(b.keys.begin(), b.keys.end())) {
    throw MismatchedPairs("bundles have different configuration keys");
  }
  std::vector<double> all_a, all_b;
  for (const std::string& key : a.keys) {
    std::vector<double> xa, ya;
    pair_up(by_seed(a, key), by_seed(b, key), xa, ya);
    all_a.insert(all_a.end(), xa.begin(), xa.end());
    all_b.insert(all_b.end(), ya.begin(), ya.end());
    rows.push_back(make_row(key, key, xa, ya));
  }
  if (all_a.size() <= 20) rows.push_back(make_row("all", "all", all_a, all_b));
  return rows;
}

RenderedReport Report(const ResultsBundle& bundle) {
  RenderedReport out;
  std::ostringstream text;
  text << "config " << bundle.config_hash << " ("
       << PipelineName(bundle.pipeline) << ")\n";

  auto mean_of = [&](const std::string& key, auto field) {
    double s = 0.0;
    const auto runs = bundle.RunsFor(key);
    for (const RunRecord* r : runs) s += field(r->metrics);
    return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
  };

  if (bundle.pipeline == Pipeline::kPrivateFederated) {
    std::vector<double> eps, fracs;
    for (const RunRecord& r : bundle.runs) {
      if (r.epsilon &&
          std::find(eps.begin(), eps.end(), *r.epsilon) == eps.end()) {
        eps.push_back(*r.epsilon);
      }
      if (r.client_fraction &&
          std::find(fracs.begin(), fracs.end(), *r.client_fraction) ==
              fracs.end()) {
        fracs.push_back(*r.client_fraction);
      }
    }
    std::sort(eps.begin(), eps.end());
    std::sort(fracs.begin(), fracs.end());
    std::ostringstream csv;
    csv << "epsilon";
    for (double c : fracs) csv << ",c=" << FormatNumber(c);
    csv << "\n";
    text << "\nDP-FL macro recall / macro F1 (x100, mean over seeds)\n";
    text << "epsilon";
    for (double c : fracs) text << "  |  c=" << FormatNumber(c);
    text << "\n";
    for (double e : eps) {
      csv << FormatNumber(e);
      text << FormatNumber(e);
      for (double c : fracs) {
        const std::string key =
            GridKey(Pipeline::kPrivateFederated, e, c);
        const std::string cell =
            Fixed(100.0 * mean_of(key, [](const MetricsReport& m) {
                    return m.macro_recall;
                  }), 2) +
            " / " +
            Fixed(100.0 * mean_of(key, [](const MetricsReport& m) {
                    return m.macro_f1;
                  }), 2);
        csv << "," << cell;
        text << "  |  " << cell;
      }
      csv << "\n";
      text << "\n";
    }
    out.dp_grid_csv = csv.str();
  }

  if (!bundle.stability.empty()) {
    std::ostringstream csv;
    csv << "key,n,mean_f1,sd_f1,ci_low,ci_high,f1_mean_pm_sd\n";
    text << "\nStability of macro F1 over seeds (mean +/- SD)\n";
    for (const std::string& key : bundle.keys) {
      auto it = bundle.stability.find(key);
      if (it == bundle.stability.end()) continue;
      const StabilityReport& s = it->second;
      const std::string pm = Fixed(s.mean, 4) + " ± " + Fixed(s.sd, 4);
      csv << '"' << key << "\"," << s.n << "," << Fixed(s.mean, 4) << ","
          << Fixed(s.sd, 4) << "," << Fixed(s.ci_low, 4) << ","
          << Fixed(s.ci_high, 4) << "," << pm << "\n";
      text << key << ": " << pm << "  (95% CI " << Fixed(s.ci_low, 4) << " to "
           << Fixed(s.ci_high, 4) << ")\n";
    }
    out.stability_csv = csv.str();
  }

  bool any_attr = false;
  for (const RunRecord& r : bundle.runs) any_attr |= r.attribution.has_value();
  if (any_attr) {
    std::ostringstream csv;
    csv << "key,seed,rank,index,tokens,mean_abs_shap,weight,marker\n";
    text << "\nTop features (marker share of top-k, per seed)\n";
    for (const RunRecord& r : bundle.runs) {
      if (!r.attribution) continue;
      text << r.key << " seed " << r.seed << ": "
           << Fixed(r.attribution->marker_share, 2) << "\n";
      for (std::size_t i = 0; i < r.attribution->top.size(); ++i) {
        const AttributedFeature& f = r.attribution->top[i];
        std::string tokens;
        for (const std::string& t : f.tokens) {
          if (!tokens.empty()) tokens += ";";
          tokens += t;
        }
        char num[64];
        std::snprintf(num, sizeof(num), "%.6g,%.6g", f.mean_abs_shap, f.weight);
        csv << '"' << r.key << "\"," << r.seed << "," << (i + 1) << ","
            << f.index << "," << tokens << "," << num << ","
            << (f.marker ? 1 : 0) << "\n";
      }
    }
    out.features_csv = csv.str();
  }
  out.text = text.str();
  return out;
}

void WriteReport(const RenderedReport& report, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  if (report.dp_grid_csv) WriteText(root / "dp_grid.csv", *report.dp_grid_csv);
  if (report.stability_csv) {
    WriteText(root / "stability.csv", *report.stability_csv);
  }
  if (report.features_csv) {
    WriteText(root / "features.csv", *report.features_csv);
  }
  WriteText(root / "report.txt", report.text);
}

}  // namespace fedpriv
