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

#ifndef FEDPRIV_EXPERIMENT_HPP_
#define FEDPRIV_EXPERIMENT_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedpriv/analysis.hpp"
#include "fedpriv/corpus.hpp"
#include "fedpriv/features.hpp"
#include "fedpriv/fedcore.hpp"
#include "fedpriv/model.hpp"
#include "fedpriv/privacy.hpp"
#include "json.hpp"

namespace fedpriv {

enum class Pipeline { kCentralized, kFederated, kPrivateFederated };
std::string_view PipelineName(Pipeline p);

// Privacy calibration choice at the config level. Auto uses the classical
// bound where it is defined (per-round epsilon <= 1) and the analytic
// calibration otherwise.
enum class CalibrationChoice { kClassical, kAnalytic, kAuto };

struct DatasetConfig {
  bool synthetic = true;
  std::string path;
  SynthSpec synth;
  std::uint64_t split_seed = 7;
};

struct FederatedSection {
  FedConfig base;
  std::vector<double> client_fractions;
};

struct PrivacySection {
  PrivacySpec base;  // rounds defaults to the federated round count
  std::vector<double> epsilons;
  CalibrationChoice calibration = CalibrationChoice::kAuto;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string preset = "paper";
  DatasetConfig dataset;
  std::uint32_t feature_dim = FeatureSpace::kDefaultDim;
  FeatureMode feature_mode = FeatureMode::kTermFrequency;
  TrainConfig model;
  // Epoch count for the centralized pipeline; 0 means model.epochs.
  int centralized_epochs = 0;
  std::optional<FederatedSection> fed;
  std::optional<PrivacySection> privacy;
  std::vector<std::uint64_t> seeds;
  std::size_t top_k = 50;
  std::string lexicon_path;
  std::string output_dir;
  int threads = 1;

  // Fully resolved config as JSON (defaults filled in, canonical key order).
  nlohmann::json resolved;

  Pipeline pipeline() const;
};

// Default values for a preset ("paper" or "desk") as a config document.
nlohmann::json PresetDefaults(std::string_view preset);

// Reads a YAML (or JSON) config file into a JSON document.
nlohmann::json ReadConfigDocument(const std::string& path);

// Overlays `doc` on the preset named by `preset_override`, else by
// doc["preset"], else "paper", and validates. Throws ConfigError with the
// offending field path.
ExperimentConfig ParseConfig(const nlohmann::json& doc,
                             std::string_view preset_override = {});

ExperimentConfig LoadConfig(const std::string& path,
                            std::string_view preset_override = {});

// Content hash of the resolved config, excluding output location and thread
// count. Key order does not matter.
std::string ConfigHash(const ExperimentConfig& cfg);

// One (grid point, seed) execution.
struct RunRecord {
  std::string key;
  std::uint64_t seed = 0;
  Pipeline pipeline = Pipeline::kCentralized;
  std::optional<double> epsilon;
  std::optional<double> client_fraction;
  MetricsReport metrics;
  std::string stop_reason = "completed";
  int rounds_run = 0;
  int best_round = 0;
  std::vector<nlohmann::json> history;  // RoundToJson rows
  std::vector<LedgerEntry> ledger;
  std::optional<AttributionReport> attribution;
  ParameterVector model;  // final global model
  // Wall-clock timings; kept out of the deterministic artifacts.
  double wall_ms = 0.0;
  std::vector<double> wall_ms_rounds;
};

struct ResultsBundle {
  std::string config_hash;
  nlohmann::json config;
  Pipeline pipeline = Pipeline::kCentralized;
  std::vector<std::string> keys;  // grid points in run order
  std::vector<RunRecord> runs;
  std::map<std::string, StabilityReport> stability;
  nlohmann::json comparisons = nlohmann::json::array();
  std::shared_ptr<const FeatureSpace> space;  // not restored by ReadBundle

  std::vector<const RunRecord*> RunsFor(const std::string& key) const;
};

// Executes every grid point for every seed. Pure: no files are written.
ResultsBundle RunExperiment(const ExperimentConfig& cfg);

// Writes the bundle into `dir`: bundle.json, metrics.jsonl, history.jsonl,
// ledger.jsonl (DP only), attribution.jsonl, stability.jsonl,
// comparisons.jsonl. Contents are byte-identical for identical bundles.
void WriteBundle(const ResultsBundle& bundle, const std::string& dir);

ResultsBundle ReadBundle(const std::string& dir);

// Runs the experiment and writes the bundle plus meta.json (timestamps and
// wall-clock) into the output directory.
ResultsBundle RunAndWrite(const ExperimentConfig& cfg);

struct ComparisonRow {
  std::string key_a;
  std::string key_b;
  std::size_t pairs = 0;
  double mean_diff = 0.0;  // mean of (a - b) macro F1
  ComparisonResult result;
};

// Paired Wilcoxon over macro F1. Bundles with one grid point each are paired
// by seed; otherwise by (grid point, seed), one row per grid point plus an
// "all" row over every pair. Throws MismatchedPairs when the keys differ.
std::vector<ComparisonRow> Compare(const ResultsBundle& a,
                                   const ResultsBundle& b);

nlohmann::json ComparisonRowToJson(const ComparisonRow& row);

struct RenderedReport {
  std::optional<std::string> dp_grid_csv;
  std::optional<std::string> stability_csv;
  std::optional<std::string> features_csv;
  std::string text;
};

// Pure rendering of a bundle. Cells are means over seeds, x100, 2 decimals.
RenderedReport Report(const ResultsBundle& bundle);

// Writes the non-empty tables of Report() into `dir`.
void WriteReport(const RenderedReport& report, const std::string& dir);

}  // namespace fedpriv

#endif  // FEDPRIV_EXPERIMENT_HPP_
