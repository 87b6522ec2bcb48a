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

// Command-line front end: synth, run, compare, report, validate-config.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fedpriv/corpus.hpp"
#include "fedpriv/errors.hpp"
#include "fedpriv/experiment.hpp"
#include "fedpriv/lexicon.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
  std::string config;
  std::string preset;
  std::string seed_override;
  std::string out;
};

std::vector<std::uint64_t> ParseSeeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      seeds.push_back(v);
    } catch (const std::exception&) {
      throw fedpriv::ConfigError("--seed-override",
                                 "expected comma-separated integers");
    }
  }
  if (seeds.empty()) {
    throw fedpriv::ConfigError("--seed-override", "no seeds given");
  }
  return seeds;
}

fedpriv::ExperimentConfig Resolve(const CommonFlags& f) {
  json doc = f.config.empty() ? json::object()
                              : fedpriv::ReadConfigDocument(f.config);
  if (!f.seed_override.empty()) doc["seeds"] = ParseSeeds(f.seed_override);
  if (!f.out.empty()) doc["output"] = f.out;
  return fedpriv::ParseConfig(doc, f.preset);
}

int ReportError(const std::string& kind, const std::string& message,
                const json& extra = json::object()) {
  json rec = {{"error", kind}, {"message", message}};
  rec.update(extra);
  std::cerr << rec.dump() << std::endl;
  return kind == "ConfigError" || kind == "UsageError" ? 2 : 1;
}

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (YAML or JSON)");
  cmd->add_option("--preset", f.preset, "Preset defaults")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed-override", f.seed_override,
                  "Comma-separated seeds replacing the config's list");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated and differentially private text classification "
               "experiments"};
  app.require_subcommand(1);

  CommonFlags synth_f, run_f, validate_f;
  std::string report_dir, report_out, compare_out;
  std::vector<std::string> compare_dirs;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset file");
  AddCommon(synth, synth_f);
  synth->add_option("--out", synth_f.out, "Output JSONL path")->required();

  auto* run = app.add_subcommand("run", "Run the configured pipeline");
  AddCommon(run, run_f);
  run->add_option("--out", run_f.out, "Results directory");

  auto* compare = app.add_subcommand("compare", "Paired Wilcoxon of two bundles");
  compare->add_option("bundles", compare_dirs, "Two results directories")
      ->required()
      ->expected(2);
  compare->add_option("--out", compare_out, "Write JSONL rows to this file");

  auto* report = app.add_subcommand("report", "Render tables from a bundle");
  report->add_option("bundle", report_dir, "Results directory")->required();
  report->add_option("--out", report_out, "Directory for CSV tables");

  auto* validate =
      app.add_subcommand("validate-config", "Check a config and print it");
  AddCommon(validate, validate_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return ReportError("UsageError", e.what());
  }

  try {
    if (*synth) {
      const std::string path = synth_f.out;
      synth_f.out.clear();
      const fedpriv::ExperimentConfig cfg = Resolve(synth_f);
      fedpriv::SynthSpec spec = cfg.dataset.synth;
      if (!synth_f.seed_override.empty()) {
        spec.seed = ParseSeeds(synth_f.seed_override).front();
      }
      const auto records =
          fedpriv::SynthGenerate(spec, fedpriv::Lexicon::Default());
      fedpriv::WriteDataset(path, records);
      std::cout << json{{"written", path}, {"users", records.size()}}.dump()
                << std::endl;
    } else if (*run) {
      const fedpriv::ExperimentConfig cfg = Resolve(run_f);
      const fedpriv::ResultsBundle bundle = fedpriv::RunAndWrite(cfg);
      const std::string dir =
          cfg.output_dir.empty() ? "results/" + cfg.name : cfg.output_dir;
      std::cout << json{{"config_hash", bundle.config_hash},
                        {"pipeline", fedpriv::PipelineName(bundle.pipeline)},
                        {"runs", bundle.runs.size()},
                        {"out", dir}}
                       .dump()
                << std::endl;
    } else if (*compare) {
      const auto a = fedpriv::ReadBundle(compare_dirs[0]);
      const auto b = fedpriv::ReadBundle(compare_dirs[1]);
      std::string lines;
      for (const auto& row : fedpriv::Compare(a, b)) {
        lines += fedpriv::ComparisonRowToJson(row).dump() + "\n";
      }
      if (!compare_out.empty()) {
        std::ofstream(compare_out, std::ios::binary) << lines;
      }
      std::cout << lines;
    } else if (*report) {
      const auto rendered = fedpriv::Report(fedpriv::ReadBundle(report_dir));
      if (!report_out.empty()) fedpriv::WriteReport(rendered, report_out);
      std::cout << rendered.text;
    } else if (*validate) {
      const fedpriv::ExperimentConfig cfg = Resolve(validate_f);
      std::cout << json{{"valid", true},
                        {"config_hash", fedpriv::ConfigHash(cfg)},
                        {"pipeline", fedpriv::PipelineName(cfg.pipeline())},
                        {"config", cfg.resolved}}
                       .dump(2)
                << std::endl;
    }
  } catch (const fedpriv::ConfigError& e) {
    return ReportError(e.kind(), e.what(), {{"field", e.field()}});
  } catch (const fedpriv::ParseError& e) {
    return ReportError(e.kind(), e.what(), {{"line", e.line()}});
  } catch (const fedpriv::Error& e) {
    return ReportError(e.kind(), e.what());
  } catch (const std::exception& e) {
    return ReportError("InternalError", e.what());
  }
  return 0;
}
