// Copyright 2026 The topicprobe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Every subcommand reads one JSON config (plus
// --set overrides) and prints its summary as JSON on stdout.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "topicprobe/error.h"
#include "topicprobe/experiment.h"
#include "topicprobe/synth.h"
#include "topicprobe/util.h"

namespace fs = std::filesystem;
using namespace topicprobe;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Flags {
  std::string config;
  std::string out;
  int jobs = 0;
  std::string seed_list;
  std::string tasks;
  std::string modes;
  std::vector<std::string> sets;
  std::string finetuned;
  std::string model;
};

std::vector<std::string> list(const std::string& text) {
  std::vector<std::string> out;
  for (const std::string& item : split(text, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ExperimentConfig resolve_config(const Flags& flags) {
  ExperimentConfig cfg = load_config(flags.config, flags.sets);
  if (!flags.out.empty()) cfg.out = fs::absolute(flags.out);
  if (flags.jobs > 0) cfg.jobs = flags.jobs;
  if (!flags.seed_list.empty()) {
    cfg.seeds.clear();
    for (const std::string& s : list(flags.seed_list)) {
      try {
        size_t used = 0;
        cfg.seeds.push_back(std::stoull(s, &used));
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw ConfigError("--seed-list: '" + s + "' is not a seed");
      }
    }
  }
  if (!flags.tasks.empty()) {
    cfg.tasks.clear();
    for (const std::string& t : list(flags.tasks)) cfg.tasks.push_back(parse_task(t));
  }
  if (!flags.modes.empty()) {
    cfg.modes.clear();
    for (const std::string& m : list(flags.modes)) cfg.modes.push_back(parse_mode(m));
  }
  if (!flags.finetuned.empty()) cfg.reprobe_finetuned = fs::absolute(flags.finetuned);
  if (!flags.model.empty()) cfg.reprobe_model = flags.model;
  cfg.validate();
  return cfg;
}

int run_synth(const Flags& flags) {
  nlohmann::json raw = nlohmann::json::object();
  if (!flags.config.empty()) {
    raw = nlohmann::json::parse(read_file(flags.config), nullptr, false);
    if (raw.is_discarded() || !raw.is_object()) {
      throw ConfigError(flags.config + ": not a JSON object");
    }
  }
  for (const std::string& s : flags.sets) apply_override(raw, s);
  SynthConfig cfg;
  try {
    raw.get_to(cfg);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  fs::path out = flags.out;
  if (out.empty()) {
    const char* env = std::getenv("TOPICPROBE_OUT");
    out = env && *env ? fs::path(env) : fs::path("topicprobe_out");
  }
  std::cout << cmd_synth(cfg, fs::absolute(out)).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic-aware linear probing of frozen embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;
  app.add_option("--config", flags.config, "JSON config file");
  app.add_option("--out", flags.out, "Output directory");
  app.add_option("--jobs", flags.jobs, "Parallel jobs")->check(CLI::PositiveNumber);
  app.add_option("--seed-list", flags.seed_list, "Comma-separated seeds");
  app.add_option("--tasks", flags.tasks, "Comma-separated tasks");
  app.add_option("--modes", flags.modes, "Comma-separated modes (in, cross)");
  app.add_option("--set", flags.sets, "Config override key=value")
      ->allow_extra_args(false);

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"ingest-check", "Validate corpus, instances and stores"},
      {"plan", "Write In- and Cross-Topic fold plans"},
      {"probe", "Train and evaluate probes"},
      {"mdl", "Online codelength and compression"},
      {"topicspec", "Score token topic-specificity and build TOPICSPEC"},
      {"amnesic", "Remove topic information and re-probe"},
      {"reprobe", "Compare a fine-tuned store against its baseline"},
      {"report", "Collect summaries into report.md"},
      {"synth", "Generate a synthetic planted-signal dataset"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);
  app.get_subcommand("reprobe")
      ->add_option("--finetuned", flags.finetuned, "Fine-tuned TPRB store");
  app.get_subcommand("reprobe")
      ->add_option("--model", flags.model, "Baseline model key");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "synth") return run_synth(flags);
    const ExperimentConfig cfg = resolve_config(flags);
    if (command == "report") {
      cmd_report(cfg);
      std::cout << (cfg.out / "report.md").string() << "\n";
      return 0;
    }
    nlohmann::ordered_json summary;
    if (command == "ingest-check") summary = cmd_ingest_check(cfg);
    else if (command == "plan") summary = cmd_plan(cfg);
    else if (command == "probe") summary = cmd_probe(cfg);
    else if (command == "mdl") summary = cmd_mdl(cfg);
    else if (command == "topicspec") summary = cmd_topicspec(cfg);
    else if (command == "amnesic") summary = cmd_amnesic(cfg);
    else if (command == "reprobe") summary = cmd_reprobe(cfg);
    summary.erase("provenance");
    summary.erase("runs");
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
