// Copyright 2026 The agentaccel Authors
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

// agentaccel: offline planning, cache precomputation, online runs,
// simulation and reports.
//
// Precedence for every knob: built-in default < AGENTACCEL_CACHE_DIR (cache
// dir only) < --config file < explicit flag.

#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agentaccel/cli.hpp"

namespace {

using agentaccel::cli::RunConfig;
using json = nlohmann::json;

// Flags parse into a staging config; only the ones actually given are copied
// over the file-backed config afterwards.
class Flags {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& help) {
    auto* opt = app->add_option(name, staged_.*field, help);
    overlays_.push_back([opt, field, this](RunConfig& cfg) {
      if (opt->count()) cfg.*field = staged_.*field;
    });
    return opt;
  }

  CLI::Option* add_switch(CLI::App* app, const std::string& name, bool RunConfig::*field, const std::string& help) {
    auto* opt = app->add_flag(name, staged_.*field, help);
    overlays_.push_back([opt, field, this](RunConfig& cfg) {
      if (opt->count()) cfg.*field = staged_.*field;
    });
    return opt;
  }

  CLI::Option* add_on_off(CLI::App* app, const std::string& name, bool RunConfig::*field, const std::string& help) {
    auto* opt = app->add_option(name, on_off_, help)->check(CLI::IsMember({"on", "off"}));
    overlays_.push_back([opt, field, this](RunConfig& cfg) {
      if (opt->count()) cfg.*field = on_off_ == "on";
    });
    return opt;
  }

  void index(CLI::App* app) {
    auto* opt = app->add_option("--index", index_, "Query index in the dataset");
    overlays_.push_back([opt, this](RunConfig& cfg) {
      if (opt->count()) cfg.index = index_;
    });
  }

  void apply(RunConfig& cfg) const {
    for (const auto& f : overlays_) f(cfg);
  }

 private:
  RunConfig staged_;
  std::string on_off_;
  std::size_t index_ = 0;
  std::vector<std::function<void(RunConfig&)>> overlays_;
};

void corpus_flags(Flags& f, CLI::App* app) {
  f.add(app, "--registry", &RunConfig::registry, "Tool registry JSON");
  f.add(app, "--examples", &RunConfig::examples, "Example database JSONL");
  f.add(app, "--templates", &RunConfig::templates, "Prompt templates JSON (built-in templates if omitted)");
}

void toolrag_flags(Flags& f, CLI::App* app) {
  f.add(app, "--tau", &RunConfig::tau, "Tool retrieval threshold");
  f.add(app, "--top-k", &RunConfig::top_k, "Examples retrieved for the baseline prompt");
  f.add(app, "--scorer", &RunConfig::scorer, "Tool scorer")->check(CLI::IsMember({"cosine", "oracle"}));
}

void exspec_flags(Flags& f, CLI::App* app) {
  f.add(app, "--n", &RunConfig::n, "n-gram size");
  f.add(app, "--draft-len", &RunConfig::draft_len, "Draft tokens per round");
  f.add_on_off(app, "--selective", &RunConfig::selective, "Selective fallback on LUT miss");
  f.add(app, "--extract", &RunConfig::extract_region, "LUT extraction region")
      ->check(CLI::IsMember({"fewshot", "all"}));
  f.add(app, "--max-tokens", &RunConfig::max_tokens, "Output token limit per decode");
  f.add(app, "--model", &RunConfig::model, "Reference target model")->check(CLI::IsMember({"scripted", "markov"}));
  f.add(app, "--markov-order", &RunConfig::markov_order, "Markov model order");
}

int fail(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << std::endl;
  return exit_code;
}

int exit_code_for(const std::string& code) {
  if (code == "parameter") return 2;
  if (code == "missing_input") return 3;
  if (code == "load" || code == "referential_integrity" || code == "validation") return 4;
  if (code == "integrity") return 5;
  if (code == "storage") return 6;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agentaccel: prompt reconstruction and lookup-table speculative decoding for tool-calling agents"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  std::string config_file;
  app.add_option("--config", config_file, "Sectioned JSON configuration file");
  Flags flags;

  auto* fixtures = app.add_subcommand("fixtures", "Write the synthetic fixture dataset, device presets and geometries");
  flags.add(fixtures, "--out", &RunConfig::out, "Output directory")->required();
  flags.add(fixtures, "--seed", &RunConfig::seed, "Generator seed (default 7)");

  auto* build = app.add_subcommand("build-plan", "Cluster tools and select cached cluster combinations");
  corpus_flags(flags, build);
  flags.add(build, "--dataset", &RunConfig::dataset, "Training dataset JSONL");
  flags.add(build, "--budget", &RunConfig::budget, "Number of cached combinations");
  flags.add(build, "--rank", &RunConfig::rank, "NMF rank");
  flags.add(build, "--seed", &RunConfig::seed, "NMF seed");
  flags.add(build, "--iters", &RunConfig::iters, "NMF iteration limit");
  flags.add(build, "--tol", &RunConfig::tol, "NMF relative improvement tolerance");
  flags.add(build, "--restarts", &RunConfig::restarts, "NMF random restarts");
  flags.add(build, "--out", &RunConfig::out, "Plan JSON output (vocab.json is written next to it)");

  auto* precompute = app.add_subcommand("precompute-cache", "Write KV blobs for the plan's cacheable prefixes");
  corpus_flags(flags, precompute);
  flags.add(precompute, "--plan", &RunConfig::plan, "Plan JSON");
  flags.add(precompute, "--budget", &RunConfig::budget, "Cached combinations to materialize");
  flags.add(precompute, "--geometry", &RunConfig::geometry, "Geometry preset (desk, 7b) or JSON file");
  flags.add(precompute, "--out,--cache", &RunConfig::cache_dir, "Cache directory");

  auto* weave = app.add_subcommand("weave", "Reconstruct one Planner prompt and account its tokens");
  corpus_flags(flags, weave);
  toolrag_flags(flags, weave);
  flags.add(weave, "--plan", &RunConfig::plan, "Plan JSON");
  flags.add(weave, "--cache", &RunConfig::cache_dir, "Cache directory");
  flags.add(weave, "--query", &RunConfig::query, "Query text");
  flags.add(weave, "--dataset", &RunConfig::dataset, "Dataset JSONL (with --index)");
  flags.index(weave);
  flags.add(weave, "--k", &RunConfig::k, "Dynamic examples appended (0-4)");
  flags.add_switch(weave, "--baseline", &RunConfig::baseline, "Build the baseline prompt instead");
  flags.add(weave, "--emit,--out", &RunConfig::out, "Prompt JSON output");

  auto* decode = app.add_subcommand("decode", "Decode one dataset query with lookup-table speculation");
  corpus_flags(flags, decode);
  toolrag_flags(flags, decode);
  exspec_flags(flags, decode);
  flags.add(decode, "--plan", &RunConfig::plan, "Plan JSON");
  flags.add(decode, "--cache", &RunConfig::cache_dir, "Cache directory");
  flags.add(decode, "--dataset", &RunConfig::dataset, "Dataset JSONL");
  flags.index(decode);
  flags.add(decode, "--k", &RunConfig::k, "Dynamic examples appended (0-4)");
  flags.add(decode, "--stats,--out", &RunConfig::out, "Stats JSON output");

  auto* run = app.add_subcommand("run", "Run every dataset query end to end and append trace records");
  corpus_flags(flags, run);
  toolrag_flags(flags, run);
  exspec_flags(flags, run);
  flags.add(run, "--plan", &RunConfig::plan, "Plan JSON");
  flags.add(run, "--cache", &RunConfig::cache_dir, "Cache directory");
  flags.add(run, "--dataset", &RunConfig::dataset, "Query dataset JSONL");
  flags.add(run, "--k", &RunConfig::k, "Dynamic examples appended (0-4)");
  flags.add(run, "--trace", &RunConfig::trace, "Trace JSONL (appended)");
  flags.add(run, "--jobs", &RunConfig::jobs, "Concurrent queries");
  flags.add_switch(run, "--fresh", &RunConfig::fresh, "Replace the trace instead of appending");

  auto* simulate = app.add_subcommand("simulate", "Replay a trace through the analytical cost model");
  flags.add(simulate, "--trace", &RunConfig::trace, "Trace JSONL");
  flags.add_switch(simulate, "--calibration", &RunConfig::calibration, "Use the built-in calibration trace");
  flags.add(simulate, "--device", &RunConfig::device, "Device preset name or JSON file");
  flags.add_on_off(simulate, "--selective", &RunConfig::selective, "Which decode statistics to replay");
  flags.add(simulate, "--format", &RunConfig::format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  flags.add(simulate, "--out", &RunConfig::out, "Report output");

  auto* report = app.add_subcommand("report", "Emit simulation and coverage reports as JSON or CSV");
  corpus_flags(flags, report);
  flags.add(report, "--simulation", &RunConfig::simulation, "Simulation report JSON");
  flags.add(report, "--plan", &RunConfig::plan, "Plan JSON (adds the coverage curve)");
  flags.add(report, "--dataset", &RunConfig::dataset, "Dataset JSONL for the coverage curve");
  flags.add(report, "--format", &RunConfig::format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  flags.add(report, "--out", &RunConfig::out, "Report output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    RunConfig cfg;
    if (fixtures->parsed()) cfg.seed = 7;
    cfg.cache_dir = agentaccel::cli::default_cache_dir();
    if (!config_file.empty()) agentaccel::cli::load_config(cfg, config_file);
    flags.apply(cfg);
    cfg.validate();

    json result;
    if (fixtures->parsed()) result = agentaccel::cli::cmd_fixtures(cfg);
    else if (build->parsed()) result = agentaccel::cli::cmd_build_plan(cfg);
    else if (precompute->parsed()) result = agentaccel::cli::cmd_precompute_cache(cfg);
    else if (weave->parsed()) result = agentaccel::cli::cmd_weave(cfg);
    else if (decode->parsed()) result = agentaccel::cli::cmd_decode(cfg);
    else if (run->parsed()) result = agentaccel::cli::cmd_run(cfg);
    else if (simulate->parsed()) result = agentaccel::cli::cmd_simulate(cfg);
    else if (report->parsed()) result = agentaccel::cli::cmd_report(cfg);

    // Artifact-writing commands print a summary; the rest print their
    // document unless it went to --out.
    bool summary = fixtures->parsed() || build->parsed() || precompute->parsed() || run->parsed();
    if (summary) {
      std::cout << result.dump(2) << "\n";
    } else if (cfg.out.empty()) {
      if (simulate->parsed() && cfg.format == "csv")
        std::cout << agentaccel::simulator::report_csv(result);
      else if (report->parsed())
        std::cout << agentaccel::cli::render_report(cfg, result);
      else
        std::cout << result.dump(2) << "\n";
    }
    return 0;
  } catch (const agentaccel::Error& e) {
    return fail(e.code(), e.what(), exit_code_for(e.code()));
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
