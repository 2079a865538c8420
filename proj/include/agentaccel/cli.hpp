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

// Command implementations behind the agentaccel binary. Each command takes a
// fully resolved RunConfig, so tests can drive them without a process.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "agentaccel/clusterplan.hpp"
#include "agentaccel/common.hpp"
#include "agentaccel/corpus.hpp"
#include "agentaccel/exspec.hpp"
#include "agentaccel/fixtures.hpp"
#include "agentaccel/kvstore.hpp"
#include "agentaccel/lm.hpp"
#include "agentaccel/simulator.hpp"
#include "agentaccel/toolrag.hpp"
#include "agentaccel/weaver.hpp"
#include "json.hpp"

namespace agentaccel::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kCacheDirEnv = "AGENTACCEL_CACHE_DIR";
inline constexpr const char* kVocabName = "vocab.json";

struct RunConfig {
  // paths
  fs::path registry, dataset, examples, templates, plan, cache_dir, trace, out, simulation;
  std::string device = "m4-pro";   // preset name or JSON file
  std::string geometry = "desk";   // preset name (desk, 7b) or JSON file

  // toolrag
  double tau = 0.5;
  std::size_t top_k = 3;  // examples retrieved for the baseline prompt
  std::string scorer = "cosine";

  // weaver
  std::size_t k = 1;

  // exspec
  int n = 3;
  int draft_len = 4;
  bool selective = true;
  std::string extract_region = "fewshot";
  std::size_t max_tokens = 256;
  std::string model = "scripted";
  int markov_order = 4;

  // plan
  std::size_t budget = 15;
  int rank = 8;
  std::uint64_t seed = 42;
  int iters = 500;
  double tol = 1e-6;
  int restarts = 8;

  // run / simulate / report
  std::size_t jobs = 1;
  bool baseline = false;
  bool fresh = false;
  bool calibration = false;
  std::string format = "json";
  std::optional<std::size_t> index;
  std::string query;

  void validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("tau must lie in [0, 1]");
    if (scorer != "cosine" && scorer != "oracle") throw ParameterError("scorer must be cosine or oracle");
    if (k > weaver::kMaxDynamicExamples) throw ParameterError("k must lie in [0, 4]");
    if (n < 2) throw ParameterError("n must be >= 2");
    if (draft_len < 1) throw ParameterError("draft length must be >= 1");
    if (extract_region != "fewshot" && extract_region != "all")
      throw ParameterError("extract must be fewshot or all");
    if (model != "scripted" && model != "markov") throw ParameterError("model must be scripted or markov");
    if (markov_order < 1) throw ParameterError("markov order must be >= 1");
    if (rank < 1) throw ParameterError("rank must be >= 1");
    if (iters < 1) throw ParameterError("iters must be >= 1");
    if (restarts < 1) throw ParameterError("restarts must be >= 1");
    if (jobs < 1) throw ParameterError("jobs must be >= 1");
    if (format != "json" && format != "csv") throw ParameterError("format must be json or csv");
  }

  weaver::ExtractRegion region() const {
    return extract_region == "all" ? weaver::ExtractRegion::kAll : weaver::ExtractRegion::kFewShot;
  }

  json knobs() const {
    return {{"toolrag", {{"tau", tau}, {"top_k", top_k}, {"scorer", scorer}}},
            {"weaver", {{"k", k}}},
            {"exspec",
             {{"n", n},
              {"draft_len", draft_len},
              {"selective", selective},
              {"extract", extract_region},
              {"max_tokens", max_tokens},
              {"model", model},
              {"markov_order", markov_order}}},
            {"plan",
             {{"budget", budget},
              {"rank", rank},
              {"seed", seed},
              {"iters", iters},
              {"tol", tol},
              {"restarts", restarts}}},
            {"geometry", geometry},
            {"device", device}};
  }
};

// Overlays a sectioned JSON config file onto cfg. Unknown keys are errors so
// typos do not silently fall back to defaults.
inline void apply_config(RunConfig& cfg, const json& j, const std::string& file) {
  auto fail = [&](const std::string& field, const std::string& detail) {
    throw LoadError(file, -1, field, detail);
  };
  if (!j.is_object()) fail("", "config must be a JSON object");
  auto section = [&](const char* name, auto&& fn) {
    if (!j.contains(name)) return;
    const auto& s = j.at(name);
    if (!s.is_object()) fail(name, "section must be an object");
    for (const auto& [key, value] : s.items()) {
      try {
        if (!fn(key, value)) fail(std::string(name) + "." + key, "unknown key");
      } catch (const json::exception& e) {
        fail(std::string(name) + "." + key, e.what());
      }
    }
  };
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> kSections = {"paths", "toolrag", "weaver", "exspec", "plan", "run", "simulate"};
    if (!kSections.count(key)) fail(key, "unknown section");
  }
  section("paths", [&](const std::string& k, const json& v) {
    auto p = v.get<std::string>();
    if (k == "registry") cfg.registry = p;
    else if (k == "dataset") cfg.dataset = p;
    else if (k == "examples") cfg.examples = p;
    else if (k == "templates") cfg.templates = p;
    else if (k == "plan") cfg.plan = p;
    else if (k == "cachedir") cfg.cache_dir = p;
    else if (k == "trace") cfg.trace = p;
    else if (k == "device") cfg.device = p;
    else if (k == "geometry") cfg.geometry = p;
    else return false;
    return true;
  });
  section("toolrag", [&](const std::string& k, const json& v) {
    if (k == "tau") cfg.tau = v.get<double>();
    else if (k == "top_k") cfg.top_k = v.get<std::size_t>();
    else if (k == "scorer") cfg.scorer = v.get<std::string>();
    else return false;
    return true;
  });
  section("weaver", [&](const std::string& k, const json& v) {
    if (k == "k") cfg.k = v.get<std::size_t>();
    else return false;
    return true;
  });
  section("exspec", [&](const std::string& k, const json& v) {
    if (k == "n") cfg.n = v.get<int>();
    else if (k == "draft_len") cfg.draft_len = v.get<int>();
    else if (k == "selective") cfg.selective = v.get<bool>();
    else if (k == "extract") cfg.extract_region = v.get<std::string>();
    else if (k == "max_tokens") cfg.max_tokens = v.get<std::size_t>();
    else if (k == "model") cfg.model = v.get<std::string>();
    else if (k == "markov_order") cfg.markov_order = v.get<int>();
    else return false;
    return true;
  });
  section("plan", [&](const std::string& k, const json& v) {
    if (k == "budget") cfg.budget = v.get<std::size_t>();
    else if (k == "rank") cfg.rank = v.get<int>();
    else if (k == "seed") cfg.seed = v.get<std::uint64_t>();
    else if (k == "iters") cfg.iters = v.get<int>();
    else if (k == "tol") cfg.tol = v.get<double>();
    else if (k == "restarts") cfg.restarts = v.get<int>();
    else return false;
    return true;
  });
  section("run", [&](const std::string& k, const json& v) {
    if (k == "jobs") cfg.jobs = v.get<std::size_t>();
    else return false;
    return true;
  });
  section("simulate", [&](const std::string& k, const json& v) {
    if (k == "format") cfg.format = v.get<std::string>();
    else return false;
    return true;
  });
}

inline void load_config(RunConfig& cfg, const fs::path& path) {
  if (!fs::exists(path)) throw MissingInputError("config file '" + path.string() + "' not found");
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw LoadError(path.string(), -1, "", e.what());
  }
  apply_config(cfg, j, path.string());
}

inline fs::path default_cache_dir() {
  if (const char* env = std::getenv(kCacheDirEnv); env && *env) return env;
  return {};
}

inline void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw ParameterError(std::string("missing required path: ") + what);
  if (!fs::exists(p)) throw MissingInputError(std::string(what) + " '" + p.string() + "' not found");
}

inline json input_hashes(std::initializer_list<std::pair<const char*, fs::path>> inputs) {
  json j = json::object();
  for (const auto& [name, path] : inputs)
    if (!path.empty() && fs::exists(path)) j[name] = sha256_file(path);
  return j;
}

inline kvstore::ModelGeometry resolve_geometry(const std::string& g) {
  if (g == "desk") return kvstore::geometry_desk();
  if (g == "7b") return kvstore::geometry_7b();
  if (!fs::exists(g)) throw MissingInputError("geometry '" + g + "' is neither a preset nor a file");
  return kvstore::ModelGeometry::load(g);
}

inline simulator::DeviceSpec resolve_device(const std::string& d) {
  if (fs::exists(d)) return simulator::DeviceSpec::load(d);
  return simulator::device_preset(d);
}

// Everything a command may need, loaded in one fixed order so that token ids
// agree across commands: vocab (next to the plan), registry, examples,
// templates, plan, then the query dataset.
struct Workspace {
  corpus::Tokenizer tok;
  corpus::ToolRegistry registry;
  toolrag::ExampleDatabase db;
  weaver::Templates templates;
  std::optional<clusterplan::ClusterPlan> plan;
  std::unique_ptr<weaver::PromptAssets> assets;
  std::vector<corpus::QuerySample> dataset;
};

inline fs::path vocab_path(const fs::path& plan) { return plan.parent_path() / kVocabName; }

inline std::unique_ptr<Workspace> open_workspace(const RunConfig& cfg, bool need_plan, bool need_dataset) {
  auto w = std::make_unique<Workspace>();
  if (need_plan) {
    require_path(cfg.plan, "plan");
    if (fs::exists(vocab_path(cfg.plan))) w->tok = corpus::Tokenizer::load(vocab_path(cfg.plan));
  }
  require_path(cfg.registry, "registry");
  require_path(cfg.examples, "examples");
  w->registry = corpus::load_registry(cfg.registry, w->tok);
  w->db = toolrag::ExampleDatabase(corpus::load_example_db(cfg.examples, w->registry, w->tok));
  if (!cfg.templates.empty()) {
    require_path(cfg.templates, "templates");
    w->templates = weaver::Templates::load(cfg.templates);
  } else {
    w->templates = fixtures::default_templates();
  }
  if (need_plan) {
    json pj;
    try {
      pj = json::parse(read_file(cfg.plan));
    } catch (const json::exception& e) {
      throw LoadError(cfg.plan.string(), -1, "", e.what());
    }
    w->plan = clusterplan::ClusterPlan::from_json(pj, w->tok, cfg.plan.string());
    w->assets = std::make_unique<weaver::PromptAssets>(w->templates, w->tok, w->registry, *w->plan, w->db);
  }
  if (need_dataset) {
    require_path(cfg.dataset, "dataset");
    w->dataset = corpus::load_dataset(cfg.dataset, w->registry, w->tok);
  }
  return w;
}

// ---------------------------------------------------------------------------
// fixtures
// ---------------------------------------------------------------------------

inline json cmd_fixtures(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ParameterError("missing required path: out");
  auto f = fixtures::generate(cfg.seed);
  fixtures::write(f, cfg.out);
  for (const auto& d : simulator::device_presets())
    write_file_atomic(cfg.out / "devices" / (d.name + ".json"), d.to_json().dump(2) + "\n");
  for (const auto& g : {kvstore::geometry_desk(), kvstore::geometry_7b()})
    write_file_atomic(cfg.out / "geometry" / (g.name + ".json"), g.to_json().dump(2) + "\n");
  return {{"out", cfg.out.string()},
          {"seed", cfg.seed},
          {"train", f.train.size()},
          {"test", f.test.size()},
          {"examples", f.examples.size()}};
}

// ---------------------------------------------------------------------------
// build-plan
// ---------------------------------------------------------------------------

inline json cmd_build_plan(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ParameterError("missing required path: out");
  auto w = open_workspace(cfg, false, true);
  clusterplan::PlanOptions opt;
  opt.nmf.rank = cfg.rank;
  opt.nmf.seed = cfg.seed;
  opt.nmf.max_iters = cfg.iters;
  opt.nmf.tol = cfg.tol;
  opt.nmf.restarts = cfg.restarts;
  opt.budget = cfg.budget;
  auto plan = clusterplan::build_plan(w->registry, w->dataset, w->db.examples(), opt);
  plan.provenance()["inputs"] = input_hashes(
      {{"registry", cfg.registry}, {"dataset", cfg.dataset}, {"examples", cfg.examples}});
  w->tok.save(vocab_path(cfg.out));
  write_file_atomic(cfg.out, plan.to_json().dump(2) + "\n");
  return {{"plan", cfg.out.string()},
          {"clusters", plan.clusters().size()},
          {"combinations", plan.combinations().size()}};
}

// ---------------------------------------------------------------------------
// precompute-cache
// ---------------------------------------------------------------------------

inline json cmd_precompute_cache(const RunConfig& cfg) {
  if (cfg.cache_dir.empty()) throw ParameterError("missing required path: cache dir (or set AGENTACCEL_CACHE_DIR)");
  auto w = open_workspace(cfg, true, false);
  kvstore::KvStore store(cfg.cache_dir, resolve_geometry(cfg.geometry));
  auto prefixes = weaver::cache_prefixes(*w->assets, cfg.budget);
  store.precompute(prefixes);
  return {{"cache_dir", cfg.cache_dir.string()},
          {"entries", store.entries().size()},
          {"total_bytes", store.total_bytes()}};
}

// ---------------------------------------------------------------------------
// Per-query path shared by weave, decode and run
// ---------------------------------------------------------------------------

inline std::unique_ptr<toolrag::ToolScorer> make_scorer(const RunConfig& cfg, const Workspace& w,
                                                        const corpus::QuerySample* sample) {
  if (cfg.scorer == "oracle") {
    if (!sample) throw ParameterError("the oracle scorer needs a dataset sample");
    return std::make_unique<toolrag::OracleScorer>(w.registry, sample->gt_tools);
  }
  return std::make_unique<toolrag::CosineScorer>(w.registry, w.db);
}

struct QueryPrompts {
  std::set<std::string> tools;
  weaver::ReconstructedPrompt planner, planner_baseline, arbiter, arbiter_baseline;
  TokenSequence plan_script, verdict_script;
};

// Tokenizes the scripted outputs of a sample. Must run before any
// concurrent work since it may extend the vocabulary.
inline std::pair<TokenSequence, TokenSequence> scripts_for(corpus::Tokenizer& tok, const corpus::PlanDag& plan) {
  return {tok.tokenize(corpus::render_plan(plan)), tok.tokenize(weaver::render_verdict(plan))};
}

inline QueryPrompts weave_query(const RunConfig& cfg, const Workspace& w, std::span<const Token> query,
                                const TokenSequence& observations, const corpus::PlanDag* gt_plan,
                                const std::set<std::string>& tools, const kvstore::KvStore* store) {
  QueryPrompts q;
  q.tools = tools;
  q.planner = weaver::build_planner_prompt(*w.assets, query, tools, cfg.k, store);
  q.planner_baseline = weaver::build_baseline_prompt(*w.assets, query, tools, cfg.top_k, store);
  auto variant = gt_plan ? weaver::arbiter_variant_for(*gt_plan) : weaver::ArbiterVariant::kMultiCall;
  q.arbiter = weaver::build_arbiter_prompt(*w.assets, observations, variant, store);
  q.arbiter_baseline = weaver::build_arbiter_prompt(*w.assets, observations, variant, nullptr);
  return q;
}

inline simulator::PromptAccount account_of(const weaver::ReconstructedPrompt& p) {
  return {p.total_tokens, p.cacheable_tokens, p.uncacheable_tokens};
}

// Decodes `prompt` in both modes against `target`. The recorded output is
// the one from the configured mode.
inline simulator::DecodeRecord decode_both(const RunConfig& cfg, const lm::TargetModel& target,
                                           const weaver::ReconstructedPrompt& prompt) {
  auto tokens = prompt.tokens();
  auto lut = exspec::build_lut(weaver::extraction_region(prompt, cfg.region()), cfg.n);
  auto sel = exspec::decode(target, tokens, lut, cfg.draft_len, true, cfg.max_tokens);
  auto non = exspec::decode(target, tokens, lut, cfg.draft_len, false, cfg.max_tokens);
  if (sel.output != non.output)
    throw ValidationError("selective and non-selective decoding disagree");  // cannot happen
  simulator::DecodeRecord d;
  d.output_tokens = sel.stats.output_tokens;
  d.stopped_on_eos = sel.stats.stopped_on_eos;
  d.selective = sel.stats;
  d.non_selective = non.stats;
  d.output = cfg.selective ? sel.output : non.output;
  return d;
}

inline std::unique_ptr<kvstore::KvStore> open_store(const RunConfig& cfg) {
  if (cfg.cache_dir.empty()) return nullptr;
  return std::make_unique<kvstore::KvStore>(kvstore::KvStore::open_existing(cfg.cache_dir));
}

// Markov reference model trained on "question + plan" strings of the
// example database, with the verdicts appended.
inline lm::MarkovModel train_reference_markov(const RunConfig& cfg, Workspace& w) {
  std::vector<TokenSequence> corpus;
  for (const auto& ex : w.db.examples()) corpus.push_back(ex.example_tokens);
  for (const auto& s : w.dataset) {
    auto [plan, verdict] = scripts_for(w.tok, s.gt_plan);
    corpus.push_back(std::move(plan));
    corpus.push_back(std::move(verdict));
  }
  return lm::train_markov(corpus, cfg.markov_order, 0.0);
}

// ---------------------------------------------------------------------------
// weave
// ---------------------------------------------------------------------------

inline json cmd_weave(const RunConfig& cfg) {
  bool from_dataset = cfg.index.has_value();
  auto w = open_workspace(cfg, true, from_dataset);
  auto store = open_store(cfg);
  const corpus::QuerySample* sample = nullptr;
  TokenSequence query;
  if (from_dataset) {
    if (*cfg.index >= w->dataset.size()) throw ParameterError("query index out of range");
    sample = &w->dataset[*cfg.index];
    query = sample->query_tokens;
  } else {
    if (cfg.query.empty()) throw ParameterError("weave needs --query or --index");
    query = w->tok.tokenize(cfg.query);
  }
  auto scorer = make_scorer(cfg, *w, sample);
  auto tools = toolrag::retrieve_tools(*scorer, query, cfg.tau);
  auto prompt = cfg.baseline ? weaver::build_baseline_prompt(*w->assets, query, tools, cfg.top_k, store.get())
                             : weaver::build_planner_prompt(*w->assets, query, tools, cfg.k, store.get());
  json j = prompt.to_json(&w->tok);
  j["mode"] = cfg.baseline ? "baseline" : "weaver";
  j["retrieved_tools"] = tools;
  j["knobs"] = cfg.knobs();
  if (!cfg.out.empty()) write_file_atomic(cfg.out, j.dump(2) + "\n");
  return j;
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

inline json cmd_decode(const RunConfig& cfg) {
  auto w = open_workspace(cfg, true, true);
  if (w->dataset.empty()) throw ValidationError("dataset has no samples");
  std::size_t idx = cfg.index.value_or(0);
  if (idx >= w->dataset.size()) throw ParameterError("query index out of range");
  const auto& sample = w->dataset[idx];
  auto store = open_store(cfg);
  auto [plan_script, verdict_script] = scripts_for(w->tok, sample.gt_plan);
  auto obs = w->tok.tokenize(weaver::render_observations(sample.gt_plan));

  std::unique_ptr<lm::TargetModel> model;
  if (cfg.model == "markov") {
    model = std::make_unique<lm::MarkovModel>(train_reference_markov(cfg, *w));
  } else {
    model = std::make_unique<lm::ScriptedModel>();
  }
  auto scorer = make_scorer(cfg, *w, &sample);
  auto tools = toolrag::retrieve_tools(*scorer, sample.query_tokens, cfg.tau);
  auto q = weave_query(cfg, *w, sample.query_tokens, obs, &sample.gt_plan, tools, store.get());
  if (auto* s = dynamic_cast<lm::ScriptedModel*>(model.get())) {
    s->add(q.planner.tokens(), plan_script);
    s->add(q.arbiter.tokens(), verdict_script);
  }
  auto planner = decode_both(cfg, *model, q.planner);
  auto arbiter = decode_both(cfg, *model, q.arbiter);
  const auto& ps = cfg.selective ? planner.selective : planner.non_selective;
  const auto& as = cfg.selective ? arbiter.selective : arbiter.non_selective;
  json j = {{"index", idx},
            {"model", cfg.model},
            {"planner", {{"stats", ps.to_json()}, {"text", w->tok.detokenize(planner.output)}}},
            {"arbiter", {{"stats", as.to_json()}, {"text", w->tok.detokenize(arbiter.output)}}},
            {"knobs", cfg.knobs()}};
  if (!cfg.out.empty()) write_file_atomic(cfg.out, j.dump(2) + "\n");
  return j;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

inline std::string query_id(const fs::path& dataset, std::size_t i) {
  return dataset.stem().string() + "-" + std::to_string(i);
}

inline json cmd_run(const RunConfig& cfg) {
  if (cfg.trace.empty()) throw ParameterError("missing required path: trace");
  auto w = open_workspace(cfg, true, true);
  auto store = open_store(cfg);
  const std::size_t n = w->dataset.size();

  // Sequential phase: everything that can touch the tokenizer.
  std::vector<std::pair<TokenSequence, TokenSequence>> scripts(n);
  std::vector<TokenSequence> observations(n);
  for (std::size_t i = 0; i < n; ++i) {
    scripts[i] = scripts_for(w->tok, w->dataset[i].gt_plan);
    observations[i] = w->tok.tokenize(weaver::render_observations(w->dataset[i].gt_plan));
  }
  std::optional<lm::MarkovModel> markov;
  if (cfg.model == "markov") markov = train_reference_markov(cfg, *w);
  toolrag::CosineScorer cosine(w->registry, w->db);

  std::vector<simulator::TraceRecord> records(n);
  std::vector<std::string> errors(n);
  auto work = [&](std::size_t i) {
    try {
      const auto& s = w->dataset[i];
      std::set<std::string> tools;
      if (cfg.scorer == "oracle") {
        tools = toolrag::retrieve_tools(toolrag::OracleScorer(w->registry, s.gt_tools), s.query_tokens, cfg.tau);
      } else {
        tools = toolrag::retrieve_tools(cosine, s.query_tokens, cfg.tau);
      }
      auto q = weave_query(cfg, *w, s.query_tokens, observations[i], &s.gt_plan, tools, store.get());
      simulator::TraceRecord r;
      r.query_id = query_id(cfg.dataset, i);
      r.tool_calls = s.gt_plan.nodes.size();
      r.planner_baseline = account_of(q.planner_baseline);
      r.planner_weaver = account_of(q.planner);
      r.arbiter_baseline = account_of(q.arbiter_baseline);
      r.arbiter_weaver = account_of(q.arbiter);
      if (markov) {
        r.planner = decode_both(cfg, *markov, q.planner);
        r.arbiter = decode_both(cfg, *markov, q.arbiter);
      } else {
        lm::ScriptedModel target;
        target.add(q.planner.tokens(), scripts[i].first);
        target.add(q.arbiter.tokens(), scripts[i].second);
        r.planner = decode_both(cfg, target, q.planner);
        r.arbiter = decode_both(cfg, target, q.arbiter);
      }
      records[i] = std::move(r);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };

  const std::size_t jobs = std::min(cfg.jobs, std::max<std::size_t>(n, 1));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) work(i);
      });
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) throw ValidationError("query " + query_id(cfg.dataset, i) + ": " + errors[i]);

  // Single writer: existing records first, then this run's in query order.
  std::vector<simulator::TraceRecord> all;
  if (!cfg.fresh && fs::exists(cfg.trace)) all = simulator::load_trace(cfg.trace);
  std::move(records.begin(), records.end(), std::back_inserter(all));
  write_file_atomic(cfg.trace, simulator::dump_trace(all));

  std::uint64_t out_tokens = 0, accepted = 0, generated = 0;
  for (std::size_t i = all.size() - n; i < all.size(); ++i) {
    const auto& r = all[i];
    for (const auto* d : {&r.planner, &r.arbiter}) {
      const auto& s = cfg.selective ? d->selective : d->non_selective;
      out_tokens += d->output_tokens;
      accepted += s.drafts_accepted;
      generated += s.drafts_generated;
    }
  }
  return {{"trace", cfg.trace.string()},
          {"queries", n},
          {"records", all.size()},
          {"output_tokens", out_tokens},
          {"drafts_generated", generated},
          {"drafts_accepted", accepted}};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline simulator::SimConfig sim_config(const RunConfig& cfg) {
  simulator::SimConfig sc;
  sc.device = resolve_device(cfg.device);
  sc.selective = cfg.selective;
  return sc;
}

inline json cmd_simulate(const RunConfig& cfg) {
  std::vector<simulator::TraceRecord> trace;
  if (cfg.calibration) {
    trace = simulator::calibration_trace();
  } else {
    if (cfg.trace.empty()) throw MissingInputError("simulate needs a trace file");
    trace = simulator::load_trace(cfg.trace);
  }
  auto rep = simulator::simulate_pipeline(trace, sim_config(cfg));
  json j = rep.to_json();
  j["inputs"] = input_hashes({{"trace", cfg.trace}});
  j["trace_source"] = cfg.calibration ? "calibration" : "file";
  if (!cfg.out.empty()) {
    write_file_atomic(cfg.out, cfg.format == "csv" ? simulator::report_csv(j) : j.dump(2) + "\n");
  }
  return j;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

// Coverage-vs-budget curve of the plan on the dataset.
inline json coverage_report(const Workspace& w) {
  auto seqs = clusterplan::activation_sequences(w.dataset, *w.plan);
  std::vector<std::size_t> cluster_tokens;
  for (const auto& c : w.plan->clusters()) cluster_tokens.push_back(c.example_tokens.size());
  std::size_t sat = simulator::saturation_budget(seqs);
  std::vector<std::size_t> budgets;
  for (std::size_t b = 0; b <= sat; ++b) budgets.push_back(b);
  auto curve = simulator::coverage_curve(seqs, cluster_tokens, w.assets->static_prefix().size(),
                                         kvstore::geometry_7b(), budgets);
  return simulator::curve_json(curve, simulator::knee(curve), sat);
}

inline std::string render_report(const RunConfig& cfg, const json& j) {
  if (cfg.format == "json") return j.dump(2) + "\n";
  std::string out;
  if (j.contains("simulation")) out += simulator::report_csv(j.at("simulation"));
  if (j.contains("coverage")) {
    if (!out.empty()) out += "\n";
    std::vector<simulator::CurvePoint> curve;
    for (const auto& p : j.at("coverage").at("points"))
      curve.push_back({p.at("budget").get<std::size_t>(), p.at("coverage").get<double>(),
                       p.at("storage_bytes").get<std::uint64_t>()});
    out += simulator::curve_csv(curve);
  }
  return out;
}

inline json cmd_report(const RunConfig& cfg) {
  json j = {{"format", "agentaccel.report/1"}};
  bool any = false;
  if (!cfg.simulation.empty()) {
    require_path(cfg.simulation, "simulation report");
    try {
      j["simulation"] = json::parse(read_file(cfg.simulation));
    } catch (const json::exception& e) {
      throw LoadError(cfg.simulation.string(), -1, "", e.what());
    }
    any = true;
  }
  if (!cfg.plan.empty()) {
    auto w = open_workspace(cfg, true, true);
    j["coverage"] = coverage_report(*w);
    any = true;
  }
  if (!any) throw MissingInputError("report needs --simulation and/or --plan with --dataset");
  if (!cfg.out.empty()) write_file_atomic(cfg.out, render_report(cfg, j));
  return j;
}

}  // namespace agentaccel::cli
