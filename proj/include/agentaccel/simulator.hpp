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

// Analytical latency model, trace replay and coverage curves.
//
// Prefill is compute-bound: 2 * params * tokens / (TOPS * utilization).
// Decode is bandwidth-bound: one pass streams the weights once, and a pass
// over k tokens costs tax(k) single-token passes.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "agentaccel/clusterplan.hpp"
#include "agentaccel/common.hpp"
#include "agentaccel/exspec.hpp"
#include "agentaccel/kvstore.hpp"
#include "agentaccel/lm.hpp"
#include "json.hpp"

namespace agentaccel::simulator {

using json = nlohmann::json;
using kvstore::ModelGeometry;
using lm::TaxCurve;

struct DeviceSpec {
  std::string name;
  double compute_tops = 1.0;  // INT8 tera-ops per second
  double mem_bw = 1.0;        // bytes per second
  double ssd_bw = 1.0;        // bytes per second
  double prefill_utilization = 0.35;

  void validate() const {
    if (!(compute_tops > 0 && mem_bw > 0 && ssd_bw > 0))
      throw ParameterError("device '" + name + "': throughput values must be positive");
    if (!(prefill_utilization > 0 && prefill_utilization <= 1))
      throw ParameterError("device '" + name + "': prefill_utilization must lie in (0, 1]");
  }

  json to_json() const {
    return {{"name", name},
            {"compute_tops", compute_tops},
            {"mem_bw", mem_bw},
            {"ssd_bw", ssd_bw},
            {"prefill_utilization", prefill_utilization}};
  }

  static DeviceSpec from_json(const json& j, const std::string& file = "device") {
    DeviceSpec d;
    try {
      d.name = j.at("name").get<std::string>();
      d.compute_tops = j.at("compute_tops").get<double>();
      d.mem_bw = j.at("mem_bw").get<double>();
      d.ssd_bw = j.at("ssd_bw").get<double>();
      d.prefill_utilization = j.value("prefill_utilization", 0.35);
    } catch (const json::exception& e) {
      throw LoadError(file, -1, "", e.what());
    }
    d.validate();
    return d;
  }

  static DeviceSpec load(const std::filesystem::path& path) {
    try {
      return from_json(json::parse(read_file(path)), path.string());
    } catch (const json::parse_error& e) {
      throw LoadError(path.string(), -1, "", e.what());
    }
  }
};

// SSD bandwidth is not part of the published chip table; 7 GB/s (a PCIe 4
// NVMe drive) is assumed for every preset.
inline constexpr double kDefaultSsdBandwidth = 7e9;

// Desk-calibrated Mac-mini-class preset. Utilization was fit so that the
// calibration trace reproduces the measured stage fractions.
inline DeviceSpec m4_pro() { return {"m4-pro", 38.0, 273e9, kDefaultSsdBandwidth, 0.29}; }

inline std::vector<DeviceSpec> device_presets() {
  const double s = kDefaultSsdBandwidth;
  return {
      {"h100", 1979.0, 3350e9, s, 0.35},
      {"h200", 1979.0, 4800e9, s, 0.35},
      {"b200", 4500.0, 8000e9, s, 0.35},
      {"mi325x", 2615.0, 6000e9, s, 0.35},
      {"tpu-v6e", 1836.0, 1640e9, s, 0.35},
      {"m4-max", 38.0, 546e9, s, 0.35},
      {"snapdragon-x-elite", 45.0, 135e9, s, 0.35},
      {"ryzen-ai-pro-395", 50.0, 256e9, s, 0.35},
      m4_pro(),
  };
}

inline DeviceSpec device_preset(const std::string& name) {
  for (auto& d : device_presets())
    if (d.name == name) return d;
  throw ParameterError("unknown device preset '" + name + "'");
}

inline double prefill_latency(std::uint64_t uncached_tokens, const ModelGeometry& g, const DeviceSpec& d) {
  return 2.0 * static_cast<double>(g.param_count) * static_cast<double>(uncached_tokens) /
         (d.compute_tops * 1e12 * d.prefill_utilization);
}

inline double decode_token_latency(const ModelGeometry& g, const DeviceSpec& d) {
  return static_cast<double>(g.params_bytes) / d.mem_bw;
}

inline double verify_latency(int k, const ModelGeometry& g, const DeviceSpec& d, const TaxCurve& tax) {
  return decode_token_latency(g, d) * tax(k);
}

inline double ssd_load_latency(std::uint64_t cached_tokens, const ModelGeometry& g, const DeviceSpec& d) {
  return static_cast<double>(kvstore::kv_size(cached_tokens, g)) / d.ssd_bw;
}

// Expected speedup of draft-model speculative decoding over plain decoding.
// Sizes are parameter counts; a draft token costs draft/target of a target
// pass. Each round drafts N tokens, verifies N + 1 positions and yields the
// accepted run plus one corrected token.
inline double specdec_speedup(double target_size, double draft_size, double alpha, int N, const TaxCurve& tax) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in [0, 1]");
  if (N < 1) throw ParameterError("draft length must be >= 1");
  if (!(target_size > 0.0) || draft_size < 0.0) throw ParameterError("model sizes must be positive");
  double expected = 0.0, p = 1.0;
  for (int i = 1; i <= N; ++i) {
    p *= alpha;
    expected += p;
  }
  double round = N * (draft_size / target_size) + tax(N + 1);
  return (expected + 1.0) / round;
}

// ---------------------------------------------------------------------------
// Breakdown
// ---------------------------------------------------------------------------

enum Stage { kToolRag, kPlannerPrefill, kPlannerDecode, kToolExec, kArbiterPrefill, kArbiterDecode, kSsdLoad };
inline constexpr std::size_t kStageCount = 7;
inline constexpr std::array<const char*, kStageCount> kStageNames = {
    "toolrag", "planner_prefill", "planner_decode", "tool_exec", "arbiter_prefill", "arbiter_decode", "ssd_load"};

struct LatencyBreakdown {
  std::array<double, kStageCount> seconds{};

  double& operator[](Stage s) { return seconds[s]; }
  double operator[](Stage s) const { return seconds[s]; }

  double total() const {
    double t = 0.0;
    for (double s : seconds) t += s;
    return t;
  }

  std::array<double, kStageCount> fractions() const {
    std::array<double, kStageCount> f{};
    double t = total();
    if (t > 0.0)
      for (std::size_t i = 0; i < kStageCount; ++i) f[i] = seconds[i] / t;
    return f;
  }

  double prefill() const { return seconds[kPlannerPrefill] + seconds[kArbiterPrefill] + seconds[kSsdLoad]; }
  double decode() const { return seconds[kPlannerDecode] + seconds[kArbiterDecode]; }
  double other() const { return seconds[kToolRag] + seconds[kToolExec]; }

  LatencyBreakdown& operator+=(const LatencyBreakdown& o) {
    for (std::size_t i = 0; i < kStageCount; ++i) seconds[i] += o.seconds[i];
    return *this;
  }

  LatencyBreakdown scaled(double f) const {
    LatencyBreakdown b = *this;
    for (double& s : b.seconds) s *= f;
    return b;
  }

  json to_json() const {
    json stages = json::object(), frac = json::object();
    auto f = fractions();
    for (std::size_t i = 0; i < kStageCount; ++i) {
      stages[kStageNames[i]] = seconds[i];
      frac[kStageNames[i]] = f[i];
    }
    double t = total();
    return {{"stages", stages},
            {"fractions", frac},
            {"total", t},
            {"prefill_fraction", t > 0 ? prefill() / t : 0.0},
            {"decode_fraction", t > 0 ? decode() / t : 0.0},
            {"other_fraction", t > 0 ? other() / t : 0.0}};
  }
};

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

struct PromptAccount {
  std::uint64_t total_tokens = 0;
  std::uint64_t cacheable_tokens = 0;
  std::uint64_t uncacheable_tokens = 0;

  json to_json() const {
    return {{"total_tokens", total_tokens},
            {"cacheable_tokens", cacheable_tokens},
            {"uncacheable_tokens", uncacheable_tokens}};
  }
};

struct DecodeRecord {
  std::uint64_t output_tokens = 0;
  bool stopped_on_eos = true;
  exspec::DecodeStats selective;
  exspec::DecodeStats non_selective;
  TokenSequence output;  // optional, for equivalence checks across runs

  // Target passes spent by plain autoregressive decoding.
  std::uint64_t autoregressive_passes() const { return output_tokens + (stopped_on_eos ? 1 : 0); }

  json to_json() const {
    json j = {{"output_tokens", output_tokens},
              {"stopped_on_eos", stopped_on_eos},
              {"selective", selective.to_json()},
              {"non_selective", non_selective.to_json()}};
    if (!output.empty()) j["output"] = output;
    return j;
  }
};

struct TraceRecord {
  std::string query_id;
  std::uint64_t tool_calls = 0;
  PromptAccount planner_baseline, planner_weaver, arbiter_baseline, arbiter_weaver;
  DecodeRecord planner, arbiter;

  json to_json() const {
    return {{"query_id", query_id},
            {"tool_calls", tool_calls},
            {"planner", {{"baseline", planner_baseline.to_json()}, {"weaver", planner_weaver.to_json()}}},
            {"arbiter", {{"baseline", arbiter_baseline.to_json()}, {"weaver", arbiter_weaver.to_json()}}},
            {"planner_decode", planner.to_json()},
            {"arbiter_decode", arbiter.to_json()}};
  }
};

namespace detail {

inline PromptAccount parse_account(const json& j, const std::string& what, long record) {
  PromptAccount a;
  try {
    a.total_tokens = j.at("total_tokens").get<std::uint64_t>();
    a.cacheable_tokens = j.at("cacheable_tokens").get<std::uint64_t>();
    a.uncacheable_tokens = j.at("uncacheable_tokens").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError("trace record " + std::to_string(record) + ": " + what + ": " + e.what());
  }
  if (a.cacheable_tokens + a.uncacheable_tokens != a.total_tokens)
    throw ValidationError("trace record " + std::to_string(record) + ": " + what +
                          ": cacheable + uncacheable != total");
  return a;
}

inline DecodeRecord parse_decode(const json& j, const std::string& what, long record) {
  DecodeRecord d;
  try {
    d.output_tokens = j.at("output_tokens").get<std::uint64_t>();
    d.stopped_on_eos = j.value("stopped_on_eos", true);
    d.selective = exspec::DecodeStats::from_json(j.at("selective"));
    d.non_selective = exspec::DecodeStats::from_json(j.at("non_selective"));
    d.output = j.value("output", TokenSequence{});
  } catch (const json::exception& e) {
    throw ValidationError("trace record " + std::to_string(record) + ": " + what + ": " + e.what());
  }
  for (const auto* s : {&d.selective, &d.non_selective}) {
    if (s->drafts_accepted > s->drafts_generated)
      throw ValidationError("trace record " + std::to_string(record) + ": " + what + ": accepted > generated");
    if (s->draft_len < 1 && s->rounds > 0)
      throw ValidationError("trace record " + std::to_string(record) + ": " + what + ": draft_len missing");
  }
  return d;
}

}  // namespace detail

inline TraceRecord parse_trace_record(const json& j, long record) {
  TraceRecord r;
  try {
    r.query_id = j.at("query_id").get<std::string>();
    r.tool_calls = j.at("tool_calls").get<std::uint64_t>();
    r.planner_baseline = detail::parse_account(j.at("planner").at("baseline"), "planner.baseline", record);
    r.planner_weaver = detail::parse_account(j.at("planner").at("weaver"), "planner.weaver", record);
    r.arbiter_baseline = detail::parse_account(j.at("arbiter").at("baseline"), "arbiter.baseline", record);
    r.arbiter_weaver = detail::parse_account(j.at("arbiter").at("weaver"), "arbiter.weaver", record);
    r.planner = detail::parse_decode(j.at("planner_decode"), "planner_decode", record);
    r.arbiter = detail::parse_decode(j.at("arbiter_decode"), "arbiter_decode", record);
  } catch (const json::exception& e) {
    throw ValidationError("trace record " + std::to_string(record) + ": " + e.what());
  }
  return r;
}

inline std::vector<TraceRecord> parse_trace(const std::string& content) {
  std::vector<TraceRecord> out;
  std::istringstream in(content);
  std::string line;
  long record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("trace record " + std::to_string(record) + ": " + e.what());
    }
    out.push_back(parse_trace_record(j, record));
    ++record;
  }
  return out;
}

inline std::vector<TraceRecord> load_trace(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingInputError("trace file '" + path.string() + "' does not exist");
  return parse_trace(read_file(path));
}

inline std::string dump_trace(const std::vector<TraceRecord>& records) {
  std::string out;
  for (const auto& r : records) out += r.to_json().dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline replay
// ---------------------------------------------------------------------------

struct SimConfig {
  DeviceSpec device = m4_pro();
  ModelGeometry geometry = kvstore::geometry_7b();
  TaxCurve tax = TaxCurve::calibrated();
  double tool_exec_seconds = 0.4;  // per tool call
  double toolrag_seconds = 0.1;    // per query
  bool selective = true;           // which decode statistics ES replays

  json to_json() const {
    return {{"device", device.to_json()},
            {"geometry", geometry.to_json()},
            {"tax_curve", tax.to_json()},
            {"tool_exec_seconds", tool_exec_seconds},
            {"toolrag_seconds", toolrag_seconds},
            {"selective", selective}};
  }
};

struct Cell {
  const char* name;
  bool weaver;
  bool exspec;
};

inline constexpr std::array<Cell, 4> kCells = {
    Cell{"baseline", false, false}, Cell{"pw", true, false}, Cell{"es", false, true}, Cell{"pw_es", true, true}};

inline double decode_latency(const DecodeRecord& d, bool exspec, const SimConfig& cfg) {
  double t = decode_token_latency(cfg.geometry, cfg.device);
  if (!exspec) return static_cast<double>(d.autoregressive_passes()) * t;
  const auto& s = cfg.selective ? d.selective : d.non_selective;
  double round = s.rounds ? verify_latency(s.draft_len + 1, cfg.geometry, cfg.device, cfg.tax) : 0.0;
  return static_cast<double>(s.fallbacks) * t + static_cast<double>(s.rounds) * round;
}

inline LatencyBreakdown replay(const TraceRecord& r, const Cell& cell, const SimConfig& cfg) {
  LatencyBreakdown b;
  const auto& planner = cell.weaver ? r.planner_weaver : r.planner_baseline;
  const auto& arbiter = cell.weaver ? r.arbiter_weaver : r.arbiter_baseline;
  b[kToolRag] = cfg.toolrag_seconds;
  b[kToolExec] = cfg.tool_exec_seconds * static_cast<double>(r.tool_calls);
  b[kPlannerPrefill] = prefill_latency(planner.uncacheable_tokens, cfg.geometry, cfg.device);
  b[kArbiterPrefill] = prefill_latency(arbiter.uncacheable_tokens, cfg.geometry, cfg.device);
  if (cell.weaver)
    b[kSsdLoad] = ssd_load_latency(planner.cacheable_tokens + arbiter.cacheable_tokens, cfg.geometry, cfg.device);
  b[kPlannerDecode] = decode_latency(r.planner, cell.exspec, cfg);
  b[kArbiterDecode] = decode_latency(r.arbiter, cell.exspec, cfg);
  return b;
}

struct SimulationReport {
  std::size_t queries = 0;
  std::map<std::string, LatencyBreakdown> mean;  // per-query mean, by cell
  SimConfig config;

  double speedup(const std::string& over, const std::string& cell) const {
    return mean.at(over).total() / mean.at(cell).total();
  }

  json to_json() const {
    json cells = json::object();
    for (const auto& c : kCells) cells[c.name] = mean.at(c.name).to_json();
    json speedups = json::object();
    for (const auto& c : kCells) speedups[c.name] = speedup("baseline", c.name);
    return {{"format", "agentaccel.simulation/1"},
            {"queries", queries},
            {"config", config.to_json()},
            {"cells", cells},
            {"speedup_over_baseline", speedups},
            {"pairwise",
             {{"pw_es_over_pw", speedup("pw", "pw_es")}, {"pw_es_over_es", speedup("es", "pw_es")}}}};
  }
};

inline SimulationReport simulate_pipeline(const std::vector<TraceRecord>& trace, const SimConfig& cfg) {
  if (trace.empty()) throw ValidationError("trace has no records");
  cfg.device.validate();
  SimulationReport rep;
  rep.queries = trace.size();
  rep.config = cfg;
  for (const auto& c : kCells) {
    LatencyBreakdown sum;
    for (const auto& r : trace) sum += replay(r, c, cfg);
    rep.mean[c.name] = sum.scaled(1.0 / static_cast<double>(trace.size()));
  }
  return rep;
}

inline std::string report_csv(const json& report) {
  std::ostringstream os;
  os << "cell,stage,seconds,fraction\n";
  for (const auto& c : kCells) {
    const auto& cj = report.at("cells").at(c.name);
    for (const char* stage : kStageNames)
      os << c.name << ',' << stage << ',' << cj.at("stages").at(stage).get<double>() << ','
         << cj.at("fractions").at(stage).get<double>() << '\n';
    os << c.name << ",total," << cj.at("total").get<double>() << ",1\n";
  }
  return os.str();
}

// Single-query trace assembled from published average token counts and
// draft statistics; used to calibrate the cost model.
inline std::vector<TraceRecord> calibration_trace() {
  TraceRecord r;
  r.query_id = "calibration";
  r.tool_calls = 3;
  r.planner_baseline = {1739, 28, 1711};
  r.planner_weaver = {3790, 3271, 519};
  r.arbiter_baseline = {790, 0, 790};
  r.arbiter_weaver = {790, 702, 88};

  auto stats = [](std::uint64_t gen, std::uint64_t acc, std::uint64_t fb, std::uint64_t rounds, int n,
                  std::uint64_t out, bool selective) {
    exspec::DecodeStats s;
    s.drafts_generated = gen;
    s.drafts_accepted = acc;
    s.fallbacks = fb;
    s.rounds = rounds;
    s.draft_len = n;
    s.output_tokens = out;
    s.selective = selective;
    s.stopped_on_eos = true;
    return s;
  };
  r.planner.output_tokens = 84;
  r.planner.selective = stats(190, 48, 17, 19, 10, 84, true);
  r.planner.non_selective = stats(360, 48, 0, 36, 10, 84, false);
  r.arbiter.output_tokens = 113;
  r.arbiter.selective = stats(220, 56, 37, 20, 11, 113, true);
  r.arbiter.non_selective = stats(627, 56, 0, 57, 11, 113, false);
  return {r};
}

// ---------------------------------------------------------------------------
// Coverage curve
// ---------------------------------------------------------------------------

struct CurvePoint {
  std::size_t budget = 0;
  double coverage = 0.0;           // covered cluster tokens / activated cluster tokens
  std::uint64_t storage_bytes = 0;
};

// Token-weighted coverage of the greedy selection at every budget. Storage
// counts the static prefix plus one full-key entry per cached combination.
inline std::vector<CurvePoint> coverage_curve(std::span<const clusterplan::ActivationSequence> sequences,
                                              std::span<const std::size_t> cluster_tokens,
                                              std::size_t static_tokens, const ModelGeometry& g,
                                              std::span<const std::size_t> budgets) {
  std::size_t max_budget = 0;
  for (auto b : budgets) max_budget = std::max(max_budget, b);
  auto sel = clusterplan::select_combinations(max_budget, sequences);

  std::uint64_t activated = 0;
  for (const auto& s : sequences)
    for (int c : s) activated += cluster_tokens[static_cast<std::size_t>(c)];

  std::vector<CurvePoint> out;
  for (auto b : budgets) {
    clusterplan::CombinationSet cached(sel.picks.begin(),
                                       sel.picks.begin() + static_cast<std::ptrdiff_t>(std::min(b, sel.picks.size())));
    std::uint64_t covered = 0;
    clusterplan::ActivationSequence probe;
    for (const auto& s : sequences) {
      for (std::size_t len = s.size(); len > 0; --len) {
        probe.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(len));
        if (!cached.count(probe)) continue;
        for (int c : probe) covered += cluster_tokens[static_cast<std::size_t>(c)];
        break;
      }
    }
    std::uint64_t storage = kvstore::kv_size(static_tokens, g);
    for (const auto& combo : cached) {
      std::uint64_t tokens = static_tokens;
      for (int c : combo) tokens += cluster_tokens[static_cast<std::size_t>(c)];
      storage += kvstore::kv_size(tokens, g);
    }
    out.push_back({b, activated ? static_cast<double>(covered) / static_cast<double>(activated) : 0.0, storage});
  }
  return out;
}

// Number of distinct non-empty prefixes over all sequences: the budget at
// which the greedy selection has cached everything.
inline std::size_t saturation_budget(std::span<const clusterplan::ActivationSequence> sequences) {
  clusterplan::CombinationSet prefixes;
  for (const auto& s : sequences)
    for (std::size_t len = 1; len <= s.size(); ++len) prefixes.emplace(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(len));
  return prefixes.size();
}

// Knee of a non-decreasing curve: the point farthest above the chord from
// the first to the last point, both axes normalized to [0, 1].
inline std::size_t knee(std::span<const CurvePoint> curve) {
  if (curve.size() < 3) return curve.empty() ? 0 : curve.back().budget;
  const auto& a = curve.front();
  const auto& z = curve.back();
  double bx = static_cast<double>(z.budget - a.budget);
  double cy = z.coverage - a.coverage;
  if (bx <= 0 || cy <= 0) return a.budget;
  std::size_t best = a.budget;
  double best_d = -1.0;
  for (const auto& p : curve) {
    double x = static_cast<double>(p.budget - a.budget) / bx;
    double y = (p.coverage - a.coverage) / cy;
    double d = y - x;
    if (d > best_d) {
      best_d = d;
      best = p.budget;
    }
  }
  return best;
}

inline json curve_json(std::span<const CurvePoint> curve, std::size_t knee_budget, std::size_t saturation) {
  json pts = json::array();
  for (const auto& p : curve)
    pts.push_back({{"budget", p.budget}, {"coverage", p.coverage}, {"storage_bytes", p.storage_bytes}});
  return {{"format", "agentaccel.coverage_curve/1"},
          {"points", pts},
          {"knee_budget", knee_budget},
          {"saturation_budget", saturation}};
}

inline std::string curve_csv(std::span<const CurvePoint> curve) {
  std::ostringstream os;
  os << "budget,coverage,storage_bytes\n";
  for (const auto& p : curve) os << p.budget << ',' << p.coverage << ',' << p.storage_bytes << '\n';
  return os.str();
}

}  // namespace agentaccel::simulator
