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

// Planner and Arbiter prompt construction with cacheable-token accounting.
//
// Planner (cache-friendly order):
//   static_system | all_tool_descriptions | clustered_examples |
//   single_tool_examples | rag_examples | user_query
// Planner (baseline order):
//   static_system (header only) | retrieved_tool_descriptions |
//   static_guidelines | retrieved_tool_guidelines | rag_examples | user_query
// Arbiter:
//   decision_guidelines | decision_examples | call_observations

#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agentaccel/clusterplan.hpp"
#include "agentaccel/common.hpp"
#include "agentaccel/corpus.hpp"
#include "agentaccel/kvstore.hpp"
#include "agentaccel/toolrag.hpp"
#include "json.hpp"

namespace agentaccel::weaver {

using json = nlohmann::json;
using clusterplan::ClusterPlan;
using corpus::PlanDag;
using corpus::Tokenizer;
using corpus::ToolRegistry;
using corpus::ToolUseExample;

enum class SegmentKind {
  kStaticSystem,
  kAllToolDescriptions,
  kClusteredExamples,
  kSingleToolExamples,
  kRagExamples,
  kUserQuery,
  kCallObservations,
  kDecisionGuidelines,
  kDecisionExamples,
  kRetrievedToolDescriptions,
  kStaticGuidelines,
  kRetrievedToolGuidelines,
};

inline const char* to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::kStaticSystem: return "static_system";
    case SegmentKind::kAllToolDescriptions: return "all_tool_descriptions";
    case SegmentKind::kClusteredExamples: return "clustered_examples";
    case SegmentKind::kSingleToolExamples: return "single_tool_examples";
    case SegmentKind::kRagExamples: return "rag_examples";
    case SegmentKind::kUserQuery: return "user_query";
    case SegmentKind::kCallObservations: return "call_observations";
    case SegmentKind::kDecisionGuidelines: return "decision_guidelines";
    case SegmentKind::kDecisionExamples: return "decision_examples";
    case SegmentKind::kRetrievedToolDescriptions: return "retrieved_tool_descriptions";
    case SegmentKind::kStaticGuidelines: return "static_guidelines";
    case SegmentKind::kRetrievedToolGuidelines: return "retrieved_tool_guidelines";
  }
  return "unknown";
}

// Segments whose content never depends on the query.
inline bool is_static(SegmentKind k) {
  return k == SegmentKind::kStaticSystem || k == SegmentKind::kAllToolDescriptions ||
         k == SegmentKind::kStaticGuidelines || k == SegmentKind::kDecisionGuidelines ||
         k == SegmentKind::kDecisionExamples;
}

struct Segment {
  SegmentKind kind;
  TokenSequence tokens;
  std::vector<std::string> items;  // tool or example ids contributing to the segment
};

struct PromptStats {
  std::size_t activated_tools = 0;
  std::size_t activated_clusters = 0;
  bool degenerate = false;              // empty tool retrieval
  std::size_t duplicate_examples = 0;   // single/RAG examples also present as cluster examples
  std::size_t first_dynamic_offset = 0; // token offset of the first query-dependent segment
};

struct ReconstructedPrompt {
  std::vector<Segment> segments;
  std::size_t total_tokens = 0;
  std::size_t cacheable_tokens = 0;
  std::size_t uncacheable_tokens = 0;
  const kvstore::CacheEntry* cache_entry = nullptr;
  PromptStats stats;

  TokenSequence tokens() const {
    TokenSequence out;
    out.reserve(total_tokens);
    for (const auto& s : segments) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
    return out;
  }

  const Segment* find(SegmentKind k) const {
    for (const auto& s : segments)
      if (s.kind == k) return &s;
    return nullptr;
  }

  json to_json(const Tokenizer* tok = nullptr) const {
    json segs = json::array();
    for (const auto& s : segments) {
      json sj = {{"kind", to_string(s.kind)}, {"length", s.tokens.size()}, {"items", s.items}, {"tokens", s.tokens}};
      if (tok) sj["text"] = tok->detokenize(s.tokens);
      segs.push_back(std::move(sj));
    }
    return {{"segments", segs},
            {"total_tokens", total_tokens},
            {"cacheable_tokens", cacheable_tokens},
            {"uncacheable_tokens", uncacheable_tokens},
            {"cache_entry", cache_entry ? json(cache_entry->key_hash) : json(nullptr)},
            {"stats",
             {{"activated_tools", stats.activated_tools},
              {"activated_clusters", stats.activated_clusters},
              {"degenerate", stats.degenerate},
              {"duplicate_examples", stats.duplicate_examples},
              {"first_dynamic_offset", stats.first_dynamic_offset}}}};
  }
};

// Fixed prompt text. Loaded from a JSON object with the same keys.
struct Templates {
  std::string planner_header;
  std::string planner_rules;
  std::string question_prefix = "Question:";
  std::string answer_prefix = "Plan:";
  std::string arbiter_guidelines;
  std::string arbiter_examples_single;  // variant a: single-call plans
  std::string arbiter_examples_multi;   // variant b: multi-call plans

  json to_json() const {
    return {{"planner_header", planner_header},
            {"planner_rules", planner_rules},
            {"question_prefix", question_prefix},
            {"answer_prefix", answer_prefix},
            {"arbiter_guidelines", arbiter_guidelines},
            {"arbiter_examples_single", arbiter_examples_single},
            {"arbiter_examples_multi", arbiter_examples_multi}};
  }

  static Templates from_json(const json& j, const std::string& file = "templates") {
    Templates t;
    using corpus::detail::require_string;
    t.planner_header = require_string(j, "planner_header", file, -1);
    t.planner_rules = require_string(j, "planner_rules", file, -1);
    t.question_prefix = j.value("question_prefix", t.question_prefix);
    t.answer_prefix = j.value("answer_prefix", t.answer_prefix);
    t.arbiter_guidelines = require_string(j, "arbiter_guidelines", file, -1);
    t.arbiter_examples_single = require_string(j, "arbiter_examples_single", file, -1);
    t.arbiter_examples_multi = require_string(j, "arbiter_examples_multi", file, -1);
    return t;
  }

  static Templates load(const std::filesystem::path& path) {
    try {
      return from_json(json::parse(read_file(path)), path.string());
    } catch (const json::parse_error& e) {
      throw LoadError(path.string(), -1, "", e.what());
    }
  }
};

enum class ArbiterVariant { kSingleCall, kMultiCall };

inline ArbiterVariant arbiter_variant_for(const PlanDag& plan) {
  return plan.nodes.size() <= 1 ? ArbiterVariant::kSingleCall : ArbiterVariant::kMultiCall;
}

inline char variant_letter(ArbiterVariant v) { return v == ArbiterVariant::kSingleCall ? 'a' : 'b'; }

// Everything the prompt builders need, tokenized once. Building the assets
// extends the tokenizer; prompt construction afterwards is read-only.
class PromptAssets {
 public:
  PromptAssets(const Templates& templates, Tokenizer& tok, const ToolRegistry& registry,
               const ClusterPlan& plan, const toolrag::ExampleDatabase& db)
      : registry_(&registry), plan_(&plan), db_(&db) {
    header_ = tok.tokenize(templates.planner_header);
    rules_ = tok.tokenize(templates.planner_rules);
    question_ = tok.tokenize(templates.question_prefix);
    answer_ = tok.tokenize(templates.answer_prefix);
    arbiter_guidelines_ = tok.tokenize(templates.arbiter_guidelines);
    arbiter_examples_[0] = tok.tokenize(templates.arbiter_examples_single);
    arbiter_examples_[1] = tok.tokenize(templates.arbiter_examples_multi);

    for (const auto& t : registry.tools()) {
      append(descriptions_, t.description_tokens);
      append(descriptions_, t.guideline_tokens);
    }

    for (const auto& t : registry.tools()) {
      const ToolUseExample* single = nullptr;
      const ToolUseExample* pair = nullptr;
      for (const auto& ex : db.examples()) {
        if (!ex.tools.count(t.id)) continue;
        if (ex.tools.size() == 1 && (!single || ex.id < single->id)) single = &ex;
        if (ex.tools.size() == 2 && (!pair || ex.id < pair->id)) pair = &ex;
      }
      if (single || pair) single_examples_.emplace(t.id, single ? single : pair);
    }
  }

  const ToolRegistry& registry() const { return *registry_; }
  const ClusterPlan& plan() const { return *plan_; }
  const toolrag::ExampleDatabase& examples() const { return *db_; }

  const TokenSequence& header() const { return header_; }
  const TokenSequence& rules() const { return rules_; }
  const TokenSequence& descriptions() const { return descriptions_; }

  // The single-tool example for a tool, or a two-tool example using it when
  // no single-tool one exists.
  const ToolUseExample* single_example(const std::string& tool) const {
    auto it = single_examples_.find(tool);
    return it == single_examples_.end() ? nullptr : it->second;
  }

  TokenSequence query_segment(std::span<const Token> query) const {
    TokenSequence out = question_;
    append(out, query);
    append(out, answer_);
    return out;
  }

  // Static Planner prefix: header, rules and every tool description.
  TokenSequence static_prefix() const {
    TokenSequence out = header_;
    append(out, rules_);
    append(out, descriptions_);
    return out;
  }

  // Static prefix followed by the representative examples of `combo`.
  TokenSequence combination_prefix(const clusterplan::ActivationSequence& combo) const {
    TokenSequence out = static_prefix();
    for (int c : combo) append(out, plan_->clusters().at(static_cast<std::size_t>(c)).example_tokens);
    return out;
  }

  const TokenSequence& arbiter_guidelines() const { return arbiter_guidelines_; }
  const TokenSequence& arbiter_examples(ArbiterVariant v) const {
    return arbiter_examples_[v == ArbiterVariant::kSingleCall ? 0 : 1];
  }

  TokenSequence arbiter_prefix(ArbiterVariant v) const {
    TokenSequence out = arbiter_guidelines_;
    append(out, arbiter_examples(v));
    return out;
  }

  static void append(TokenSequence& out, std::span<const Token> in) { out.insert(out.end(), in.begin(), in.end()); }

 private:
  const ToolRegistry* registry_;
  const ClusterPlan* plan_;
  const toolrag::ExampleDatabase* db_;
  TokenSequence header_, rules_, question_, answer_, descriptions_, arbiter_guidelines_;
  TokenSequence arbiter_examples_[2];
  std::map<std::string, const ToolUseExample*> single_examples_;
};

namespace detail {

inline void finalize(ReconstructedPrompt& p, const kvstore::KvStore* store) {
  p.total_tokens = 0;
  bool seen_dynamic = false;
  for (const auto& s : p.segments) {
    if (!seen_dynamic && !is_static(s.kind) && !s.tokens.empty()) {
      p.stats.first_dynamic_offset = p.total_tokens;
      seen_dynamic = true;
    }
    p.total_tokens += s.tokens.size();
  }
  if (!seen_dynamic) p.stats.first_dynamic_offset = p.total_tokens;
  p.cacheable_tokens = 0;
  p.cache_entry = nullptr;
  if (store) {
    auto hit = store->longest_cached_prefix(p.tokens());
    p.cache_entry = hit.entry;
    p.cacheable_tokens = hit.match_len;
  }
  p.uncacheable_tokens = p.total_tokens - p.cacheable_tokens;
}

inline std::vector<toolrag::RankedExample> rag(const PromptAssets& a, std::span<const Token> query,
                                               const std::set<std::string>& tools, std::size_t k) {
  return toolrag::retrieve_examples(a.examples(), query, tools, k);
}

}  // namespace detail

inline constexpr std::size_t kMaxDynamicExamples = 4;

inline ReconstructedPrompt build_planner_prompt(const PromptAssets& a, std::span<const Token> query,
                                                const std::set<std::string>& tools, std::size_t k,
                                                const kvstore::KvStore* store) {
  if (k > kMaxDynamicExamples) throw ParameterError("dynamic example count must lie in [0, 4]");
  ReconstructedPrompt p;
  Segment system{SegmentKind::kStaticSystem, a.header(), {}};
  PromptAssets::append(system.tokens, a.rules());
  Segment descs{SegmentKind::kAllToolDescriptions, a.descriptions(), {}};
  for (const auto& t : a.registry().tools()) descs.items.push_back(t.id);

  Segment clustered{SegmentKind::kClusteredExamples, {}, {}};
  auto seq = clusterplan::activation_sequence(tools, a.plan());
  std::set<std::string> cluster_example_ids;
  for (int c : seq) {
    const auto& cl = a.plan().clusters().at(static_cast<std::size_t>(c));
    PromptAssets::append(clustered.tokens, cl.example_tokens);
    clustered.items.push_back(cl.example_id);
    cluster_example_ids.insert(cl.example_id);
  }

  Segment singles{SegmentKind::kSingleToolExamples, {}, {}};
  for (const auto& t : tools) {  // std::set: ascending tool id
    const auto* ex = a.single_example(t);
    if (!ex) continue;
    PromptAssets::append(singles.tokens, ex->example_tokens);
    singles.items.push_back(ex->id);
    if (cluster_example_ids.count(ex->id)) ++p.stats.duplicate_examples;
  }

  Segment rag{SegmentKind::kRagExamples, {}, {}};
  for (const auto& r : detail::rag(a, query, tools, k)) {
    PromptAssets::append(rag.tokens, r.example->example_tokens);
    rag.items.push_back(r.example->id);
    if (cluster_example_ids.count(r.example->id)) ++p.stats.duplicate_examples;
  }

  Segment q{SegmentKind::kUserQuery, a.query_segment(query), {}};

  p.segments = {std::move(system), std::move(descs), std::move(clustered),
                std::move(singles), std::move(rag), std::move(q)};
  p.stats.activated_tools = tools.size();
  p.stats.activated_clusters = seq.size();
  p.stats.degenerate = tools.empty();
  detail::finalize(p, store);
  return p;
}

inline ReconstructedPrompt build_baseline_prompt(const PromptAssets& a, std::span<const Token> query,
                                                 const std::set<std::string>& tools, std::size_t k_rag,
                                                 const kvstore::KvStore* store) {
  ReconstructedPrompt p;
  Segment header{SegmentKind::kStaticSystem, a.header(), {}};
  Segment descs{SegmentKind::kRetrievedToolDescriptions, {}, {}};
  Segment guides{SegmentKind::kRetrievedToolGuidelines, {}, {}};
  for (const auto& id : tools) {
    const auto& t = a.registry().at(id);
    PromptAssets::append(descs.tokens, t.description_tokens);
    PromptAssets::append(guides.tokens, t.guideline_tokens);
    descs.items.push_back(id);
    guides.items.push_back(id);
  }
  Segment rules{SegmentKind::kStaticGuidelines, a.rules(), {}};
  Segment rag{SegmentKind::kRagExamples, {}, {}};
  for (const auto& r : detail::rag(a, query, tools, k_rag)) {
    PromptAssets::append(rag.tokens, r.example->example_tokens);
    rag.items.push_back(r.example->id);
  }
  Segment q{SegmentKind::kUserQuery, a.query_segment(query), {}};
  p.segments = {std::move(header), std::move(descs), std::move(rules),
                std::move(guides), std::move(rag), std::move(q)};
  p.stats.activated_tools = tools.size();
  p.stats.degenerate = tools.empty();
  detail::finalize(p, store);
  return p;
}

inline ReconstructedPrompt build_arbiter_prompt(const PromptAssets& a, std::span<const Token> observations,
                                                ArbiterVariant variant, const kvstore::KvStore* store) {
  ReconstructedPrompt p;
  p.segments = {Segment{SegmentKind::kDecisionGuidelines, a.arbiter_guidelines(), {}},
                Segment{SegmentKind::kDecisionExamples, a.arbiter_examples(variant),
                        {std::string(1, variant_letter(variant))}},
                Segment{SegmentKind::kCallObservations, TokenSequence(observations.begin(), observations.end()), {}}};
  detail::finalize(p, store);
  return p;
}

// Call/observation transcript fed to the Arbiter. Observations are
// synthesized deterministically from the call.
inline std::string render_observations(const PlanDag& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    const auto& n = plan.nodes[i];
    out += "Call: " + n.call + "(";
    for (std::size_t j = 0; j < n.args.size(); ++j) {
      if (j) out += ", ";
      out += n.args[j];
    }
    out += ")\nObservation: " + n.call + " completed";
    if (!n.args.empty() && !corpus::is_reference_arg(n.args.front())) out += " for " + n.args.front();
    out += ".\n";
  }
  return out;
}

// The Arbiter's verdict text for a plan.
inline std::string render_verdict(const PlanDag& plan) {
  std::string calls = std::to_string(plan.nodes.size());
  return "Thought: all " + calls + " calls returned without errors and the task is complete.\nAction: Finish()";
}

// Prefixes to precompute: the static Planner prefix, one entry per cached
// cluster combination and both Arbiter variants.
inline std::vector<kvstore::PrefixRequest> cache_prefixes(const PromptAssets& a, std::size_t budget) {
  std::vector<kvstore::PrefixRequest> out;
  out.push_back({a.static_prefix(), kvstore::EntryTag::kStatic});
  for (const auto& combo : a.plan().combinations_up_to(budget))
    out.push_back({a.combination_prefix(combo), kvstore::EntryTag::kClusterCombination});
  out.push_back({a.arbiter_prefix(ArbiterVariant::kSingleCall), kvstore::EntryTag::kArbiterStatic});
  out.push_back({a.arbiter_prefix(ArbiterVariant::kMultiCall), kvstore::EntryTag::kArbiterStatic});
  return out;
}

enum class ExtractRegion { kFewShot, kAll };

// Token stream the n-gram table is built from: few-shot examples plus the
// query (Planner) or the examples plus observations (Arbiter), or the whole
// prompt.
inline TokenSequence extraction_region(const ReconstructedPrompt& p, ExtractRegion region) {
  if (region == ExtractRegion::kAll) return p.tokens();
  TokenSequence out;
  for (const auto& s : p.segments) {
    switch (s.kind) {
      case SegmentKind::kClusteredExamples:
      case SegmentKind::kSingleToolExamples:
      case SegmentKind::kRagExamples:
      case SegmentKind::kUserQuery:
      case SegmentKind::kDecisionExamples:
      case SegmentKind::kCallObservations:
        PromptAssets::append(out, s.tokens);
        break;
      default:
        break;
    }
  }
  return out;
}

}  // namespace agentaccel::weaver
