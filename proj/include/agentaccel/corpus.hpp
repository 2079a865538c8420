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

// Corpus ingestion: the reference tokenizer, tool registries, query datasets,
// tool-use example databases and tool co-activation statistics.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "agentaccel/common.hpp"
#include "json.hpp"

namespace agentaccel::corpus {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

// Whitespace + punctuation tokenizer with ASCII lowercase normalization.
//
// A word is a maximal run of ASCII letters, digits, '_' or non-ASCII bytes;
// every other non-space byte is a single-character token. Ids are handed out
// append-only starting at 1 (0 is the end-of-sequence sentinel).
//
// Round trip: detokenize(tokenize(s)) == normalize(s), where normalize joins
// the lowercased words of s with single spaces.
class Tokenizer {
 public:
  static bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c >= 0x80;
  }

  static bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  }

  static std::vector<std::string> split(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
      auto c = static_cast<unsigned char>(text[i]);
      if (is_space(c)) {
        ++i;
      } else if (is_word_byte(c)) {
        std::string w;
        while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
          auto b = static_cast<unsigned char>(text[i]);
          w.push_back(b >= 'A' && b <= 'Z' ? static_cast<char>(b - 'A' + 'a')
                                           : static_cast<char>(b));
          ++i;
        }
        words.push_back(std::move(w));
      } else {
        words.emplace_back(1, static_cast<char>(c));
        ++i;
      }
    }
    return words;
  }

  static std::string normalize(std::string_view text) {
    std::string out;
    for (const auto& w : split(text)) {
      if (!out.empty()) out.push_back(' ');
      out += w;
    }
    return out;
  }

  TokenSequence tokenize(std::string_view text) {
    TokenSequence out;
    for (auto& w : split(text)) out.push_back(intern(std::move(w)));
    return out;
  }

  // Read-only variant: returns nullopt if any word is not in the vocabulary.
  std::optional<TokenSequence> tokenize_known(std::string_view text) const {
    TokenSequence out;
    for (const auto& w : split(text)) {
      auto id = find(w);
      if (!id) return std::nullopt;
      out.push_back(*id);
    }
    return out;
  }

  std::string detokenize(std::span<const Token> tokens) const {
    std::string out;
    for (Token t : tokens) {
      if (!out.empty()) out.push_back(' ');
      out += word(t);
    }
    return out;
  }

  std::optional<Token> find(std::string_view word) const {
    auto it = ids_.find(std::string(word));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& word(Token t) const {
    static const std::string kEos = "<eos>";
    static const std::string kUnknown = "<unk>";
    if (t == kEndOfSequence) return kEos;
    if (t > words_.size()) return kUnknown;
    return words_[t - 1];
  }

  // Number of distinct words (the sentinel is not counted).
  std::size_t size() const { return words_.size(); }

  json to_json() const {
    json j = json::object();
    for (std::size_t i = 0; i < words_.size(); ++i) j[words_[i]] = i + 1;
    return j;
  }

  static Tokenizer from_json(const json& j) {
    if (!j.is_object()) throw LoadError("vocabulary", -1, "", "expected a JSON object");
    std::vector<std::pair<Token, std::string>> entries;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_number_unsigned())
        throw LoadError("vocabulary", -1, it.key(), "id must be a positive integer");
      entries.emplace_back(it.value().get<Token>(), it.key());
    }
    std::sort(entries.begin(), entries.end());
    Tokenizer tok;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].first != i + 1)
        throw LoadError("vocabulary", -1, entries[i].second, "ids must be dense and start at 1");
      tok.intern(entries[i].second);
    }
    return tok;
  }

  void save(const std::filesystem::path& path) const {
    write_file_atomic(path, to_json().dump(1) + "\n");
  }

  static Tokenizer load(const std::filesystem::path& path) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
      throw LoadError(path.string(), -1, "", e.what());
    }
    return from_json(j);
  }

 private:
  Token intern(std::string w) {
    auto it = ids_.find(w);
    if (it != ids_.end()) return it->second;
    Token id = static_cast<Token>(words_.size() + 1);
    words_.push_back(w);
    ids_.emplace(std::move(w), id);
    return id;
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, Token> ids_;
};

// ---------------------------------------------------------------------------
// Registry, datasets, example databases
// ---------------------------------------------------------------------------

struct Tool {
  std::string id;
  std::string name;
  std::string theme;
  std::string description;
  std::string guidelines;
  TokenSequence description_tokens;
  TokenSequence guideline_tokens;
};

// Tools are kept in ascending id order; a tool's index is its position.
class ToolRegistry {
 public:
  ToolRegistry() = default;
  ToolRegistry(std::vector<std::string> themes, std::vector<Tool> tools)
      : themes_(std::move(themes)), tools_(std::move(tools)) {
    std::sort(tools_.begin(), tools_.end(),
              [](const Tool& a, const Tool& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < tools_.size(); ++i) index_.emplace(tools_[i].id, i);
  }

  const std::vector<std::string>& themes() const { return themes_; }
  const std::vector<Tool>& tools() const { return tools_; }
  std::size_t size() const { return tools_.size(); }
  bool contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const Tool& at(std::string_view id) const {
    auto idx = index_of(id);
    if (!idx) throw ReferentialError("unknown tool '" + std::string(id) + "'");
    return tools_[*idx];
  }

  // Position of a theme in the declared theme list.
  std::size_t theme_rank(std::string_view theme) const {
    auto it = std::find(themes_.begin(), themes_.end(), theme);
    return static_cast<std::size_t>(it - themes_.begin());
  }

 private:
  std::vector<std::string> themes_;
  std::vector<Tool> tools_;
  std::map<std::string, std::size_t> index_;
};

struct PlanNode {
  std::string call;
  std::vector<std::string> args;  // literal strings or "$k" references (1-based)

  bool operator==(const PlanNode&) const = default;
};

struct PlanDag {
  std::vector<PlanNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // from -> to, 0-based

  bool operator==(const PlanDag&) const = default;
};

struct QuerySample {
  std::string query_text;
  TokenSequence query_tokens;
  std::set<std::string> gt_tools;
  PlanDag gt_plan;
};

struct ToolUseExample {
  std::string id;
  std::string text;
  TokenSequence example_tokens;
  std::set<std::string> tools;
  std::vector<double> query_embedding;  // filled by toolrag::ExampleDatabase
};

inline bool is_reference_arg(std::string_view arg) {
  if (arg.size() < 2 || arg[0] != '$') return false;
  return std::all_of(arg.begin() + 1, arg.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

inline bool is_acyclic(const PlanDag& plan) {
  const std::size_t n = plan.nodes.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  for (auto [a, b] : plan.edges) {
    out[a].push_back(b);
    ++indegree[b];
  }
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::size_t seen = 0;
  while (!ready.empty()) {
    std::size_t v = ready.back();
    ready.pop_back();
    ++seen;
    for (std::size_t w : out[v])
      if (--indegree[w] == 0) ready.push_back(w);
  }
  return seen == n;
}

// Text form of a plan as the Planner emits it.
inline std::string render_plan(const PlanDag& plan) {
  std::ostringstream os;
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    const auto& node = plan.nodes[i];
    os << (i + 1) << ". " << node.call << "(";
    for (std::size_t a = 0; a < node.args.size(); ++a) {
      if (a) os << ", ";
      if (is_reference_arg(node.args[a])) {
        os << node.args[a];
      } else {
        os << '"' << node.args[a] << '"';
      }
    }
    os << ")\n";
  }
  os << (plan.nodes.size() + 1) << ". join()<END_OF_PLAN>";
  return os.str();
}

// Structural plan equality: node labels are the call plus its arguments with
// "$k" references replaced by the referenced node's label, together with the
// labels of all predecessors. Two plans match when their label multisets are
// equal, so node numbering and the order of independent calls do not matter.
inline bool plan_dag_match(const PlanDag& a, const PlanDag& b) {
  auto labels = [](const PlanDag& p) -> std::optional<std::multiset<std::string>> {
    const std::size_t n = p.nodes.size();
    if (!is_acyclic(p)) return std::nullopt;
    std::vector<std::vector<std::size_t>> preds(n);
    for (auto [from, to] : p.edges) {
      if (from >= n || to >= n) return std::nullopt;
      preds[to].push_back(from);
    }
    std::vector<std::optional<std::string>> memo(n);
    std::vector<char> open(n, 0);
    // Recursion depth is bounded by plan length, which is small. A "$k"
    // reference back into the current chain is kept verbatim.
    std::function<std::string(std::size_t)> label = [&](std::size_t i) -> std::string {
      if (memo[i]) return *memo[i];
      if (open[i]) return "$" + std::to_string(i + 1);
      open[i] = 1;
      std::string s = p.nodes[i].call + "(";
      for (const auto& arg : p.nodes[i].args) {
        if (is_reference_arg(arg)) {
          std::size_t k = std::stoul(arg.substr(1));
          s += (k >= 1 && k <= n && k - 1 != i) ? "{" + label(k - 1) + "}" : arg;
        } else {
          s += '"' + arg + '"';
        }
        s += ",";
      }
      s += ")<-[";
      std::vector<std::string> ps;
      for (std::size_t q : preds[i]) ps.push_back(label(q));
      std::sort(ps.begin(), ps.end());
      for (const auto& q : ps) s += q + ";";
      s += "]";
      open[i] = 0;
      memo[i] = s;
      return s;
    };
    std::multiset<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.insert(label(i));
    return out;
  };
  auto la = labels(a);
  auto lb = labels(b);
  return la && lb && *la == *lb;
}

namespace detail {

inline const json& require(const json& obj, const char* field, const std::string& file,
                           long record) {
  if (!obj.is_object()) throw LoadError(file, record, "", "expected a JSON object");
  auto it = obj.find(field);
  if (it == obj.end()) throw LoadError(file, record, field, "missing");
  return *it;
}

inline std::string require_string(const json& obj, const char* field,
                                  const std::string& file, long record) {
  const json& v = require(obj, field, file, record);
  if (!v.is_string()) throw LoadError(file, record, field, "expected a string");
  return v.get<std::string>();
}

inline std::vector<std::string> require_string_array(const json& obj, const char* field,
                                                     const std::string& file, long record) {
  const json& v = require(obj, field, file, record);
  if (!v.is_array()) throw LoadError(file, record, field, "expected an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw LoadError(file, record, field, "expected an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

// Parses JSON-lines content; blank lines are skipped but still count toward
// the line index used in error messages.
inline std::vector<std::pair<long, json>> parse_jsonl(const std::string& content,
                                                      const std::string& file) {
  std::vector<std::pair<long, json>> out;
  std::istringstream in(content);
  std::string line;
  long record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      try {
        out.emplace_back(record, json::parse(line));
      } catch (const json::parse_error& e) {
        throw LoadError(file, record, "", std::string("malformed JSON: ") + e.what());
      }
    }
    ++record;
  }
  return out;
}

}  // namespace detail

inline ToolRegistry parse_registry(const json& doc, const std::string& file,
                                   Tokenizer& tok) {
  auto themes = detail::require_string_array(doc, "themes", file, -1);
  std::set<std::string> theme_set(themes.begin(), themes.end());
  const json& tools_json = detail::require(doc, "tools", file, -1);
  if (!tools_json.is_array()) throw LoadError(file, -1, "tools", "expected an array");
  std::vector<Tool> tools;
  std::set<std::string> ids;
  long index = 0;
  for (const auto& tj : tools_json) {
    Tool t;
    t.id = detail::require_string(tj, "id", file, index);
    t.name = detail::require_string(tj, "name", file, index);
    t.theme = detail::require_string(tj, "theme", file, index);
    t.description = detail::require_string(tj, "description", file, index);
    t.guidelines = detail::require_string(tj, "guidelines", file, index);
    if (t.id.empty()) throw LoadError(file, index, "id", "must be non-empty");
    if (!ids.insert(t.id).second) throw LoadError(file, index, "id", "duplicate tool id '" + t.id + "'");
    if (!theme_set.count(t.theme))
      throw LoadError(file, index, "theme", "theme '" + t.theme + "' is not declared");
    t.description_tokens = tok.tokenize(t.description);
    t.guideline_tokens = tok.tokenize(t.guidelines);
    if (t.description_tokens.empty()) throw LoadError(file, index, "description", "must be non-empty");
    if (t.guideline_tokens.empty()) throw LoadError(file, index, "guidelines", "must be non-empty");
    tools.push_back(std::move(t));
    ++index;
  }
  return ToolRegistry(std::move(themes), std::move(tools));
}

inline ToolRegistry load_registry(const std::filesystem::path& path, Tokenizer& tok) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw LoadError(path.string(), -1, "", std::string("malformed JSON: ") + e.what());
  }
  return parse_registry(doc, path.string(), tok);
}

inline PlanDag parse_plan(const json& pj, const std::string& file, long record) {
  PlanDag plan;
  const json& nodes = detail::require(pj, "nodes", file, record);
  if (!nodes.is_array()) throw LoadError(file, record, "plan.nodes", "expected an array");
  for (const auto& nj : nodes) {
    if (!nj.is_object()) throw LoadError(file, record, "plan.nodes", "expected objects");
    PlanNode node;
    auto call = nj.find("call");
    if (call == nj.end() || !call->is_string())
      throw LoadError(file, record, "plan.nodes.call", "expected a string");
    node.call = call->get<std::string>();
    auto args = nj.find("args");
    if (args != nj.end()) {
      if (!args->is_array()) throw LoadError(file, record, "plan.nodes.args", "expected an array");
      for (const auto& a : *args) {
        if (!a.is_string()) throw LoadError(file, record, "plan.nodes.args", "expected strings");
        node.args.push_back(a.get<std::string>());
      }
    }
    plan.nodes.push_back(std::move(node));
  }
  auto edges = pj.find("edges");
  if (edges != pj.end()) {
    if (!edges->is_array()) throw LoadError(file, record, "plan.edges", "expected an array");
    for (const auto& e : *edges) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() ||
          !e[1].is_number_unsigned())
        throw LoadError(file, record, "plan.edges", "expected [i, j] index pairs");
      std::size_t a = e[0].get<std::size_t>(), b = e[1].get<std::size_t>();
      if (a >= plan.nodes.size() || b >= plan.nodes.size())
        throw LoadError(file, record, "plan.edges", "edge index out of range");
      plan.edges.emplace_back(a, b);
    }
  }
  if (!is_acyclic(plan)) throw LoadError(file, record, "plan.edges", "plan graph has a cycle");
  return plan;
}

inline json plan_to_json(const PlanDag& plan) {
  json nodes = json::array();
  for (const auto& n : plan.nodes) nodes.push_back({{"call", n.call}, {"args", n.args}});
  json edges = json::array();
  for (auto [a, b] : plan.edges) edges.push_back({a, b});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline std::vector<QuerySample> parse_dataset(const std::string& content,
                                              const std::string& file,
                                              const ToolRegistry& registry,
                                              Tokenizer& tok) {
  std::vector<QuerySample> out;
  for (auto& [record, j] : detail::parse_jsonl(content, file)) {
    QuerySample s;
    s.query_text = detail::require_string(j, "query", file, record);
    auto tools = detail::require_string_array(j, "tools", file, record);
    s.gt_tools = std::set<std::string>(tools.begin(), tools.end());
    s.gt_plan = parse_plan(detail::require(j, "plan", file, record), file, record);
    for (const auto& t : s.gt_tools) {
      if (!registry.contains(t))
        throw ReferentialError(file + ": record " + std::to_string(record) +
                               ": unknown tool '" + t + "'");
    }
    for (const auto& n : s.gt_plan.nodes) {
      if (!s.gt_tools.count(n.call))
        throw ReferentialError(file + ": record " + std::to_string(record) + ": plan calls '" +
                               n.call + "' which is not in the sample's tools");
    }
    s.query_tokens = tok.tokenize(s.query_text);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<QuerySample> load_dataset(const std::filesystem::path& path,
                                             const ToolRegistry& registry, Tokenizer& tok) {
  return parse_dataset(read_file(path), path.string(), registry, tok);
}

inline std::vector<ToolUseExample> parse_example_db(const std::string& content,
                                                    const std::string& file,
                                                    const ToolRegistry& registry,
                                                    Tokenizer& tok) {
  std::vector<ToolUseExample> out;
  std::set<std::string> ids;
  for (auto& [record, j] : detail::parse_jsonl(content, file)) {
    ToolUseExample ex;
    ex.id = detail::require_string(j, "id", file, record);
    ex.text = detail::require_string(j, "example_text", file, record);
    auto tools = detail::require_string_array(j, "tools", file, record);
    if (tools.empty()) throw LoadError(file, record, "tools", "must be non-empty");
    if (!ids.insert(ex.id).second) throw LoadError(file, record, "id", "duplicate example id");
    for (const auto& t : tools) {
      if (!registry.contains(t))
        throw ReferentialError(file + ": record " + std::to_string(record) +
                               ": unknown tool '" + t + "'");
    }
    ex.tools = std::set<std::string>(tools.begin(), tools.end());
    ex.example_tokens = tok.tokenize(ex.text);
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<ToolUseExample> load_example_db(const std::filesystem::path& path,
                                                   const ToolRegistry& registry,
                                                   Tokenizer& tok) {
  return parse_example_db(read_file(path), path.string(), registry, tok);
}

// ---------------------------------------------------------------------------
// Co-activation
// ---------------------------------------------------------------------------

// Symmetric pair co-occurrence counts over registry tool indices. The
// diagonal holds per-tool activation counts.
class CoactivationMatrix {
 public:
  explicit CoactivationMatrix(std::vector<std::string> tool_ids)
      : tool_ids_(std::move(tool_ids)),
        counts_(tool_ids_.size() * tool_ids_.size(), 0) {}

  std::size_t size() const { return tool_ids_.size(); }
  const std::vector<std::string>& tool_ids() const { return tool_ids_; }

  std::uint64_t count(std::size_t x, std::size_t y) const { return counts_[x * size() + y]; }
  std::uint64_t marginal(std::size_t x) const { return count(x, x); }

  // P(y | x); zero when x was never activated.
  double conditional(std::size_t y, std::size_t x) const {
    auto m = marginal(x);
    return m == 0 ? 0.0 : static_cast<double>(count(x, y)) / static_cast<double>(m);
  }

  void add(std::size_t x, std::size_t y, std::uint64_t n = 1) {
    counts_[x * size() + y] += n;
  }

  bool operator==(const CoactivationMatrix&) const = default;

 private:
  std::vector<std::string> tool_ids_;
  std::vector<std::uint64_t> counts_;
};

inline CoactivationMatrix build_coactivation(const ToolRegistry& registry,
                                             const std::vector<QuerySample>& dataset) {
  std::vector<std::string> ids;
  for (const auto& t : registry.tools()) ids.push_back(t.id);
  CoactivationMatrix m(std::move(ids));
  std::vector<std::size_t> active;
  for (const auto& s : dataset) {
    active.clear();
    for (const auto& t : s.gt_tools) {
      auto idx = registry.index_of(t);
      if (!idx) throw ReferentialError("unknown tool '" + t + "' in dataset");
      active.push_back(*idx);
    }
    for (std::size_t a : active)
      for (std::size_t b : active) m.add(a, b);
  }
  return m;
}

}  // namespace agentaccel::corpus
