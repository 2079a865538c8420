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

// Target-model interface, the multi-token step cost model and two
// deterministic reference models.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "agentaccel/common.hpp"
#include "agentaccel/kvstore.hpp"
#include "json.hpp"

namespace agentaccel::lm {

using json = nlohmann::json;
using kvstore::ModelGeometry;

// Relative cost of a forward pass over k tokens, normalized so that k = 1
// costs 1. Linear between configured points, flat past the last one.
class TaxCurve {
 public:
  TaxCurve() : points_{{1, 1.0}} {}

  explicit TaxCurve(std::map<int, double> points) : points_(std::move(points)) {
    points_[1] = 1.0;
    double prev = 0.0;
    for (const auto& [k, v] : points_) {
      if (k < 1) throw ParameterError("tax curve points need k >= 1");
      if (!(v >= prev)) throw ParameterError("tax curve must be non-decreasing in k");
      prev = v;
    }
  }

  static TaxCurve none() { return TaxCurve(); }

  // k = 1 costs 1, k = 2 costs 1.86, constant beyond.
  static TaxCurve calibrated() { return TaxCurve({{1, 1.0}, {2, 1.86}}); }

  double operator()(int k) const {
    if (k < 1) throw ParameterError("tax curve is defined for k >= 1");
    auto hi = points_.lower_bound(k);
    if (hi == points_.end()) return std::prev(hi)->second;
    if (hi->first == k || hi == points_.begin()) return hi->second;
    auto lo = std::prev(hi);
    double f = static_cast<double>(k - lo->first) / static_cast<double>(hi->first - lo->first);
    return lo->second + f * (hi->second - lo->second);
  }

  const std::map<int, double>& points() const { return points_; }

  json to_json() const {
    json j = json::object();
    for (const auto& [k, v] : points_) j[std::to_string(k)] = v;
    return j;
  }

  static TaxCurve from_json(const json& j) {
    std::map<int, double> pts;
    try {
      for (const auto& [k, v] : j.items()) pts[std::stoi(k)] = v.get<double>();
    } catch (const std::exception& e) {
      throw LoadError("tax_curve", -1, "", e.what());
    }
    return TaxCurve(std::move(pts));
  }

 private:
  std::map<int, double> points_;
};

struct CostModel {
  double t1 = 0.131;  // seconds per single-token forward pass
  TaxCurve tax = TaxCurve::calibrated();

  double step_cost(int k) const { return t1 * tax(k); }
};

class TargetModel {
 public:
  virtual ~TargetModel() = default;

  // Candidate next tokens with scores, highest first; equal scores in
  // ascending token order.
  virtual std::vector<std::pair<Token, double>> next_distribution(std::span<const Token> context) const = 0;

  virtual Token next_token(std::span<const Token> context) const {
    auto d = next_distribution(context);
    return d.empty() ? kEndOfSequence : d.front().first;
  }

  const CostModel& cost() const { return cost_; }
  void set_cost(CostModel c) { cost_ = std::move(c); }
  double step_cost(int k) const { return cost_.step_cost(k); }

  const ModelGeometry& geometry() const { return geometry_; }
  void set_geometry(ModelGeometry g) { geometry_ = std::move(g); }

 private:
  CostModel cost_;
  ModelGeometry geometry_ = kvstore::geometry_7b();
};

// Sorts scores descending with ascending-id tie-break.
inline void rank(std::vector<std::pair<Token, double>>& d) {
  std::sort(d.begin(), d.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
}

// Replays a fixed output per registered prompt. Once the context extends a
// registered prompt by p tokens, the next token is script[p] (EOS past the
// end). Unknown prompts produce EOS immediately. When several registered
// prompts prefix the context, the longest wins.
class ScriptedModel final : public TargetModel {
 public:
  void add(std::span<const Token> prompt, TokenSequence script) {
    scripts_[hash_tokens(prompt)] = std::move(script);
  }

  void add_hashed(std::uint64_t prompt_hash, TokenSequence script) {
    scripts_[prompt_hash] = std::move(script);
  }

  std::size_t size() const { return scripts_.size(); }

  std::vector<std::pair<Token, double>> next_distribution(std::span<const Token> context) const override {
    return {{next_token(context), 1.0}};
  }

  Token next_token(std::span<const Token> context) const override {
    const TokenSequence* script = nullptr;
    std::size_t prompt_len = 0;
    std::uint64_t h = kFnvOffset;
    if (auto it = scripts_.find(h); it != scripts_.end()) script = &it->second;
    for (std::size_t i = 0; i < context.size(); ++i) {
      h = fnv1a64_token(h, context[i]);
      if (auto it = scripts_.find(h); it != scripts_.end()) {
        script = &it->second;
        prompt_len = i + 1;
      }
    }
    if (!script) return kEndOfSequence;
    std::size_t pos = context.size() - prompt_len;
    return pos < script->size() ? (*script)[pos] : kEndOfSequence;
  }

  json to_json() const {
    std::map<std::string, TokenSequence> sorted;
    for (const auto& [h, s] : scripts_) sorted[to_hex64(h)] = s;
    json j = json::object();
    for (const auto& [k, s] : sorted) j[k] = s;
    return j;
  }

  static ScriptedModel from_json(const json& j, const std::string& file = "scripts") {
    ScriptedModel m;
    long index = 0;
    for (const auto& [k, v] : j.items()) {
      try {
        if (k.size() != 16) throw std::invalid_argument("prompt hash must be 16 hex digits");
        m.add_hashed(std::stoull(k, nullptr, 16), v.get<TokenSequence>());
      } catch (const std::exception& e) {
        throw LoadError(file, index, k, e.what());
      }
      ++index;
    }
    return m;
  }

 private:
  std::unordered_map<std::uint64_t, TokenSequence> scripts_;
};

// Order-m count model with backoff: the longest context suffix (at most m
// tokens) seen during training decides; an empty or unseen context falls
// back to the unigram counts. P(t) = (c(t) + s) / (C + s * V).
class MarkovModel final : public TargetModel {
 public:
  MarkovModel() = default;
  MarkovModel(int order, double smoothing) : order_(order), smoothing_(smoothing) {
    if (order < 1) throw ParameterError("markov order must be >= 1");
    if (smoothing < 0.0) throw ParameterError("smoothing must be >= 0");
    tables_.resize(static_cast<std::size_t>(order) + 1);
  }

  int order() const { return order_; }
  double smoothing() const { return smoothing_; }
  const std::set<Token>& vocabulary() const { return vocab_; }

  // Adds one sequence; an end-of-sequence token is appended.
  void observe(std::span<const Token> sequence) {
    TokenSequence seq(sequence.begin(), sequence.end());
    seq.push_back(kEndOfSequence);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      vocab_.insert(seq[i]);
      for (int k = 0; k <= order_ && static_cast<std::size_t>(k) <= i; ++k) {
        TokenSequence ctx(seq.begin() + static_cast<std::ptrdiff_t>(i) - k,
                          seq.begin() + static_cast<std::ptrdiff_t>(i));
        ++tables_[static_cast<std::size_t>(k)][ctx][seq[i]];
      }
    }
  }

  // Raw successor counts for an exact context (size <= order).
  const std::map<Token, std::uint64_t>* counts(std::span<const Token> ctx) const {
    if (ctx.size() > static_cast<std::size_t>(order_)) return nullptr;
    const auto& table = tables_[ctx.size()];
    auto it = table.find(TokenSequence(ctx.begin(), ctx.end()));
    return it == table.end() ? nullptr : &it->second;
  }

  double probability(std::span<const Token> context, Token t) const {
    const auto* c = backoff(context);
    if (!c) return 0.0;
    std::uint64_t total = 0;
    for (const auto& [tok, n] : *c) total += n;
    auto it = c->find(t);
    double ct = it == c->end() ? 0.0 : static_cast<double>(it->second);
    if (!vocab_.count(t)) return 0.0;
    double v = static_cast<double>(vocab_.size());
    return (ct + smoothing_) / (static_cast<double>(total) + smoothing_ * v);
  }

  std::vector<std::pair<Token, double>> next_distribution(std::span<const Token> context) const override {
    std::vector<std::pair<Token, double>> d;
    const auto* c = backoff(context);
    if (!c) return d;
    if (smoothing_ > 0.0) {
      for (Token t : vocab_) d.emplace_back(t, probability(context, t));
    } else {
      std::uint64_t total = 0;
      for (const auto& [tok, n] : *c) total += n;
      for (const auto& [tok, n] : *c)
        d.emplace_back(tok, static_cast<double>(n) / static_cast<double>(total));
    }
    rank(d);
    return d;
  }

  Token next_token(std::span<const Token> context) const override {
    const auto* c = backoff(context);
    if (!c) return kEndOfSequence;
    Token best = kEndOfSequence;
    std::uint64_t best_n = 0;
    for (const auto& [tok, n] : *c) {
      if (n > best_n) {
        best = tok;
        best_n = n;
      }
    }
    return best;
  }

 private:
  const std::map<Token, std::uint64_t>* backoff(std::span<const Token> context) const {
    std::size_t max_k = std::min<std::size_t>(static_cast<std::size_t>(order_), context.size());
    for (std::size_t k = max_k + 1; k-- > 0;) {
      if (const auto* c = counts(context.subspan(context.size() - k))) return c;
    }
    return nullptr;
  }

  int order_ = 1;
  double smoothing_ = 0.0;
  std::vector<std::map<TokenSequence, std::map<Token, std::uint64_t>>> tables_{2};
  std::set<Token> vocab_;
};

inline MarkovModel train_markov(const std::vector<TokenSequence>& corpus, int order, double smoothing) {
  if (corpus.empty()) throw ParameterError("markov training corpus is empty");
  MarkovModel m(order, smoothing);
  for (const auto& seq : corpus) m.observe(seq);
  return m;
}

// Plain autoregressive argmax decoding; the end-of-sequence token stops
// generation and is not part of the output.
inline TokenSequence greedy_decode(const TargetModel& model, std::span<const Token> prompt,
                                   std::size_t max_tokens) {
  TokenSequence ctx(prompt.begin(), prompt.end());
  TokenSequence out;
  while (out.size() < max_tokens) {
    Token t = model.next_token(ctx);
    if (t == kEndOfSequence) break;
    out.push_back(t);
    ctx.push_back(t);
  }
  return out;
}

}  // namespace agentaccel::lm
