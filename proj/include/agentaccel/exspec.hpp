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

// Lookup-table speculative decoding with selective fallback.
//
// A per-query n-gram table maps every (n-1)-token context in the extraction
// region to its most frequent successor. Each round drafts up to N tokens by
// chained lookups and verifies them in one target pass. When the very first
// lookup misses, selective mode takes a single autoregressive step instead
// of drafting; non-selective mode drafts filler tokens and pays for the
// verification anyway.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "agentaccel/common.hpp"
#include "agentaccel/lm.hpp"
#include "json.hpp"

namespace agentaccel::exspec {

using json = nlohmann::json;

struct SequenceHash {
  std::size_t operator()(const TokenSequence& s) const noexcept {
    return static_cast<std::size_t>(hash_tokens(s));
  }
};

class NGramLut {
 public:
  struct Entry {
    Token token = kEndOfSequence;
    std::uint64_t frequency = 0;
  };

  NGramLut() = default;

  // One pass over the stream, shifting the window by one token.
  NGramLut(std::span<const Token> region, int n) : n_(n), source_tokens_(region.size()) {
    if (n < 2) throw ParameterError("n-gram size must be >= 2");
    struct Successor {
      std::uint64_t count = 0;
      std::size_t first = 0;
    };
    std::unordered_map<TokenSequence, std::unordered_map<Token, Successor>, SequenceHash> counts;
    std::unordered_map<Token, Successor> unigrams;
    for (std::size_t i = 0; i < region.size(); ++i) {
      auto& u = unigrams[region[i]];
      if (u.count++ == 0) u.first = i;
    }
    const std::size_t k = static_cast<std::size_t>(n - 1);
    for (std::size_t i = 0; i + k < region.size(); ++i) {
      TokenSequence key(region.begin() + static_cast<std::ptrdiff_t>(i),
                        region.begin() + static_cast<std::ptrdiff_t>(i + k));
      auto& s = counts[std::move(key)][region[i + k]];
      if (s.count++ == 0) s.first = i;
    }
    table_.reserve(counts.size());
    for (auto& [key, succ] : counts) {
      Token best = kEndOfSequence;
      Successor bs{0, 0};
      for (const auto& [tok, s] : succ) {
        if (s.count > bs.count || (s.count == bs.count && s.first < bs.first)) {
          best = tok;
          bs = s;
        }
      }
      table_.emplace(key, Entry{best, bs.count});
    }
    Successor fs{0, 0};
    for (const auto& [tok, s] : unigrams) {
      if (s.count > fs.count || (s.count == fs.count && s.first < fs.first)) {
        filler_ = tok;
        fs = s;
      }
    }
  }

  int n() const { return n_; }
  std::size_t size() const { return table_.size(); }
  std::size_t source_token_count() const { return source_tokens_; }
  bool empty() const { return table_.empty(); }

  // Most frequent token of the region (earliest on ties).
  Token filler() const { return filler_; }

  std::optional<Entry> lookup(std::span<const Token> key) const {
    if (key.size() != static_cast<std::size_t>(n_ - 1)) return std::nullopt;
    auto it = table_.find(TokenSequence(key.begin(), key.end()));
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }

 private:
  int n_ = 3;
  std::size_t source_tokens_ = 0;
  Token filler_ = kEndOfSequence;
  std::unordered_map<TokenSequence, Entry, SequenceHash> table_;
};

inline NGramLut build_lut(std::span<const Token> region, int n) { return NGramLut(region, n); }

// Up to N chained drafts, or nullopt when the first lookup misses. Later
// misses emit the filler token and drafting continues.
inline std::optional<TokenSequence> draft(const NGramLut& lut, std::span<const Token> context, int N) {
  if (N < 1) throw ParameterError("draft length must be >= 1");
  const std::size_t k = static_cast<std::size_t>(lut.n() - 1);
  if (context.size() < k) return std::nullopt;
  TokenSequence window(context.end() - static_cast<std::ptrdiff_t>(k), context.end());
  auto first = lut.lookup(window);
  if (!first) return std::nullopt;
  TokenSequence out;
  out.reserve(static_cast<std::size_t>(N));
  out.push_back(first->token);
  window.push_back(first->token);
  while (out.size() < static_cast<std::size_t>(N)) {
    auto hit = lut.lookup(std::span<const Token>(window).last(k));
    Token t = hit ? hit->token : lut.filler();
    out.push_back(t);
    window.push_back(t);
  }
  return out;
}

struct VerifyResult {
  std::size_t accepted = 0;
  Token corrected = kEndOfSequence;
};

// Longest draft prefix matching the target's greedy choices, plus the
// target's token at the first mismatch (or after the last draft).
inline VerifyResult verify(const lm::TargetModel& target, std::span<const Token> context,
                           std::span<const Token> drafts) {
  if (drafts.empty()) throw ParameterError("verify needs at least one draft");
  TokenSequence ctx(context.begin(), context.end());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    Token g = target.next_token(ctx);
    if (g != drafts[i]) return {i, g};
    ctx.push_back(drafts[i]);
  }
  return {drafts.size(), target.next_token(ctx)};
}

struct DecodeStats {
  std::uint64_t drafts_generated = 0;
  std::uint64_t drafts_accepted = 0;
  std::uint64_t fallbacks = 0;           // single autoregressive steps
  std::uint64_t rounds = 0;              // verification passes
  std::uint64_t miss_rounds = 0;         // non-selective rounds opened by a miss
  std::uint64_t miss_round_accepted = 0; // filler drafts that happened to match
  std::uint64_t output_tokens = 0;
  int draft_len = 0;
  bool selective = true;
  bool stopped_on_eos = false;
  double modeled_latency = 0.0;

  double accuracy() const {
    return drafts_generated ? static_cast<double>(drafts_accepted) / static_cast<double>(drafts_generated) : 0.0;
  }

  json to_json() const {
    return {{"drafts_generated", drafts_generated},
            {"drafts_accepted", drafts_accepted},
            {"fallbacks", fallbacks},
            {"rounds", rounds},
            {"miss_rounds", miss_rounds},
            {"miss_round_accepted", miss_round_accepted},
            {"output_tokens", output_tokens},
            {"draft_len", draft_len},
            {"selective", selective},
            {"stopped_on_eos", stopped_on_eos},
            {"accuracy", accuracy()},
            {"modeled_latency", modeled_latency}};
  }

  static DecodeStats from_json(const json& j) {
    DecodeStats s;
    s.drafts_generated = j.at("drafts_generated").get<std::uint64_t>();
    s.drafts_accepted = j.at("drafts_accepted").get<std::uint64_t>();
    s.fallbacks = j.at("fallbacks").get<std::uint64_t>();
    s.rounds = j.at("rounds").get<std::uint64_t>();
    s.miss_rounds = j.value("miss_rounds", std::uint64_t{0});
    s.miss_round_accepted = j.value("miss_round_accepted", std::uint64_t{0});
    s.output_tokens = j.at("output_tokens").get<std::uint64_t>();
    s.draft_len = j.at("draft_len").get<int>();
    s.selective = j.value("selective", true);
    s.stopped_on_eos = j.value("stopped_on_eos", false);
    s.modeled_latency = j.value("modeled_latency", 0.0);
    return s;
  }
};

struct DecodeResult {
  TokenSequence output;
  DecodeStats stats;
};

// Output is identical to lm::greedy_decode(target, prompt, max_tokens).
inline DecodeResult decode(const lm::TargetModel& target, std::span<const Token> prompt,
                           const NGramLut& lut, int N, bool selective, std::size_t max_tokens) {
  if (N < 1) throw ParameterError("draft length must be >= 1");
  DecodeResult r;
  r.stats.draft_len = N;
  r.stats.selective = selective;
  TokenSequence ctx(prompt.begin(), prompt.end());
  auto& out = r.output;
  auto emit = [&](Token t) {
    if (t == kEndOfSequence) {
      r.stats.stopped_on_eos = true;
      return false;
    }
    out.push_back(t);
    ctx.push_back(t);
    return out.size() < max_tokens;
  };

  while (out.size() < max_tokens) {
    auto drafts = draft(lut, ctx, N);
    bool miss = !drafts;
    if (miss) {
      if (selective) {
        ++r.stats.fallbacks;
        r.stats.modeled_latency += target.step_cost(1);
        if (!emit(target.next_token(ctx))) break;
        continue;
      }
      drafts = TokenSequence(static_cast<std::size_t>(N), lut.filler());
      ++r.stats.miss_rounds;
    }
    ++r.stats.rounds;
    r.stats.drafts_generated += drafts->size();
    r.stats.modeled_latency += target.step_cost(static_cast<int>(drafts->size()) + 1);
    auto v = verify(target, ctx, *drafts);
    r.stats.drafts_accepted += v.accepted;
    if (miss) r.stats.miss_round_accepted += v.accepted;
    bool go = true;
    for (std::size_t i = 0; i < v.accepted && go; ++i) go = emit((*drafts)[i]);
    if (go && !emit(v.corrected)) break;
    if (!go) break;
  }
  r.stats.output_tokens = out.size();
  return r;
}

}  // namespace agentaccel::exspec
