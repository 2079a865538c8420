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

#include <gtest/gtest.h>

#include <map>
#include <random>

#include "agentaccel/exspec.hpp"
#include "test_util.hpp"

namespace agentaccel::exspec {
namespace {

constexpr Token a = 1, b = 2, c = 3, d = 4;

TEST(Lut, FirstSeenWinsOnEqualCounts) {
  TokenSequence s = {a, b, c, a, b, d};
  auto lut = build_lut(s, 3);
  auto e = lut.lookup(TokenSequence{a, b});
  ASSERT_TRUE(e);
  EXPECT_EQ(e->token, c);
  EXPECT_EQ(e->frequency, 1u);
  EXPECT_EQ(lut.size(), 3u);  // (a,b) (b,c) (c,a)
  EXPECT_EQ(lut.source_token_count(), 6u);
}

TEST(Lut, CountsRepeats) {
  TokenSequence s = {a, b, c, a, b, c};
  auto lut = build_lut(s, 3);
  auto e = lut.lookup(TokenSequence{a, b});
  ASSERT_TRUE(e);
  EXPECT_EQ(e->token, c);
  EXPECT_EQ(e->frequency, 2u);
  EXPECT_FALSE(lut.lookup(TokenSequence{a}));
  EXPECT_FALSE(lut.lookup(TokenSequence{d, d}));
  EXPECT_THROW(build_lut(s, 1), ParameterError);
}

TEST(Lut, ShortRegionIsEmpty) {
  TokenSequence s = {a, b};
  auto lut = build_lut(s, 3);
  EXPECT_TRUE(lut.empty());
  EXPECT_EQ(lut.filler(), a);
}

// Oracle: count every window, then pick max count and earliest first
// occurrence.
TEST(Lut, MatchesWindowCountOracle) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng() % 3);
    auto s = testing::random_tokens(rng, rng() % 60, 1 + static_cast<Token>(rng() % 5));
    auto lut = build_lut(s, n);
    std::map<TokenSequence, std::map<Token, std::pair<std::uint64_t, std::size_t>>> counts;
    const std::size_t k = static_cast<std::size_t>(n - 1);
    for (std::size_t i = 0; i + k < s.size(); ++i) {
      TokenSequence key(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + k));
      auto& slot = counts[key][s[i + k]];
      if (slot.first++ == 0) slot.second = i;
    }
    ASSERT_EQ(lut.size(), counts.size());
    for (const auto& [key, succ] : counts) {
      Token best = 0;
      std::pair<std::uint64_t, std::size_t> bs{0, 0};
      for (const auto& [t, cs] : succ)
        if (cs.first > bs.first || (cs.first == bs.first && cs.second < bs.second)) {
          best = t;
          bs = cs;
        }
      auto e = lut.lookup(key);
      ASSERT_TRUE(e);
      ASSERT_EQ(e->token, best);
      ASSERT_EQ(e->frequency, bs.first);
    }
  }
}

TEST(Draft, ChainsAndFillsMisses) {
  TokenSequence s = {a, b, c, a, b, c, d};
  auto lut = build_lut(s, 2);
  EXPECT_EQ(*draft(lut, TokenSequence{a}, 4), (TokenSequence{b, c, a, b}));
  EXPECT_FALSE(draft(lut, TokenSequence{9}, 4));
  EXPECT_FALSE(draft(lut, TokenSequence{}, 4));
  EXPECT_EQ(*draft(lut, TokenSequence{c}, 3), (TokenSequence{a, b, c}));
  // (b, d) and (d, a) miss; the filler a stands in.
  auto lut3 = build_lut(TokenSequence{a, b, d}, 3);
  EXPECT_EQ(*draft(lut3, TokenSequence{a, b}, 3), (TokenSequence{d, a, a}));
  EXPECT_THROW(draft(lut, TokenSequence{a}, 0), ParameterError);
}

lm::ScriptedModel scripted(const TokenSequence& prompt, const TokenSequence& script) {
  lm::ScriptedModel m;
  m.add(prompt, script);
  return m;
}

TEST(Verify, MatchesTokenByTokenOracle) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    auto prompt = testing::random_tokens(rng, 1 + rng() % 5, 20);
    auto script = testing::random_tokens(rng, rng() % 10, 4);
    auto model = scripted(prompt, script);
    auto drafts = testing::random_tokens(rng, 1 + rng() % 6, 4);
    if (rng() % 2) std::copy_n(script.begin(), std::min(script.size(), drafts.size()), drafts.begin());
    auto v = verify(model, prompt, drafts);
    std::size_t acc = 0;
    while (acc < drafts.size() && acc < script.size() && script[acc] == drafts[acc]) ++acc;
    ASSERT_EQ(v.accepted, acc);
    Token want = acc < script.size() ? script[acc] : kEndOfSequence;
    ASSERT_EQ(v.corrected, want);
  }
}

TEST(Decode, EquivalentToGreedyAcrossSettings) {
  std::mt19937_64 rng(47);
  std::size_t cases = 0;
  for (int trial = 0; trial < 40; ++trial) {
    auto prompt = testing::random_tokens(rng, 5 + rng() % 30, 6);
    auto script = testing::random_tokens(rng, rng() % 40, 6);
    auto sm = scripted(prompt, script);
    TokenSequence joined = prompt;
    joined.insert(joined.end(), script.begin(), script.end());
    auto mm = lm::train_markov({joined, testing::random_tokens(rng, 30, 6)}, 2, 0.0);
    for (const lm::TargetModel* target : {static_cast<const lm::TargetModel*>(&sm),
                                          static_cast<const lm::TargetModel*>(&mm)}) {
      for (std::size_t max_tokens : {std::size_t{0}, std::size_t{7}, std::size_t{64}}) {
        auto want = lm::greedy_decode(*target, prompt, max_tokens);
        for (int n = 2; n <= 4; ++n) {
          auto lut = build_lut(prompt, n);
          for (int N = 1; N <= 6; ++N)
            for (bool selective : {true, false}) {
              auto r = decode(*target, prompt, lut, N, selective, max_tokens);
              ASSERT_EQ(r.output, want) << "n=" << n << " N=" << N << " selective=" << selective;
              ASSERT_EQ(r.stats.output_tokens, want.size());
              ASSERT_LE(r.stats.drafts_accepted, r.stats.drafts_generated);
              ++cases;
            }
        }
      }
    }
  }
  EXPECT_GE(cases, 500u);
}

TEST(Decode, SelectiveSkipsMissesOnDisjointRegion) {
  TokenSequence region = {50, 51, 52, 50, 51, 53};
  TokenSequence prompt = {1, 2, 3};
  TokenSequence script = {7, 8, 9, 7, 8, 9, 10, 11};
  auto model = scripted(prompt, script);
  auto lut = build_lut(region, 3);
  auto sel = decode(model, prompt, lut, 4, true, 100);
  auto non = decode(model, prompt, lut, 4, false, 100);
  EXPECT_EQ(sel.output, script);
  EXPECT_EQ(non.output, script);
  EXPECT_EQ(sel.stats.drafts_generated, 0u);
  EXPECT_EQ(sel.stats.fallbacks, script.size() + 1);
  EXPECT_EQ(non.stats.drafts_generated, 4 * non.stats.rounds);
  EXPECT_EQ(non.stats.miss_rounds, non.stats.rounds);
  EXPECT_EQ(sel.stats.drafts_accepted, non.stats.drafts_accepted);
  EXPECT_LT(sel.stats.modeled_latency, non.stats.modeled_latency);
  EXPECT_TRUE(sel.stats.stopped_on_eos);
}

TEST(Decode, VerbatimScriptInRegionIsMostlyAccepted) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    auto script = testing::random_tokens(rng, 100 + rng() % 100, 5000);
    auto prompt = testing::random_tokens(rng, 20, 5000);
    prompt.insert(prompt.end(), script.begin(), script.end());
    prompt.push_back(kEndOfSequence);
    TokenSequence query = {9001, 9002};
    prompt.insert(prompt.end(), query.begin(), query.end());
    auto model = scripted(prompt, script);
    auto lut = build_lut(prompt, 3);
    auto r = decode(model, prompt, lut, 4, true, 512);
    ASSERT_EQ(r.output, script);
    EXPECT_GE(r.stats.accuracy(), 0.9);
  }
}

TEST(Decode, StatsRoundTrip) {
  DecodeStats s;
  s.drafts_generated = 8;
  s.drafts_accepted = 3;
  s.rounds = 2;
  s.draft_len = 4;
  s.modeled_latency = 0.5;
  auto back = DecodeStats::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
  EXPECT_DOUBLE_EQ(back.accuracy(), 3.0 / 8.0);
}

struct Totals {
  std::uint64_t generated = 0, accepted = 0;
  double accuracy() const { return static_cast<double>(accepted) / static_cast<double>(generated); }
};

Totals run_fixture(testing::Fixture& f, int n, int N) {
  Totals t;
  for (const auto& q : f.test) {
    auto script = f.tok.tokenize(corpus::render_plan(q.gt_plan));
    auto p = weaver::build_planner_prompt(*f.assets, q.query_tokens, q.gt_tools, 1, nullptr);
    auto tokens = p.tokens();
    auto model = scripted(tokens, script);
    auto lut = build_lut(weaver::extraction_region(p, weaver::ExtractRegion::kFewShot), n);
    auto r = decode(model, tokens, lut, N, true, 256);
    EXPECT_EQ(r.output, script);
    t.generated += r.stats.drafts_generated;
    t.accepted += r.stats.drafts_accepted;
  }
  return t;
}

TEST(Decode, FixtureNgramSizeTradeoff) {
  auto f = testing::Fixture::load();
  auto n2 = run_fixture(*f, 2, 4), n3 = run_fixture(*f, 3, 4), n4 = run_fixture(*f, 4, 4);
  EXPECT_LT(n2.accuracy(), n3.accuracy());
  EXPECT_LT(n4.generated, n3.generated);
}

}  // namespace
}  // namespace agentaccel::exspec
