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

#include <random>

#include "agentaccel/clusterplan.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace agentaccel::clusterplan {
namespace {

using json = nlohmann::json;

Eigen::MatrixXd block_matrix(const std::vector<int>& sizes, double noise, std::uint64_t seed) {
  int n = 0;
  for (int s : sizes) n += s;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, noise);
  int off = 0;
  for (int s : sizes) {
    m.block(off, off, s, s).setConstant(10.0);
    off += s;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) += u(rng);
  return m;
}

TEST(Nmf, ErrorNonIncreasingOnRandomMatrices) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    int rows = 3 + static_cast<int>(rng() % 12), cols = 3 + static_cast<int>(rng() % 12);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
    NmfOptions opt;
    opt.rank = 1 + static_cast<int>(rng() % std::min(rows, cols));
    opt.tol = 0.0;
    opt.max_iters = 200;
    opt.seed = rng();
    auto r = nmf_run(m, opt, opt.seed);
    ASSERT_EQ(r.errors.size(), static_cast<std::size_t>(r.iterations) + 1);
    for (std::size_t i = 1; i < r.errors.size(); ++i)
      ASSERT_LE(r.errors[i], r.errors[i - 1] * (1 + 1e-12)) << "trial " << trial << " iteration " << i;
    EXPECT_TRUE((r.w.array() >= 0).all());
    EXPECT_TRUE((r.h.array() >= 0).all());
  }
}

std::vector<std::vector<std::size_t>> partition(const std::vector<ToolGroup>& groups) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& g : groups) out.push_back(g.members);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Nmf, RecoversTwoAndThreeBlocks) {
  auto two = nmf_factorize(block_matrix({3, 4}, 0.1, 1), NmfOptions{2, 500, 42, 1e-6, 8});
  EXPECT_EQ(partition(assign_clusters(two.w)),
            (std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3, 4, 5, 6}}));
  auto three = nmf_factorize(block_matrix({2, 3, 2}, 0.1, 2), NmfOptions{3, 500, 42, 1e-6, 8});
  EXPECT_EQ(partition(assign_clusters(three.w)),
            (std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3, 4}, {5, 6}}));
}

TEST(Nmf, RankOneIsOneCluster) {
  auto r = nmf_factorize(block_matrix({2, 3}, 0.5, 4), NmfOptions{1, 100, 1, 1e-6, 1});
  auto groups = assign_clusters(r.w);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].members.size(), 5u);
}

TEST(Nmf, RejectsBadParameters) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(3, 3);
  EXPECT_THROW(nmf_factorize(m, NmfOptions{4, 10, 1, 0, 1}), ParameterError);
  EXPECT_THROW(nmf_factorize(m, NmfOptions{0, 10, 1, 0, 1}), ParameterError);
  m(0, 0) = -1;
  EXPECT_THROW(nmf_factorize(m, NmfOptions{2, 10, 1, 0, 1}), ParameterError);
}

TEST(Nmf, DeterministicForSeed) {
  auto m = block_matrix({3, 3}, 1.0, 9);
  NmfOptions opt;
  opt.rank = 2;
  auto a = nmf_factorize(m, opt);
  auto b = nmf_factorize(m, opt);
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.errors, b.errors);
}

TEST(Assign, OneHotRowsAndZeroRows) {
  Eigen::MatrixXd w(4, 2);
  w << 1, 0, 0, 1, 0, 0, 2, 0;
  auto g = assign_clusters(w);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0].members, (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(g[1].members, (std::vector<std::size_t>{1}));
  EXPECT_EQ(g[2].component, -1);
  EXPECT_EQ(g[2].members, (std::vector<std::size_t>{2}));
}

corpus::ToolRegistry small_registry(corpus::Tokenizer& tok) {
  json j = {{"themes", {"Email", "Maps", "Calendar"}},
            {"tools",
             {{{"id", "email_a"}, {"name", "a"}, {"theme", "Email"}, {"description", "d"}, {"guidelines", "g"}},
              {{"id", "email_b"}, {"name", "b"}, {"theme", "Email"}, {"description", "d"}, {"guidelines", "g"}},
              {{"id", "cal_a"}, {"name", "c"}, {"theme", "Calendar"}, {"description", "d"}, {"guidelines", "g"}},
              {{"id", "map_a"}, {"name", "m"}, {"theme", "Maps"}, {"description", "d"}, {"guidelines", "g"}}}}};
  return corpus::parse_registry(j, "reg.json", tok);
}

TEST(Theme, MajorityAndLexicographicTie) {
  corpus::Tokenizer tok;
  auto reg = small_registry(tok);
  std::vector<std::string> a = {"email_a", "email_b", "cal_a"};
  EXPECT_EQ(label_theme(a, reg), "Email");
  std::vector<std::string> b = {"email_a", "map_a"};
  EXPECT_EQ(label_theme(b, reg), "Email");
  std::vector<std::string> c = {"cal_a", "map_a"};
  EXPECT_EQ(label_theme(c, reg), "Calendar");
}

TEST(Order, GroupsThemesInDeclaredOrder) {
  corpus::Tokenizer tok;
  auto reg = small_registry(tok);
  std::vector<Cluster> cs(3);
  cs[0].id = 0;
  cs[0].theme = "Email";
  cs[1].id = 1;
  cs[1].theme = "Maps";
  cs[2].id = 2;
  cs[2].theme = "Email";
  auto ordered = order_clusters(cs, reg);
  EXPECT_EQ(ordered[0].theme, "Email");
  EXPECT_EQ(ordered[1].theme, "Email");
  EXPECT_EQ(ordered[2].theme, "Maps");
  for (int i = 0; i < 3; ++i) EXPECT_EQ(ordered[static_cast<std::size_t>(i)].id, i);
}

TEST(Coverage, WorkedExample) {
  std::vector<ActivationSequence> seqs = {{1, 3, 2}};
  EXPECT_EQ(coverage(seqs, {}), 0u);
  EXPECT_EQ(coverage(seqs, {{1}, {1, 3}}), 2u);
}

TEST(Coverage, MatchesOracleAndIsMonotone) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ActivationSequence> seqs(1 + rng() % 15);
    for (auto& s : seqs) s = oracle::random_sequence(rng, 6);
    CombinationSet cached;
    for (int i = 0; i < 5; ++i) {
      auto s = oracle::random_sequence(rng, 6);
      if (!s.empty()) cached.insert(ActivationSequence(s.begin(), s.begin() + 1 + static_cast<long>(rng() % s.size())));
    }
    std::set<oracle::Seq> as_oracle(cached.begin(), cached.end());
    ASSERT_EQ(coverage(seqs, cached), oracle::coverage(seqs, as_oracle));
    auto extra = oracle::random_sequence(rng, 6);
    if (extra.empty()) continue;
    auto bigger = cached;
    bigger.insert(extra);
    ASSERT_GE(coverage(seqs, bigger), coverage(seqs, cached));
  }
}

TEST(Select, SmallCases) {
  std::vector<ActivationSequence> seqs = {{1, 2}, {1, 2}, {1, 2}};
  EXPECT_TRUE(select_combinations(0, seqs).picks.empty());
  auto sel = select_combinations(2, seqs);
  EXPECT_EQ(sel.picks, (std::vector<ActivationSequence>{{1}, {1, 2}}));
  EXPECT_EQ(sel.trajectory, (std::vector<std::size_t>{0, 3, 6}));
  // Candidates exhaust early.
  EXPECT_EQ(select_combinations(10, seqs).picks.size(), 2u);
}

TEST(Select, EveryRoundIsGreedyOptimal) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    int clusters = 1 + static_cast<int>(rng() % 6);
    std::vector<ActivationSequence> seqs(1 + rng() % 12);
    for (auto& s : seqs) s = oracle::random_sequence(rng, clusters);
    std::size_t budget = rng() % 5;
    auto sel = select_combinations(budget, seqs);
    std::set<oracle::Seq> cached;
    for (std::size_t r = 0; r < sel.picks.size(); ++r) {
      auto options = oracle::candidates(seqs, cached);
      ASSERT_NE(std::find(options.begin(), options.end(), sel.picks[r]), options.end());
      std::size_t best = oracle::best_gain(seqs, cached);
      std::size_t before = oracle::coverage(seqs, cached);
      cached.insert(sel.picks[r]);
      std::size_t after = oracle::coverage(seqs, cached);
      ASSERT_EQ(after - before, best);
      ASSERT_EQ(sel.trajectory[r + 1], after);
      ASSERT_GE(sel.trajectory[r + 1], sel.trajectory[r]);
    }
    if (sel.picks.size() < budget) {
      ASSERT_TRUE(oracle::candidates(seqs, cached).empty());
    }
  }
}

TEST(ActivationSequence, MatchesIntersectionScan) {
  auto f = testing::Fixture::load();
  const auto& plan = *f->plan;
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::set<std::string> tools;
    for (const auto& t : f->registry.tools())
      if (rng() % 4 == 0) tools.insert(t.id);
    ActivationSequence oracle_seq;
    for (const auto& c : plan.clusters()) {
      bool hit = std::any_of(c.tool_ids.begin(), c.tool_ids.end(), [&](const auto& t) { return tools.count(t); });
      if (hit) oracle_seq.push_back(c.id);
    }
    EXPECT_EQ(activation_sequence(tools, plan), oracle_seq);
  }
  EXPECT_TRUE(activation_sequence({}, plan).empty());
}

TEST(Plan, FixtureHasEightClustersOfTwoToSix) {
  auto f = testing::Fixture::load();
  const auto& plan = *f->plan;
  ASSERT_EQ(plan.clusters().size(), 8u);
  std::set<std::string> seen;
  for (const auto& c : plan.clusters()) {
    EXPECT_GE(c.tool_ids.size(), 2u);
    EXPECT_LE(c.tool_ids.size(), 6u);
    for (const auto& t : c.tool_ids) EXPECT_TRUE(seen.insert(t).second) << t << " in two clusters";
    EXPECT_EQ(std::set<std::string>(c.tool_ids.begin(), c.tool_ids.end()), c.example_tools);
  }
  EXPECT_EQ(seen.size(), f->registry.tools().size());
  // Theme groups appear in the registry's declared order.
  for (std::size_t i = 1; i < plan.clusters().size(); ++i)
    EXPECT_LE(f->registry.theme_rank(plan.clusters()[i - 1].theme), f->registry.theme_rank(plan.clusters()[i].theme));
}

TEST(Plan, CombinationsArePrefixClosedAndOrdered) {
  auto f = testing::Fixture::load();
  const auto& plan = *f->plan;
  std::set<ActivationSequence> so_far;
  for (const auto& c : plan.combinations()) {
    ASSERT_FALSE(c.empty());
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LT(c[i - 1], c[i]);
    if (c.size() > 1) {
      EXPECT_TRUE(so_far.count(ActivationSequence(c.begin(), c.end() - 1)));
    }
    so_far.insert(c);
  }
}

TEST(Plan, JsonRoundTripAndDeterminism) {
  auto f = testing::Fixture::load();
  auto again = build_plan(f->registry, f->train, f->examples, PlanOptions{});
  EXPECT_EQ(f->plan->to_json().dump(), again.to_json().dump());
  auto back = ClusterPlan::from_json(f->plan->to_json(), f->tok);
  EXPECT_EQ(back.to_json().dump(), f->plan->to_json().dump());
  for (std::size_t i = 0; i < back.clusters().size(); ++i)
    EXPECT_EQ(back.clusters()[i].example_tokens, f->plan->clusters()[i].example_tokens);
  EXPECT_EQ(f->plan->provenance().at("seed"), 42);
  EXPECT_EQ(f->plan->provenance().at("rank"), 8);
}

TEST(Plan, RejectsOutOfOrderCombinations) {
  auto f = testing::Fixture::load();
  auto j = f->plan->to_json();
  j["cached_combinations"].push_back({3, 1});
  EXPECT_THROW(ClusterPlan::from_json(j, f->tok), LoadError);
}

}  // namespace
}  // namespace agentaccel::clusterplan
