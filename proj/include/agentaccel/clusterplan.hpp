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

// Offline prompt planning: co-activation clustering with NMF, theme-grouped
// cluster ordering, and budgeted greedy selection of cluster-combination
// prefixes to precompute.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agentaccel/common.hpp"
#include "agentaccel/corpus.hpp"
#include "json.hpp"

namespace agentaccel::clusterplan {

using corpus::CoactivationMatrix;
using corpus::QuerySample;
using corpus::ToolRegistry;
using corpus::ToolUseExample;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// NMF
// ---------------------------------------------------------------------------

struct NmfOptions {
  int rank = 8;
  int max_iters = 500;
  std::uint64_t seed = 42;
  double tol = 1e-6;
  int restarts = 8;  // independent inits; the lowest final error wins
};

struct NmfResult {
  Eigen::MatrixXd w;            // T x k
  Eigen::MatrixXd h;            // k x T
  std::vector<double> errors;   // Frobenius error; errors[0] is the initial one
  int iterations = 0;
};

// Raw pair counts, or row x holding P(y | x) when conditional is set.
inline Eigen::MatrixXd to_matrix(const CoactivationMatrix& m, bool conditional = false) {
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      auto x = static_cast<std::size_t>(i), y = static_cast<std::size_t>(j);
      out(i, j) = conditional ? m.conditional(y, x) : static_cast<double>(m.count(x, y));
    }
  return out;
}

namespace detail {

// Uniform double in [0, 1) from the top 53 bits of a SplitMix64 draw.
inline double unit_draw(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

// Elementwise x *= num / den, leaving entries with a zero denominator alone.
inline void multiplicative_step(Eigen::MatrixXd& x, const Eigen::MatrixXd& num,
                                const Eigen::MatrixXd& den) {
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (den(i, j) > 0.0) x(i, j) *= num(i, j) / den(i, j);
}

}  // namespace detail

// Lee-Seung multiplicative updates for min ||M - WH||_F with W, H >= 0,
// from a single init drawn from seed. Stops after max_iters or once the
// relative error improvement drops below tol. Initialization is uniform
// noise scaled to the matrix mean.
inline NmfResult nmf_run(const Eigen::MatrixXd& m, const NmfOptions& opt, std::uint64_t seed) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  if (opt.rank < 1) throw ParameterError("NMF rank must be >= 1");
  if (opt.rank > std::min(rows, cols))
    throw ParameterError("NMF rank " + std::to_string(opt.rank) + " exceeds matrix size " +
                         std::to_string(std::min(rows, cols)));
  if ((m.array() < 0.0).any()) throw ParameterError("NMF input must be non-negative");

  const double mean = rows * cols > 0 ? m.mean() : 0.0;
  const double scale = std::sqrt(std::max(mean, 1e-12) / opt.rank);
  std::uint64_t state = seed;
  NmfResult r;
  r.w.resize(rows, opt.rank);
  r.h.resize(opt.rank, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < opt.rank; ++k) r.w(i, k) = (detail::unit_draw(state) + 0.01) * scale;
  for (Eigen::Index k = 0; k < opt.rank; ++k)
    for (Eigen::Index j = 0; j < cols; ++j) r.h(k, j) = (detail::unit_draw(state) + 0.01) * scale;

  auto error = [&] { return (m - r.w * r.h).norm(); };
  r.errors.push_back(error());
  for (int it = 0; it < opt.max_iters; ++it) {
    Eigen::MatrixXd wt = r.w.transpose();
    detail::multiplicative_step(r.h, wt * m, (wt * r.w) * r.h);
    Eigen::MatrixXd ht = r.h.transpose();
    detail::multiplicative_step(r.w, m * ht, r.w * (r.h * ht));
    ++r.iterations;
    double prev = r.errors.back();
    double cur = error();
    r.errors.push_back(cur);
    if (cur == 0.0 || prev == 0.0 || (prev - cur) / prev < opt.tol) break;
  }
  return r;
}

// Best of opt.restarts runs. Run i uses the i-th SplitMix64 draw from
// opt.seed, except run 0 which uses opt.seed itself. Ties keep the earlier run.
inline NmfResult nmf_factorize(const Eigen::MatrixXd& m, const NmfOptions& opt) {
  if (opt.restarts < 1) throw ParameterError("NMF restarts must be >= 1");
  std::uint64_t state = opt.seed;
  NmfResult best = nmf_run(m, opt, opt.seed);
  for (int i = 1; i < opt.restarts; ++i) {
    NmfResult r = nmf_run(m, opt, splitmix64(state));
    if (r.errors.back() < best.errors.back()) best = std::move(r);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Clusters
// ---------------------------------------------------------------------------

struct ToolGroup {
  int component;                      // NMF component, -1 for an all-zero row
  std::vector<std::size_t> members;   // registry tool indices, ascending
};

// Tool t joins argmax_k W[t, k] (lowest k on ties). Tools whose W row is all
// zero become singleton groups. Groups come out ordered by component, with
// singletons last.
inline std::vector<ToolGroup> assign_clusters(const Eigen::MatrixXd& w) {
  std::map<int, std::vector<std::size_t>> by_component;
  std::vector<ToolGroup> singletons;
  for (Eigen::Index t = 0; t < w.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < w.cols(); ++k)
      if (w(t, k) > w(t, best)) best = k;
    if (w.cols() == 0 || !(w(t, best) > 0.0)) {
      singletons.push_back({-1, {static_cast<std::size_t>(t)}});
    } else {
      by_component[static_cast<int>(best)].push_back(static_cast<std::size_t>(t));
    }
  }
  std::vector<ToolGroup> out;
  for (auto& [c, members] : by_component) out.push_back({c, std::move(members)});
  for (auto& s : singletons) out.push_back(std::move(s));
  return out;
}

// Most common member theme; ties go to the lexicographically smaller theme.
inline std::string label_theme(std::span<const std::string> tool_ids, const ToolRegistry& registry) {
  std::map<std::string, int> counts;
  for (const auto& id : tool_ids) ++counts[registry.at(id).theme];
  std::string best;
  int best_count = -1;
  for (const auto& [theme, c] : counts) {
    if (c > best_count) {
      best = theme;
      best_count = c;
    }
  }
  return best;
}

struct Cluster {
  int id = 0;                          // position in the plan's total order
  std::vector<std::string> tool_ids;   // ascending
  std::string theme;
  int nmf_component = -1;
  std::string example_id;
  std::string example_text;
  std::set<std::string> example_tools;
  TokenSequence example_tokens;
};

// Stable sort by (declared theme rank, current id); ids are then rewritten
// to the resulting positions.
inline std::vector<Cluster> order_clusters(std::vector<Cluster> clusters, const ToolRegistry& registry) {
  std::stable_sort(clusters.begin(), clusters.end(), [&](const Cluster& a, const Cluster& b) {
    auto ra = registry.theme_rank(a.theme), rb = registry.theme_rank(b.theme);
    if (ra != rb) return ra < rb;
    if (a.theme != b.theme) return a.theme < b.theme;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i].id = static_cast<int>(i);
  return clusters;
}

// Picks the representative example for a tool set: the lowest-id example
// using exactly those tools, else the members' single-tool examples
// concatenated (falling back to the smallest example containing the tool).
inline void attach_example(Cluster& cluster, const std::vector<ToolUseExample>& examples) {
  std::set<std::string> want(cluster.tool_ids.begin(), cluster.tool_ids.end());
  const ToolUseExample* exact = nullptr;
  for (const auto& ex : examples)
    if (ex.tools == want && (!exact || ex.id < exact->id)) exact = &ex;
  if (exact) {
    cluster.example_id = exact->id;
    cluster.example_text = exact->text;
    cluster.example_tools = exact->tools;
    cluster.example_tokens = exact->example_tokens;
    return;
  }
  cluster.example_id = "synthetic:cluster-" + std::to_string(cluster.id);
  cluster.example_text.clear();
  cluster.example_tokens.clear();
  cluster.example_tools.clear();
  for (const auto& tool : cluster.tool_ids) {
    const ToolUseExample* pick = nullptr;
    for (const auto& ex : examples) {
      if (!ex.tools.count(tool)) continue;
      if (!pick || ex.tools.size() < pick->tools.size() ||
          (ex.tools.size() == pick->tools.size() && ex.id < pick->id))
        pick = &ex;
    }
    if (!pick) continue;
    if (!cluster.example_text.empty()) cluster.example_text += "\n";
    cluster.example_text += pick->text;
    cluster.example_tokens.insert(cluster.example_tokens.end(), pick->example_tokens.begin(),
                                  pick->example_tokens.end());
    cluster.example_tools.insert(pick->tools.begin(), pick->tools.end());
  }
}

// ---------------------------------------------------------------------------
// Activation sequences, coverage, combination selection
// ---------------------------------------------------------------------------

using ActivationSequence = std::vector<int>;
using CombinationSet = std::set<ActivationSequence>;

// Sum over sequences of the longest member of C (or the empty prefix) that
// prefixes the sequence.
inline std::size_t coverage(std::span<const ActivationSequence> sequences, const CombinationSet& cached) {
  std::size_t total = 0;
  ActivationSequence probe;
  for (const auto& seq : sequences) {
    for (std::size_t len = seq.size(); len > 0; --len) {
      probe.assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(len));
      if (cached.count(probe)) {
        total += len;
        break;
      }
    }
  }
  return total;
}

struct Selection {
  std::vector<ActivationSequence> picks;  // in selection order
  std::vector<std::size_t> trajectory;    // coverage before round 1, then after each round
};

// Greedy coverage maximization. Candidates are dataset prefixes that are
// either singletons or one-cluster extensions of an already cached prefix.
// Ties: shorter prefix, then lexicographically smaller ids.
inline Selection select_combinations(std::size_t budget, std::span<const ActivationSequence> sequences) {
  CombinationSet prefixes;
  for (const auto& seq : sequences)
    for (std::size_t len = 1; len <= seq.size(); ++len)
      prefixes.emplace(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(len));

  Selection sel;
  CombinationSet cached;
  std::size_t current = 0;
  sel.trajectory.push_back(current);
  for (std::size_t round = 0; round < budget; ++round) {
    const ActivationSequence* best = nullptr;
    std::size_t best_gain = 0;
    for (const auto& p : prefixes) {
      if (cached.count(p)) continue;
      if (p.size() > 1 && !cached.count(ActivationSequence(p.begin(), p.end() - 1))) continue;
      cached.insert(p);
      std::size_t gain = coverage(sequences, cached) - current;
      cached.erase(p);
      bool better = !best || gain > best_gain ||
                    (gain == best_gain && (p.size() < best->size() ||
                                           (p.size() == best->size() && p < *best)));
      if (better) {
        best = &p;
        best_gain = gain;
      }
    }
    if (!best) break;
    cached.insert(*best);
    sel.picks.push_back(*best);
    current += best_gain;
    sel.trajectory.push_back(current);
  }
  return sel;
}

// ---------------------------------------------------------------------------
// Plan
// ---------------------------------------------------------------------------

struct PlanOptions {
  NmfOptions nmf;
  bool conditional = true;  // factorize P(y | x) rather than raw counts
  std::size_t budget = 15;
};

class ClusterPlan {
 public:
  ClusterPlan() = default;
  ClusterPlan(std::vector<Cluster> clusters, std::vector<ActivationSequence> combinations,
              std::vector<std::size_t> trajectory, json provenance)
      : clusters_(std::move(clusters)),
        combinations_(std::move(combinations)),
        trajectory_(std::move(trajectory)),
        provenance_(std::move(provenance)) {
    for (const auto& c : clusters_)
      for (const auto& t : c.tool_ids) cluster_of_.emplace(t, c.id);
  }

  const std::vector<Cluster>& clusters() const { return clusters_; }
  const std::vector<ActivationSequence>& combinations() const { return combinations_; }
  const std::vector<std::size_t>& trajectory() const { return trajectory_; }
  const json& provenance() const { return provenance_; }
  json& provenance() { return provenance_; }

  std::optional<int> cluster_of(const std::string& tool) const {
    auto it = cluster_of_.find(tool);
    if (it == cluster_of_.end()) return std::nullopt;
    return it->second;
  }

  // The first `budget` picks (picks are prefix-closed in selection order).
  std::vector<ActivationSequence> combinations_up_to(std::size_t budget) const {
    return {combinations_.begin(),
            combinations_.begin() + static_cast<std::ptrdiff_t>(std::min(budget, combinations_.size()))};
  }

  json to_json() const {
    json clusters = json::array();
    json order = json::array();
    for (const auto& c : clusters_) {
      clusters.push_back({{"id", c.id},
                          {"tools", c.tool_ids},
                          {"theme", c.theme},
                          {"nmf_component", c.nmf_component},
                          {"example_id", c.example_id},
                          {"example_tools", c.example_tools},
                          {"example_text", c.example_text}});
      order.push_back(c.id);
    }
    return {{"format", "agentaccel.cluster_plan/1"},
            {"provenance", provenance_},
            {"clusters", clusters},
            {"order", order},
            {"cached_combinations", combinations_},
            {"coverage_trajectory", trajectory_}};
  }

  static ClusterPlan from_json(const json& j, corpus::Tokenizer& tok, const std::string& file = "plan") {
    using corpus::detail::require;
    std::vector<Cluster> clusters;
    long index = 0;
    for (const auto& cj : require(j, "clusters", file, -1)) {
      Cluster c;
      try {
        c.id = cj.at("id").get<int>();
        c.tool_ids = cj.at("tools").get<std::vector<std::string>>();
        c.theme = cj.at("theme").get<std::string>();
        c.nmf_component = cj.value("nmf_component", -1);
        c.example_id = cj.at("example_id").get<std::string>();
        c.example_text = cj.at("example_text").get<std::string>();
        c.example_tools = cj.value("example_tools", std::set<std::string>{});
      } catch (const json::exception& e) {
        throw LoadError(file, index, "clusters", e.what());
      }
      if (c.id != index) throw LoadError(file, index, "clusters.id", "cluster ids must equal their order position");
      c.example_tokens = tok.tokenize(c.example_text);
      clusters.push_back(std::move(c));
      ++index;
    }
    std::vector<ActivationSequence> combos;
    try {
      combos = require(j, "cached_combinations", file, -1).get<std::vector<ActivationSequence>>();
    } catch (const json::exception& e) {
      throw LoadError(file, -1, "cached_combinations", e.what());
    }
    for (const auto& combo : combos) {
      for (std::size_t i = 0; i < combo.size(); ++i) {
        if (combo[i] < 0 || combo[i] >= static_cast<int>(clusters.size()) || (i > 0 && combo[i] <= combo[i - 1]))
          throw LoadError(file, -1, "cached_combinations", "combination does not respect the plan order");
      }
    }
    auto trajectory = j.value("coverage_trajectory", std::vector<std::size_t>{});
    return ClusterPlan(std::move(clusters), std::move(combos), std::move(trajectory),
                       j.value("provenance", json::object()));
  }

 private:
  std::vector<Cluster> clusters_;
  std::vector<ActivationSequence> combinations_;
  std::vector<std::size_t> trajectory_;
  json provenance_;
  std::map<std::string, int> cluster_of_;
};

// Clusters intersecting the tool set, in plan order. Unknown tools are ignored.
inline ActivationSequence activation_sequence(const std::set<std::string>& tools, const ClusterPlan& plan) {
  std::set<int> hit;
  for (const auto& t : tools)
    if (auto c = plan.cluster_of(t)) hit.insert(*c);
  return {hit.begin(), hit.end()};
}

inline std::vector<ActivationSequence> activation_sequences(const std::vector<QuerySample>& dataset,
                                                            const ClusterPlan& plan) {
  std::vector<ActivationSequence> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset) out.push_back(activation_sequence(s.gt_tools, plan));
  return out;
}

// Full offline pipeline: co-activation -> NMF -> partition -> themes ->
// ordering -> representative examples -> greedy combination selection.
inline ClusterPlan build_plan(const ToolRegistry& registry, const std::vector<QuerySample>& dataset,
                              const std::vector<ToolUseExample>& examples, const PlanOptions& opt) {
  auto coact = corpus::build_coactivation(registry, dataset);
  auto nmf = nmf_factorize(to_matrix(coact, opt.conditional), opt.nmf);
  auto groups = assign_clusters(nmf.w);

  std::vector<Cluster> clusters;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Cluster c;
    c.id = static_cast<int>(g);
    c.nmf_component = groups[g].component;
    for (std::size_t t : groups[g].members) c.tool_ids.push_back(registry.tools()[t].id);
    c.theme = label_theme(c.tool_ids, registry);
    clusters.push_back(std::move(c));
  }
  clusters = order_clusters(std::move(clusters), registry);
  for (auto& c : clusters) attach_example(c, examples);

  json provenance = {{"seed", opt.nmf.seed},
                     {"rank", opt.nmf.rank},
                     {"iters", opt.nmf.max_iters},
                     {"tol", opt.nmf.tol},
                     {"restarts", opt.nmf.restarts},
                     {"conditional", opt.conditional},
                     {"budget", opt.budget},
                     {"nmf_iterations", nmf.iterations},
                     {"nmf_error", nmf.errors.back()}};
  ClusterPlan partial(clusters, {}, {}, provenance);
  auto sequences = activation_sequences(dataset, partial);
  auto sel = select_combinations(opt.budget, sequences);
  return ClusterPlan(std::move(clusters), std::move(sel.picks), std::move(sel.trajectory),
                     std::move(provenance));
}

}  // namespace agentaccel::clusterplan
