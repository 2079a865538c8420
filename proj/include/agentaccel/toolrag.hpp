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

// Runtime tool retrieval and top-K tool-use example retrieval.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "agentaccel/common.hpp"
#include "agentaccel/corpus.hpp"

namespace agentaccel::toolrag {

using corpus::ToolRegistry;
using corpus::ToolUseExample;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) s += a[i] * b[i];
  return s;
}

// Cosine similarity; zero when either vector is zero.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  double na = std::sqrt(dot(a, a));
  double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<double> embed(std::span<const Token> tokens) const = 0;
};

// Bag-of-words TF-IDF over a fitted document collection, L2-normalized.
// Terms unseen during fitting are ignored; smoothed idf keeps every weight
// positive: idf(t) = ln((1 + N) / (1 + df(t))) + 1.
class TfIdfEmbedder final : public Embedder {
 public:
  TfIdfEmbedder() = default;

  explicit TfIdfEmbedder(const std::vector<TokenSequence>& documents) {
    std::map<Token, std::size_t> df;
    for (const auto& doc : documents) {
      std::set<Token> seen(doc.begin(), doc.end());
      for (Token t : seen) ++df[t];
    }
    const double n = static_cast<double>(documents.size());
    for (const auto& [t, count] : df) {
      column_.emplace(t, idf_.size());
      idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
  }

  std::size_t dimension() const override { return idf_.size(); }

  std::vector<double> embed(std::span<const Token> tokens) const override {
    std::vector<double> v(idf_.size(), 0.0);
    for (Token t : tokens) {
      auto it = column_.find(t);
      if (it != column_.end()) v[it->second] += 1.0;
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] *= idf_[i];
      norm += v[i] * v[i];
    }
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
    }
    return v;
  }

 private:
  std::unordered_map<Token, std::size_t> column_;
  std::vector<double> idf_;
};

// An example collection with embeddings attached. The default embedder is a
// TF-IDF model fitted on the examples themselves.
class ExampleDatabase {
 public:
  ExampleDatabase() = default;

  explicit ExampleDatabase(std::vector<ToolUseExample> examples)
      : examples_(std::move(examples)) {
    std::vector<TokenSequence> docs;
    for (const auto& ex : examples_) docs.push_back(ex.example_tokens);
    embedder_ = std::make_shared<TfIdfEmbedder>(docs);
    attach_embeddings();
  }

  ExampleDatabase(std::vector<ToolUseExample> examples, std::shared_ptr<const Embedder> embedder)
      : examples_(std::move(examples)), embedder_(std::move(embedder)) {
    attach_embeddings();
  }

  const std::vector<ToolUseExample>& examples() const { return examples_; }
  const Embedder& embedder() const { return *embedder_; }
  std::size_t dimension() const { return embedder_->dimension(); }

  const ToolUseExample* find(std::string_view id) const {
    for (const auto& ex : examples_)
      if (ex.id == id) return &ex;
    return nullptr;
  }

 private:
  void attach_embeddings() {
    for (auto& ex : examples_) ex.query_embedding = embedder_->embed(ex.example_tokens);
  }

  std::vector<ToolUseExample> examples_;
  std::shared_ptr<const Embedder> embedder_;
};

class ToolScorer {
 public:
  virtual ~ToolScorer() = default;
  // Score in [0, 1] for every registry tool.
  virtual std::map<std::string, double> score(std::span<const Token> query) const = 0;
};

// Cosine similarity between the query embedding and each tool's prototype
// (the mean embedding of the examples that use the tool), divided by the
// best tool's similarity so the top tool scores 1. Tools without examples
// score 0, as does everything when the query shares no terms with the DB.
class CosineScorer final : public ToolScorer {
 public:
  CosineScorer(const ToolRegistry& registry, const ExampleDatabase& db) : db_(&db) {
    for (const auto& tool : registry.tools()) {
      std::vector<double> proto(db.dimension(), 0.0);
      std::size_t n = 0;
      for (const auto& ex : db.examples()) {
        if (!ex.tools.count(tool.id)) continue;
        for (std::size_t i = 0; i < proto.size(); ++i) proto[i] += ex.query_embedding[i];
        ++n;
      }
      if (n > 0)
        for (double& x : proto) x /= static_cast<double>(n);
      prototypes_.emplace(tool.id, std::move(proto));
    }
  }

  std::map<std::string, double> score(std::span<const Token> query) const override {
    auto q = db_->embedder().embed(query);
    std::map<std::string, double> raw;
    double best = 0.0;
    for (const auto& [id, proto] : prototypes_) {
      double c = std::max(0.0, cosine(q, proto));
      raw[id] = c;
      best = std::max(best, c);
    }
    for (auto& [id, c] : raw) c = best > 0.0 ? c / best : 0.0;
    return raw;
  }

 private:
  const ExampleDatabase* db_;
  std::map<std::string, std::vector<double>> prototypes_;
};

// Ground-truth passthrough: 1 for the given tools, 0 for the rest.
class OracleScorer final : public ToolScorer {
 public:
  OracleScorer(const ToolRegistry& registry, std::set<std::string> truth)
      : truth_(std::move(truth)) {
    for (const auto& t : registry.tools()) ids_.push_back(t.id);
  }

  std::map<std::string, double> score(std::span<const Token>) const override {
    std::map<std::string, double> out;
    for (const auto& id : ids_) out[id] = truth_.count(id) ? 1.0 : 0.0;
    return out;
  }

 private:
  std::vector<std::string> ids_;
  std::set<std::string> truth_;
};

// Fixed scores, handy when the score vector is known up front.
class StaticScorer final : public ToolScorer {
 public:
  explicit StaticScorer(std::map<std::string, double> scores) : scores_(std::move(scores)) {}
  std::map<std::string, double> score(std::span<const Token>) const override { return scores_; }

 private:
  std::map<std::string, double> scores_;
};

inline std::set<std::string> retrieve_tools(const ToolScorer& scorer,
                                            std::span<const Token> query, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("tau must lie in [0, 1]");
  std::set<std::string> out;
  for (const auto& [id, s] : scorer.score(query))
    if (s >= tau) out.insert(id);
  return out;
}

inline bool is_subset(const std::set<std::string>& inner, const std::set<std::string>& outer) {
  return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

struct RankedExample {
  const ToolUseExample* example;
  double similarity;
};

// Examples whose tools are all selected, by descending cosine similarity to
// the query; ties go to the lexicographically smaller example id.
inline std::vector<RankedExample> retrieve_examples(const ExampleDatabase& db,
                                                    std::span<const Token> query,
                                                    const std::set<std::string>& selected,
                                                    std::size_t k) {
  if (k == 0) return {};
  auto q = db.embedder().embed(query);
  std::vector<RankedExample> eligible;
  for (const auto& ex : db.examples()) {
    if (!is_subset(ex.tools, selected)) continue;
    eligible.push_back({&ex, cosine(q, ex.query_embedding)});
  }
  auto better = [](const RankedExample& a, const RankedExample& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.example->id < b.example->id;
  };
  std::size_t take = std::min(k, eligible.size());
  std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take),
                    eligible.end(), better);
  eligible.resize(take);
  return eligible;
}

struct Config {
  double tau = 0.5;
  std::size_t top_k = 3;
  std::string scorer = "cosine";  // cosine | oracle
};

}  // namespace agentaccel::toolrag
