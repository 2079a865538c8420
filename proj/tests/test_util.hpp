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

// Shared helpers for the unit and acceptance suites.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "agentaccel/clusterplan.hpp"
#include "agentaccel/common.hpp"
#include "agentaccel/corpus.hpp"
#include "agentaccel/toolrag.hpp"
#include "agentaccel/weaver.hpp"

namespace agentaccel::testing {

namespace fs = std::filesystem;

inline fs::path data_dir() { return AGENTACCEL_DATA_DIR; }
inline fs::path fixture_dir() { return data_dir() / "fixtures"; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("agentaccel-" + tag + "-" + std::to_string(rd()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// The shipped fixture, loaded and planned with default options.
struct Fixture {
  corpus::Tokenizer tok;
  corpus::ToolRegistry registry;
  std::vector<corpus::QuerySample> train, test;
  std::vector<corpus::ToolUseExample> examples;
  weaver::Templates templates;
  toolrag::ExampleDatabase db;
  std::optional<clusterplan::ClusterPlan> plan;
  std::optional<weaver::PromptAssets> assets;

  static std::unique_ptr<Fixture> load(const fs::path& dir = fixture_dir()) {
    auto f = std::make_unique<Fixture>();
    f->registry = corpus::load_registry(dir / "registry.json", f->tok);
    f->examples = corpus::load_example_db(dir / "examples.jsonl", f->registry, f->tok);
    f->templates = weaver::Templates::load(dir / "templates.json");
    f->train = corpus::load_dataset(dir / "train.jsonl", f->registry, f->tok);
    f->test = corpus::load_dataset(dir / "test.jsonl", f->registry, f->tok);
    f->db = toolrag::ExampleDatabase(f->examples);
    f->plan = clusterplan::build_plan(f->registry, f->train, f->examples, clusterplan::PlanOptions{});
    f->assets.emplace(f->templates, f->tok, f->registry, *f->plan, f->db);
    return f;
  }
};

inline TokenSequence random_tokens(std::mt19937_64& rng, std::size_t len, Token vocab) {
  std::uniform_int_distribution<Token> d(1, vocab);
  TokenSequence out(len);
  for (auto& t : out) t = d(rng);
  return out;
}

}  // namespace agentaccel::testing
