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
#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "agentaccel/simulator.hpp"
#include "test_util.hpp"

namespace agentaccel {
namespace {

using json = nlohmann::json;

struct Result {
  int code = -1;
  std::string out, err;
};

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("cli");
    auto r = run("build-plan " + corpus() + " --dataset " + fx("train.jsonl") + " --out " + path("plan.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    r = run("precompute-cache " + corpus() + " --plan " + path("plan.json") + " --out " + path("cache"));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { delete dir_; }

  static std::string fx(const std::string& name) { return (testing::fixture_dir() / name).string(); }
  static std::string path(const std::string& name) { return (*dir_ / name).string(); }
  static std::string corpus() { return "--registry " + fx("registry.json") + " --examples " + fx("examples.jsonl"); }
  static std::string planned() { return corpus() + " --plan " + path("plan.json") + " --cache " + path("cache"); }

  static Result run(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    std::string out = path("stdout" + std::to_string(counter)), err = path("stderr" + std::to_string(counter));
    ++counter;
    std::string cmd = env + (env.empty() ? "" : " ") + AGENTACCEL_CLI + " " + args + " >" + out + " 2>" + err;
    int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
  }

  static inline testing::TempDir* dir_ = nullptr;
};

TEST_F(CliTest, SmokePath) {
  auto w = run("weave " + planned() + " --dataset " + fx("test.jsonl") + " --index 0");
  ASSERT_EQ(w.code, 0) << w.err;
  auto prompt = json::parse(w.out);
  EXPECT_GT(prompt.at("cacheable_tokens").get<int>(), 0);
  EXPECT_EQ(prompt.at("mode"), "weaver");

  auto d = run("decode " + planned() + " --dataset " + fx("test.jsonl") + " --index 1 --scorer oracle");
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_NE(json::parse(d.out).at("planner").at("text").get<std::string>().find("join ( )"), std::string::npos);

  auto r = run("run " + planned() + " --dataset " + fx("test.jsonl") + " --trace " + path("smoke.jsonl") +
               " --fresh --jobs 2");
  ASSERT_EQ(r.code, 0) << r.err;
  auto trace = simulator::load_trace(path("smoke.jsonl"));
  EXPECT_EQ(trace.size(), 42u);

  auto s = run("simulate --trace " + path("smoke.jsonl") + " --out " + path("sim.json"));
  ASSERT_EQ(s.code, 0) << s.err;
  auto sim = json::parse(read_file(path("sim.json")));
  EXPECT_GT(sim.at("speedup_over_baseline").at("pw_es").get<double>(), 1.0);

  auto rep = run("report " + corpus() + " --simulation " + path("sim.json") + " --plan " + path("plan.json") +
                 " --dataset " + fx("train.jsonl") + " --format csv");
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_NE(rep.out.find("cell,stage,seconds,fraction"), std::string::npos);
  EXPECT_NE(rep.out.find("budget,coverage,storage_bytes"), std::string::npos);
}

TEST_F(CliTest, MissingTraceIsSingleLineJsonError) {
  auto r = run("simulate --trace " + path("absent.jsonl"));
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.code, 3);
  ASSERT_FALSE(r.err.empty());
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1);
  auto j = json::parse(r.err);
  EXPECT_EQ(j.at("error"), "missing_input");
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, ErrorExitCodes) {
  EXPECT_EQ(run("simulate --calibration --device abacus").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("weave " + planned() + " --query hi --k 9").code, 2);
  EXPECT_EQ(run("build-plan --registry " + path("nope.json") + " --dataset x --examples y --out " +
                path("nope-plan.json")).code,
            3);
  write_file_atomic(*dir_ / "bad.json", R"({"exspec": {"nn": 3}})");
  auto r = run("--config " + path("bad.json") + " simulate --calibration");
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(json::parse(r.err).at("error"), "load");
}

TEST_F(CliTest, SelectiveModesProduceIdenticalOutputs) {
  std::string base = "run " + planned() + " --dataset " + fx("test.jsonl") + " --fresh";
  ASSERT_EQ(run(base + " --selective on --trace " + path("on.jsonl")).code, 0);
  ASSERT_EQ(run(base + " --selective off --trace " + path("off.jsonl")).code, 0);
  auto on = simulator::load_trace(path("on.jsonl")), off = simulator::load_trace(path("off.jsonl"));
  ASSERT_EQ(on.size(), off.size());
  for (std::size_t i = 0; i < on.size(); ++i) {
    EXPECT_EQ(on[i].planner.output, off[i].planner.output);
    EXPECT_EQ(on[i].arbiter.output, off[i].arbiter.output);
    EXPECT_FALSE(on[i].planner.output.empty());
  }
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  ASSERT_EQ(run("build-plan " + corpus() + " --dataset " + fx("train.jsonl") + " --out " + path("again/plan.json"))
                .code,
            0);
  EXPECT_EQ(sha256_file(path("plan.json")), sha256_file(path("again/plan.json")));
  EXPECT_EQ(sha256_file(path("vocab.json")), sha256_file(path("again/vocab.json")));
  ASSERT_EQ(run("precompute-cache " + corpus() + " --plan " + path("again/plan.json") + " --out " +
                path("again/cache"))
                .code,
            0);
  EXPECT_EQ(sha256_file(path("cache/manifest.json")), sha256_file(path("again/cache/manifest.json")));

  std::string base = "run " + planned() + " --dataset " + fx("test.jsonl") + " --fresh --trace ";
  ASSERT_EQ(run(base + path("t1.jsonl")).code, 0);
  ASSERT_EQ(run(base + path("t2.jsonl") + " --jobs 3").code, 0);
  EXPECT_EQ(sha256_file(path("t1.jsonl")), sha256_file(path("t2.jsonl")));
}

TEST_F(CliTest, TraceAppendsUnlessFresh) {
  std::string base = "run " + planned() + " --dataset " + fx("test.jsonl") + " --trace " + path("append.jsonl");
  ASSERT_EQ(run(base + " --fresh").code, 0);
  ASSERT_EQ(run(base).code, 0);
  EXPECT_EQ(simulator::load_trace(path("append.jsonl")).size(), 84u);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  write_file_atomic(*dir_ / "cfg.json", R"({"exspec": {"n": 2, "draft_len": 6}, "toolrag": {"tau": 0.3}})");
  std::string base = "--config " + path("cfg.json") + " decode " + planned() + " --dataset " + fx("test.jsonl");
  auto r = run(base + " --n 4");
  ASSERT_EQ(r.code, 0) << r.err;
  auto knobs = json::parse(r.out).at("knobs");
  EXPECT_EQ(knobs.at("exspec").at("n"), 4);
  EXPECT_EQ(knobs.at("exspec").at("draft_len"), 6);
  EXPECT_EQ(knobs.at("toolrag").at("tau"), 0.3);
  EXPECT_EQ(knobs.at("exspec").at("markov_order"), 4);
}

TEST_F(CliTest, CacheDirFromEnvironment) {
  std::string env = "AGENTACCEL_CACHE_DIR=" + path("envcache");
  auto r = run("precompute-cache " + corpus() + " --plan " + path("plan.json"), env);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(*dir_ / "envcache/manifest.json"));
  auto w = run("weave " + corpus() + " --plan " + path("plan.json") + " --query \"text dan\"", env);
  ASSERT_EQ(w.code, 0) << w.err;
  EXPECT_GT(json::parse(w.out).at("cacheable_tokens").get<int>(), 0);
}

}  // namespace
}  // namespace agentaccel
