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

#include <cmath>

#include "agentaccel/simulator.hpp"
#include "test_util.hpp"

namespace agentaccel::simulator {
namespace {

using kvstore::geometry_7b;

TEST(Latency, DecodeAndVerify) {
  auto g = geometry_7b();
  auto d = m4_pro();
  double t = decode_token_latency(g, d);
  EXPECT_DOUBLE_EQ(t, static_cast<double>(g.params_bytes) / 273e9);
  EXPECT_DOUBLE_EQ(verify_latency(1, g, d, TaxCurve::calibrated()), t);
  EXPECT_DOUBLE_EQ(verify_latency(2, g, d, TaxCurve::calibrated()) / t, 1.86);
  TaxCurve lin({{1, 1.0}, {2, 1.5}, {4, 2.5}});
  EXPECT_DOUBLE_EQ(verify_latency(3, g, d, lin) / t, 2.0);
}

TEST(Latency, PrefillAndSsd) {
  auto g = geometry_7b();
  auto d = m4_pro();
  EXPECT_DOUBLE_EQ(prefill_latency(100, g, d), 2.0 * g.param_count * 100 / (38e12 * 0.29));
  EXPECT_DOUBLE_EQ(prefill_latency(0, g, d), 0.0);
  EXPECT_DOUBLE_EQ(ssd_load_latency(10, g, d), 10.0 * 131072 / 7e9);
}

TEST(Devices, PresetsValidateAndRoundTrip) {
  for (const auto& d : device_presets()) {
    EXPECT_NO_THROW(d.validate()) << d.name;
    EXPECT_EQ(DeviceSpec::from_json(d.to_json()).to_json(), d.to_json());
  }
  EXPECT_EQ(device_preset("m4-pro").prefill_utilization, 0.29);
  EXPECT_THROW(device_preset("abacus"), ParameterError);
  DeviceSpec bad{"bad", 1.0, 0.0, 1.0, 0.3};
  EXPECT_THROW(bad.validate(), ParameterError);
}

// Closed form: (sum_{i=1..N} a^i + 1) / (N d/t + tax(N+1)).
double speedup_oracle(double t, double d, double a, int N, double tax) {
  double e = 0;
  for (int i = 1; i <= N; ++i) e += std::pow(a, i);
  return (e + 1) / (N * d / t + tax);
}

TEST(Speedup, MatchesClosedForm) {
  for (double a : {0.0, 0.2, 0.5, 0.9, 1.0})
    for (int N = 1; N <= 6; ++N) {
      EXPECT_NEAR(specdec_speedup(7.0, 1.0, a, N, TaxCurve::none()), speedup_oracle(7, 1, a, N, 1.0), 1e-12);
      EXPECT_NEAR(specdec_speedup(7.0, 1.0, a, N, TaxCurve::calibrated()), speedup_oracle(7, 1, a, N, 1.86),
                  1e-12);
    }
  EXPECT_DOUBLE_EQ(specdec_speedup(7.0, 0.0, 0.0, 1, TaxCurve::none()), 1.0);
  EXPECT_DOUBLE_EQ(specdec_speedup(7.0, 0.0, 1.0, 3, TaxCurve::none()), 4.0);
  EXPECT_THROW(specdec_speedup(7.0, 1.0, 1.5, 2, TaxCurve::none()), ParameterError);
  EXPECT_THROW(specdec_speedup(7.0, 1.0, 0.5, 0, TaxCurve::none()), ParameterError);
}

TEST(Speedup, MonotoneInAlphaAndTax) {
  double prev = 0;
  for (double a = 0; a <= 1.0; a += 0.05) {
    double s = specdec_speedup(7.0, 0.5, a, 4, TaxCurve::calibrated());
    EXPECT_GE(s, prev);
    prev = s;
  }
  for (double tax : {1.0, 1.3, 1.86, 2.5}) {
    double lo = specdec_speedup(7.0, 0.5, 0.4, 2, TaxCurve({{1, 1.0}, {2, tax}}));
    double hi = specdec_speedup(7.0, 0.5, 0.4, 2, TaxCurve({{1, 1.0}, {2, tax + 0.1}}));
    EXPECT_GT(lo, hi);
  }
}

TEST(Speedup, DraftModelOrdering) {
  struct Row {
    double size, alpha;
  };
  // 3B, 1B, 160M and 68M drafts against a 7B target.
  const Row rows[] = {{3.21e9, 0.42}, {1.24e9, 0.33}, {0.16e9, 0.02}, {0.068e9, 0.02}};
  const double target = 7.24e9;
  double best_none = 0, best_tax = 0;
  int arg_none = -1, arg_tax = -1;
  for (int i = 0; i < 4; ++i) {
    double none = specdec_speedup(target, rows[i].size, rows[i].alpha, 2, TaxCurve::none());
    double tax = specdec_speedup(target, rows[i].size, rows[i].alpha, 2, TaxCurve::calibrated());
    EXPECT_LE(tax, none);
    if (none > best_none) best_none = none, arg_none = i;
    if (tax > best_tax) best_tax = tax, arg_tax = i;
  }
  EXPECT_EQ(arg_none, 1);
  EXPECT_EQ(arg_tax, 1);
}

TEST(Breakdown, AdditiveAndNormalized) {
  SimConfig cfg;
  auto rep = simulate_pipeline(calibration_trace(), cfg);
  for (const auto& c : kCells) {
    const auto& b = rep.mean.at(c.name);
    double sum = 0, fsum = 0;
    for (double s : b.seconds) sum += s;
    for (double f : b.fractions()) fsum += f;
    EXPECT_NEAR(b.total(), sum, 1e-12);
    EXPECT_NEAR(fsum, 1.0, 1e-12);
    EXPECT_NEAR(b.prefill() + b.decode() + b.other(), b.total(), 1e-12);
  }
}

TEST(Calibration, BaselineFractions) {
  auto rep = simulate_pipeline(calibration_trace(), SimConfig{});
  const auto& b = rep.mean.at("baseline");
  EXPECT_NEAR(b.prefill() / b.total(), 0.217, 0.05);
  EXPECT_NEAR(b.decode() / b.total(), 0.687, 0.05);
}

TEST(Calibration, EndToEndSpeedup) {
  auto rep = simulate_pipeline(calibration_trace(), SimConfig{});
  double pw = rep.speedup("baseline", "pw"), es = rep.speedup("baseline", "es");
  double both = rep.speedup("baseline", "pw_es");
  EXPECT_GE(both, std::max(pw, es));
  EXPECT_GE(both, 1.3);
  EXPECT_LE(both, 1.9);
  EXPECT_GT(pw, 1.0);
  EXPECT_GT(es, 1.0);
}

TEST(Calibration, TraceMatchesPublishedRates) {
  const auto r = calibration_trace().front();
  // Roughly 70% fewer uncacheable Planner tokens.
  double drop = 1.0 - static_cast<double>(r.planner_weaver.uncacheable_tokens) /
                          static_cast<double>(r.planner_baseline.uncacheable_tokens);
  EXPECT_NEAR(drop, 0.70, 0.05);
  EXPECT_EQ(r.planner.selective.drafts_accepted, r.planner.non_selective.drafts_accepted);
  EXPECT_EQ(r.arbiter.selective.drafts_accepted, r.arbiter.non_selective.drafts_accepted);
  EXPECT_LT(r.planner.selective.drafts_generated, r.planner.non_selective.drafts_generated);
}

TEST(Simulate, NonSelectiveReplayIsSlower) {
  SimConfig sel, non;
  non.selective = false;
  auto a = simulate_pipeline(calibration_trace(), sel), b = simulate_pipeline(calibration_trace(), non);
  EXPECT_LT(a.mean.at("es").decode(), b.mean.at("es").decode());
  EXPECT_DOUBLE_EQ(a.mean.at("baseline").total(), b.mean.at("baseline").total());
}

TEST(Simulate, DeterministicAndEmptyTraceFails) {
  auto a = simulate_pipeline(calibration_trace(), SimConfig{}).to_json();
  auto b = simulate_pipeline(calibration_trace(), SimConfig{}).to_json();
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_THROW(simulate_pipeline({}, SimConfig{}), ValidationError);
  auto csv = report_csv(a);
  EXPECT_EQ(csv.rfind("cell,stage,seconds,fraction\n", 0), 0u);
}

TEST(Trace, RoundTripAndErrors) {
  auto t = calibration_trace();
  auto text = dump_trace(t);
  auto back = parse_trace(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(dump_trace(back), text);
  EXPECT_THROW(parse_trace("{not json\n"), ValidationError);
  EXPECT_THROW(parse_trace("{\"query_id\":\"q\"}\n"), ValidationError);
  EXPECT_THROW(load_trace("/nonexistent/trace.jsonl"), MissingInputError);
  EXPECT_TRUE(parse_trace("\n  \n").empty());
}

TEST(Curve, SmallExample) {
  std::vector<clusterplan::ActivationSequence> seqs = {{0, 1}, {0, 1}, {2}};
  std::vector<std::size_t> tokens = {10, 20, 30};
  std::vector<std::size_t> budgets = {0, 1, 2, 3};
  auto g = kvstore::geometry_desk();
  auto curve = coverage_curve(seqs, tokens, 5, g, budgets);
  // Activated tokens: 2 * 30 + 30 = 90. Greedy picks [0], then [0, 1], then [2].
  EXPECT_DOUBLE_EQ(curve[0].coverage, 0.0);
  EXPECT_EQ(curve[0].storage_bytes, kvstore::kv_size(5, g));
  EXPECT_DOUBLE_EQ(curve[1].coverage, 20.0 / 90.0);
  EXPECT_DOUBLE_EQ(curve[2].coverage, 60.0 / 90.0);
  EXPECT_DOUBLE_EQ(curve[3].coverage, 1.0);
  EXPECT_EQ(curve[3].storage_bytes, kvstore::kv_size(5 + 15 + 35 + 35, g));
  EXPECT_EQ(saturation_budget(seqs), 3u);
}

TEST(Curve, FixtureShape) {
  auto f = testing::Fixture::load();
  auto seqs = clusterplan::activation_sequences(f->train, *f->plan);
  std::vector<std::size_t> tokens;
  for (const auto& c : f->plan->clusters()) tokens.push_back(c.example_tokens.size());
  auto sat = saturation_budget(seqs);
  std::vector<std::size_t> budgets;
  for (std::size_t b = 0; b <= sat; ++b) budgets.push_back(b);
  auto curve = coverage_curve(seqs, tokens, f->assets->static_prefix().size(), geometry_7b(), budgets);
  EXPECT_EQ(curve.front().coverage, 0.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].coverage, curve[i - 1].coverage);
    EXPECT_GT(curve[i].storage_bytes, curve[i - 1].storage_bytes);
  }
  EXPECT_DOUBLE_EQ(curve.back().coverage, 1.0);
  auto k = knee(curve);
  EXPECT_LT(k, sat);
  EXPECT_GE(curve[k].coverage, 0.7);
  auto j = curve_json(curve, k, sat);
  EXPECT_EQ(j.at("points").size(), curve.size());
}

}  // namespace
}  // namespace agentaccel::simulator
