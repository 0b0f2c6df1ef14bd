#include <algorithm>
#include <fstream>
#include <numeric>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "banditstop/config.hpp"
#include "banditstop/errors.hpp"
#include "banditstop/harness.hpp"
#include "banditstop/rng.hpp"

using namespace banditstop;
using nlohmann::json;

namespace {

json base_json() {
  std::ifstream in(std::string(BANDITSTOP_SOURCE_DIR) + "/configs/quickstart.json");
  json j = json::parse(in);
  j["regret_mc_samples"] = 2000;
  j["replications"] = 6;
  return j;
}

void expect_same(const ReplicationRecord& a, const ReplicationRecord& b) {
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_EQ(a.stop_trace, b.stop_trace);
  EXPECT_EQ(a.stop_time, b.stop_time);
  ASSERT_EQ(a.terminal.has_value(), b.terminal.has_value());
  if (a.terminal) {
    for (int arm = 0; arm < 2; ++arm) {
      EXPECT_EQ(a.terminal->arm(arm).beta, b.terminal->arm(arm).beta);
      EXPECT_EQ(a.terminal->arm(arm).sigma_hat, b.terminal->arm(arm).sigma_hat);
    }
  }
  EXPECT_EQ(a.regret_hat, b.regret_hat);
  EXPECT_EQ(a.bound, b.bound);
  ASSERT_EQ(a.inference.has_value(), b.inference.has_value());
  if (a.inference) {
    for (int arm = 0; arm < 2; ++arm) {
      const auto& x = a.inference->intervals[static_cast<std::size_t>(arm)];
      const auto& y = b.inference->intervals[static_cast<std::size_t>(arm)];
      ASSERT_EQ(x.size(), y.size());
      for (std::size_t j = 0; j < x.size(); ++j) {
        EXPECT_EQ(x[j].lo, y[j].lo);
        EXPECT_EQ(x[j].hi, y[j].hi);
      }
    }
    EXPECT_EQ(a.inference->reject, b.inference->reject);
  }
}

}  // namespace

TEST(PolicyRegret, ExactForKnownCases) {
  const auto ctx = ContextSpec::uniform_cube(1);
  TrueModel m{Vector::Constant(1, 0.0), Vector::Constant(1, 1.0), 1, 1, NoiseKind::Gaussian};
  Rng rng(1);
  EXPECT_EQ(policy_regret(ctx, m, m.beta0, m.beta1, 1000, rng), 0.0);
  // Reversed policy: loses |x| on every context, E|x| = 1/2.
  Rng rng2(2);
  EXPECT_NEAR(policy_regret(ctx, m, m.beta1, m.beta0, 200000, rng2), 0.5, 0.005);
}

TEST(RunExperiment, HugeThresholdStopsAtOne) {
  json j = base_json();
  j["policy"] = {{"type", "uniform"}};
  j["stopping"] = {{"rule", "online_threshold"}, {"k", 1e12}};
  const auto cfg = parse_config(j);
  for (std::size_t rep = 0; rep < 5; ++rep) {
    const auto rec = run_experiment(cfg, rep, std::nullopt);
    EXPECT_EQ(rec.stop_time, 1);
    EXPECT_FALSE(rec.cap_hit);
  }
}

TEST(RunExperiment, PredeterminedOpportunityStopsAtTen) {
  // K'' = K' / (n p^2) = 4 K / (100 * 0.01) = 100 with K = 25; c n = 1.
  json j = base_json();
  j["stopping"] = {{"rule", "predetermined_opportunity"}, {"t_max", 1000}};
  j["bounds"] = {{"L", 1.0}, {"lambda", 1.0}, {"M", 1.0}, {"delta", 0.1}, {"K", 25.0}, {"c", 0.01}};
  const auto cfg = parse_config(j);
  EXPECT_NEAR(cfg.bound_constants(25.0).k_double_prime(), 100.0, 1e-9);
  for (std::size_t rep = 0; rep < 4; ++rep) {
    const auto rec = run_experiment(cfg, rep, 25.0);
    EXPECT_EQ(rec.stop_time, 10);
    ASSERT_TRUE(rec.creg && rec.creg_cumulative);
    EXPECT_NEAR(rec.creg->value, 10.0 + 10.0, 1e-9);
    double sum = 0.0;
    for (int t = 1; t <= 10; ++t) sum += 100.0 / t;
    EXPECT_NEAR(*rec.creg_cumulative, sum + 10.0, 1e-9);
  }
  EXPECT_THROW(run_experiment(cfg, 0, std::nullopt), ContractError);
}

TEST(RunExperiment, Deterministic) {
  const auto cfg = parse_config(base_json());
  expect_same(run_experiment(cfg, 3, std::nullopt), run_experiment(cfg, 3, std::nullopt));
}

TEST(RunExperiment, OnlineBoundUsesHalfDelta) {
  const auto cfg = parse_config(base_json());
  const auto rec = run_experiment(cfg, 0, std::nullopt);
  ASSERT_TRUE(rec.terminal && rec.bound);
  double k = 0.0;
  for (int a = 0; a < 2; ++a) k = std::max(k, spectral_norm(rec.terminal->estimator_covariance(a)));
  const double L = std::sqrt(2.0);
  const double expected = std::pow(2.0 * L * std::sqrt(2.0 * k / 0.05), 2.0);
  EXPECT_NEAR(*rec.bound, expected, 1e-9 * expected);
  EXPECT_NEAR(rec.creg->value, expected + 0.001 * 100 * static_cast<double>(rec.stop_time), 1e-9 * expected);
}

TEST(RunExperiment, UnavailableEstimateRecordedNotFatal) {
  json j = base_json();
  j["batch_size"] = 2;
  j["stopping"] = {{"rule", "online_threshold"}, {"k", 1.0}, {"t_max", 1}};
  const auto cfg = parse_config(j);
  const auto result = run_replications(cfg);
  for (const auto& rec : result.records) {
    EXPECT_FALSE(rec.failed);
    EXPECT_TRUE(rec.cap_hit);
    EXPECT_FALSE(rec.terminal);
    ASSERT_TRUE(rec.error);
    EXPECT_NE(rec.error->find("unavailable"), std::string::npos);
  }
  EXPECT_FALSE(result.aggregates.coverage);
}

TEST(RunReplications, ForcedIdenticalSeeds) {
  json j = base_json();
  j["replications"] = 2;
  const std::uint64_t m1 = 2024;
  const std::uint64_t phi = 0x9E3779B97F4A7C15ULL;
  const std::uint64_t m2 = m1 ^ mix64(phi) ^ mix64(1 + phi);
  ASSERT_EQ(derive_seed(m1, 0), derive_seed(m2, 1));
  j["master_seed"] = m1;
  const auto a = run_replications(parse_config(j));
  j["master_seed"] = m2;
  const auto b = run_replications(parse_config(j));
  expect_same(a.records[0], b.records[1]);
}

TEST(RunReplications, OrderAndThreadsDoNotMatter) {
  const auto cfg = parse_config(base_json());
  const auto serial = run_replications(cfg);
  RunOptions opts;
  opts.threads = 3;
  opts.order = std::vector<std::size_t>{5, 2, 0, 4, 1, 3};
  const auto shuffled = run_replications(cfg, opts);
  ASSERT_EQ(serial.records.size(), shuffled.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    EXPECT_EQ(shuffled.records[i].rep, i);
    expect_same(serial.records[i], shuffled.records[i]);
  }
  EXPECT_EQ(serial.aggregates.stop_time_histogram, shuffled.aggregates.stop_time_histogram);
  EXPECT_EQ(serial.aggregates.creg_mean, shuffled.aggregates.creg_mean);
  EXPECT_EQ(serial.aggregates.coverage, shuffled.aggregates.coverage);
  opts.order = std::vector<std::size_t>{0, 0, 1, 2, 3, 4};
  EXPECT_THROW(run_replications(cfg, opts), ContractError);
}

TEST(RunReplications, ReplayEveryRecord) {
  const auto cfg = parse_config(base_json());
  const auto result = run_replications(cfg);
  const auto rule = cfg.stopping_rule(1.0);
  for (const auto& rec : result.records) {
    EXPECT_EQ(replay_stop_trace(rec.fits, cfg.variance, cfg.batch_size, rule), rec.stop_trace);
  }
}

TEST(Aggregate, HandComputed) {
  std::vector<ReplicationRecord> recs(4);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].rep = 3 - i;
  recs[0].stop_time = 2;
  recs[1].stop_time = 2;
  recs[2].stop_time = 5;
  recs[3].failed = true;
  recs[0].regret_hat = 1.0;
  recs[0].bound = 0.5;
  recs[1].regret_hat = 0.2;
  recs[1].bound = 0.5;
  recs[0].creg = CostAdjustedRegret{CostMode::Additive, false, 3.0, 0, 0};
  recs[1].creg = CostAdjustedRegret{CostMode::Additive, false, 5.0, 0, 0};
  recs[2].creg = CostAdjustedRegret{CostMode::Threshold, true, 0.0, 0, 0};
  recs[0].covered = true;
  recs[2].covered = false;
  const auto agg = aggregate(recs, true);
  EXPECT_EQ(agg.replications, 4U);
  EXPECT_EQ(agg.failed, 1U);
  EXPECT_EQ(agg.stop_time_histogram.at(2), 2U);
  EXPECT_EQ(agg.stop_time_histogram.at(5), 1U);
  EXPECT_DOUBLE_EQ(agg.stop_time_mean, 3.0);
  EXPECT_DOUBLE_EQ(*agg.creg_mean, 4.0);
  EXPECT_DOUBLE_EQ(*agg.creg_sd, std::sqrt(2.0));
  EXPECT_EQ(agg.creg_infinite, 1U);
  EXPECT_DOUBLE_EQ(*agg.bound_violation_rate, 0.5);
  EXPECT_DOUBLE_EQ(*agg.coverage, 0.5);
  EXPECT_FALSE(agg.rejection_rate);
}

TEST(Calibration, QuantileOfScores) {
  json j = base_json();
  j["bounds"]["delta"] = 0.2;
  const auto cfg = parse_config(j);
  const auto cal = calibrate_k(cfg, 50, 5);
  ASSERT_EQ(cal.scores.size(), 50U);
  auto sorted = cal.scores;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(cal.K, sorted[39]);  // rank ceil(0.8 * 50) = 40
  const auto again = calibrate_k(cfg, 50, 5);
  EXPECT_EQ(again.scores, cal.scores);
  EXPECT_THROW(calibrate_k(cfg, 0, 5), ConfigError);
}

TEST(Calibration, ResolveK) {
  json j = base_json();
  auto cfg = parse_config(j);
  EXPECT_FALSE(resolve_k(cfg));
  j["stopping"] = {{"rule", "predetermined_threshold"}, {"k", 0.1}};
  j["bounds"]["K"] = 3.0;
  EXPECT_EQ(*resolve_k(parse_config(j)), 3.0);
  j["bounds"].erase("K");
  j["bounds"]["calibration"] = {{"pilot_reps", 20}, {"t_ref", 3}};
  cfg = parse_config(j);
  EXPECT_EQ(*resolve_k(cfg), calibrate_k(cfg, 20, 3).K);
}

TEST(Calibration, BoundCheckCountsViolations) {
  const auto cfg = parse_config(base_json());
  const auto tiny = check_bound_validity(cfg, 1e-12, 5, 20);
  EXPECT_EQ(tiny.reps, 20U);
  const auto huge = check_bound_validity(cfg, 1e6, 5, 20);
  EXPECT_EQ(huge.violations, 0U);
  EXPECT_GE(tiny.violations, huge.violations);
}
