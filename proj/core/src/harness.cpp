#include "banditstop/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "banditstop/errors.hpp"
#include "banditstop/rng.hpp"
#include "banditstop/trajectory.hpp"

namespace banditstop {

namespace {

constexpr std::size_t kRegretChunk = 8192;

// Plays exactly `horizon` batches: the decrement test can never pass.
StoppingRuleSpec never_stop(std::int64_t horizon) {
  return StoppingRuleSpec{OnlineOpportunity{-std::numeric_limits<double>::infinity(), false}, horizon + 1};
}

std::optional<double> cumulative_regret(const ExperimentConfig& config, const PolicyState& state, Rng& rng) {
  const auto b0 = state.ols(0);
  const auto b1 = state.ols(1);
  if (!b0 || !b1) return std::nullopt;
  return policy_regret(config.context, config.model, *b0, *b1, config.regret_mc_samples, rng);
}

bool truth_covered(const InferenceResult& inf, const TrueModel& model) {
  for (int a = 0; a < 2; ++a) {
    const Vector& beta = model.beta(a);
    const auto& iv = inf.intervals[static_cast<std::size_t>(a)];
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      if (!iv[static_cast<std::size_t>(j)].contains(beta[j])) return false;
    }
  }
  return true;
}

void fill_cost(ReplicationRecord& rec, const ExperimentConfig& config, const StoppingRuleSpec& rule, double K) {
  const BoundConstants consts = config.bound_constants(K);
  const std::int64_t T = rec.stop_time;
  if (const auto* r = std::get_if<PredeterminedOpportunity>(&rule.rule)) {
    rec.bound = regret_bound_time(T, r->consts);
    rec.creg = cost_adjusted_regret(*rec.bound, T, r->consts, CostMode::Additive);
    double sum = 0.0;
    for (std::int64_t t = 1; t <= T; ++t) sum += regret_bound_time(t, r->consts);
    rec.creg_cumulative = sum + r->consts.c * static_cast<double>(r->consts.n) * static_cast<double>(T);
    return;
  }
  if (const auto* r = std::get_if<PredeterminedThreshold>(&rule.rule)) {
    rec.bound = regret_bound_time(T, r->consts);
    rec.creg = cost_adjusted_regret(*rec.bound, T, r->consts, CostMode::Threshold, r->k);
    if (!rec.creg->infinite) rec.creg_cumulative = rec.creg->value;
    return;
  }
  if (!rec.terminal) return;
  // Variance bound applied to both arms, delta/2 each.
  BoundConstants half = consts;
  half.delta = consts.delta / 2.0;
  double k = 0.0;
  for (int a = 0; a < 2; ++a) k = std::max(k, spectral_norm(rec.terminal->estimator_covariance(a)));
  rec.bound = regret_bound_from_variance(k, half);
  rec.creg = cost_adjusted_regret(*rec.bound, T, consts, CostMode::Additive);
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::int64_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::int64_t>(rank, 1, static_cast<std::int64_t>(values.size()));
  return values[static_cast<std::size_t>(rank - 1)];
}

struct MeanSd {
  std::optional<double> mean;
  std::optional<double> sd;
};

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd out;
  if (v.empty()) return out;
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  out.mean = mean;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

}  // namespace

double policy_regret(const ContextSpec& context, const TrueModel& model, const Vector& beta_hat0,
                     const Vector& beta_hat1, std::size_t mc_samples, Rng& rng) {
  if (mc_samples == 0) throw ContractError("policy_regret: need at least one sample");
  double total = 0.0;
  std::size_t done = 0;
  while (done < mc_samples) {
    const std::size_t m = std::min(kRegretChunk, mc_samples - done);
    const Matrix X = sample_batch_contexts(context, m, rng);
    const Vector v0 = X * model.beta0;
    const Vector v1 = X * model.beta1;
    const Vector h0 = X * beta_hat0;
    const Vector h1 = X * beta_hat1;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) {
      const double chosen = h1[i] > h0[i] ? v1[i] : v0[i];
      total += std::max(v0[i], v1[i]) - chosen;
    }
    done += m;
  }
  return total / static_cast<double>(mc_samples);
}

ReplicationRecord run_experiment(const ExperimentConfig& config, std::size_t rep, std::optional<double> K) {
  const StoppingRuleSpec rule = config.stopping_rule(K.value_or(1.0));
  if (rule.predetermined() && !K) throw ContractError("run_experiment: pre-determined rule needs K");

  ReplicationRecord rec;
  rec.rep = rep;
  rec.seed = derive_seed(config.master_seed, rep);
  const Rng base(rec.seed);
  const SimulationSetup setup = config.setup();

  Rng traj_rng = base.substream(kTrajectoryStream);
  Trajectory traj = simulate_trajectory(setup, rule, traj_rng);
  rec.fits = std::move(traj.fits);
  rec.stop_trace = std::move(traj.stop_trace);
  rec.stop_time = traj.stop_time;
  rec.cap_hit = traj.cap_hit;
  rec.terminal = std::move(traj.terminal);
  if (rec.terminal) {
    rec.var_norms = std::array<double, 2>{spectral_norm(rec.terminal->arm(0).sigma_hat),
                                          spectral_norm(rec.terminal->arm(1).sigma_hat)};
  }

  Rng regret_rng = base.substream(kRegretStream);
  rec.regret_hat = cumulative_regret(config, traj.final_state, regret_rng);
  fill_cost(rec, config, rule, K.value_or(1.0));

  if (config.inference.enabled) {
    if (!rec.terminal) {
      rec.error = "inference skipped: IVW estimate unavailable at T=" + std::to_string(rec.stop_time);
    } else {
      Rng inf_rng = base.substream(kInferenceStream);
      try {
        rec.inference = run_inference(StoppedExperiment{rec.stop_time, *rec.terminal}, setup, rule,
                                      config.inference.sampler, config.effective_hypothesis(), inf_rng);
        rec.covered = truth_covered(*rec.inference, config.model);
      } catch (const InfeasibleConditioning& e) {
        rec.error = std::string("infeasible conditioning: ") + e.what();
      }
    }
  }
  return rec;
}

Aggregates aggregate(std::span<const ReplicationRecord> records, bool truth_is_null) {
  std::vector<const ReplicationRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->rep < b->rep; });

  Aggregates agg;
  agg.replications = sorted.size();
  std::vector<double> stop_times, regrets, cregs, cumulative, acceptance;
  std::size_t violations = 0, covered = 0, rejects = 0, tested = 0;
  for (const auto* r : sorted) {
    if (r->failed) {
      ++agg.failed;
      continue;
    }
    ++agg.stop_time_histogram[r->stop_time];
    stop_times.push_back(static_cast<double>(r->stop_time));
    if (r->cap_hit) ++agg.cap_hits;
    if (r->regret_hat) regrets.push_back(*r->regret_hat);
    if (r->creg) {
      if (r->creg->infinite) {
        ++agg.creg_infinite;
      } else {
        cregs.push_back(r->creg->value);
      }
    }
    if (r->creg_cumulative) cumulative.push_back(*r->creg_cumulative);
    if (r->regret_hat && r->bound) {
      ++agg.bound_checked;
      if (*r->regret_hat > *r->bound) ++violations;
    }
    if (r->covered) {
      ++agg.coverage_checked;
      if (*r->covered) ++covered;
    }
    if (r->inference) {
      acceptance.push_back(r->inference->acceptance_rate);
      if (r->inference->reject) {
        ++tested;
        if (*r->inference->reject) ++rejects;
      }
    }
  }
  agg.stop_time_mean = mean_sd(stop_times).mean.value_or(0.0);
  agg.regret_mean = mean_sd(regrets).mean;
  const MeanSd c = mean_sd(cregs);
  agg.creg_mean = c.mean;
  agg.creg_sd = c.sd;
  agg.creg_cumulative_mean = mean_sd(cumulative).mean;
  agg.acceptance_rate_mean = mean_sd(acceptance).mean;
  if (agg.bound_checked > 0) {
    agg.bound_violation_rate = static_cast<double>(violations) / static_cast<double>(agg.bound_checked);
  }
  if (agg.coverage_checked > 0) {
    agg.coverage = static_cast<double>(covered) / static_cast<double>(agg.coverage_checked);
  }
  if (tested > 0) {
    agg.rejection_rate = static_cast<double>(rejects) / static_cast<double>(tested);
    if (truth_is_null) agg.type1_error = agg.rejection_rate;
  }
  return agg;
}

std::optional<double> resolve_k(const ExperimentConfig& config) {
  if (config.bounds.K) return config.bounds.K;
  const bool needs_k = config.stopping.rule == RuleKind::PredeterminedOpportunity ||
                       config.stopping.rule == RuleKind::PredeterminedThreshold;
  if (!needs_k) return std::nullopt;
  return calibrate_k(config, config.bounds.calibration.pilot_reps, config.bounds.calibration.t_ref).K;
}

ExperimentResult run_replications(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  ExperimentResult result;
  result.K = resolve_k(config);
  const std::size_t R = config.replications;

  std::vector<std::size_t> order(R);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.order) {
    std::vector<std::size_t> check = *options.order;
    std::sort(check.begin(), check.end());
    if (check != order) throw ContractError("run_replications: order is not a permutation of the reps");
    order = *options.order;
  }

  result.records.resize(R);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < R; i = next.fetch_add(1)) {
      const std::size_t rep = order[i];
      try {
        result.records[rep] = run_experiment(config, rep, result.K);
      } catch (const std::exception& e) {
        ReplicationRecord failed;
        failed.rep = rep;
        failed.seed = derive_seed(config.master_seed, rep);
        failed.failed = true;
        failed.error = e.what();
        result.records[rep] = std::move(failed);
      }
    }
  };

  const unsigned threads = std::max(1U, std::min<unsigned>(options.threads, static_cast<unsigned>(R)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  result.aggregates = aggregate(result.records, config.inference.truth_is_null);
  return result;
}

CalibrationResult calibrate_k(const ExperimentConfig& config, std::size_t pilot_reps, std::int64_t t_ref) {
  if (pilot_reps < 1) throw ConfigError("calibrate_k: pilot_reps must be >= 1");
  if (t_ref < 1) throw ConfigError("calibrate_k: t_ref must be >= 1");
  const SimulationSetup setup = config.setup();
  const StoppingRuleSpec rule = never_stop(t_ref);
  const double p = config.clip.floor();
  const double scale = static_cast<double>(config.batch_size) * static_cast<double>(t_ref) * p * p;

  CalibrationResult out;
  out.t_ref = t_ref;
  out.pilot_reps = pilot_reps;
  out.scores.reserve(pilot_reps);
  for (std::size_t i = 0; i < pilot_reps; ++i) {
    const Rng base(derive_seed(config.master_seed, kPilotOffset + i));
    Rng rng = base.substream(kTrajectoryStream);
    const Trajectory traj = simulate_trajectory(setup, rule, rng, TrajectoryOptions{t_ref, false, false});
    double worst = 0.0;
    for (int a = 0; a < 2; ++a) {
      const auto b = traj.final_state.ols(a);
      const double e = b ? (*b - config.model.beta(a)).lpNorm<1>() : std::numeric_limits<double>::infinity();
      worst = std::max(worst, e);
    }
    out.scores.push_back(worst * worst * scale);
  }
  out.K = nearest_rank_quantile(out.scores, 1.0 - config.bounds.delta);
  if (!std::isfinite(out.K) || !(out.K > 0.0)) {
    throw EstimatorUnavailable("calibrate_k: pilot estimates unavailable at t_ref=" + std::to_string(t_ref));
  }
  return out;
}

BoundCheck check_bound_validity(const ExperimentConfig& config, double K, std::int64_t t_ref, std::size_t reps) {
  const SimulationSetup setup = config.setup();
  const StoppingRuleSpec rule = never_stop(t_ref);
  BoundCheck out;
  out.bound = regret_bound_time(t_ref, config.bound_constants(K));
  for (std::size_t i = 0; i < reps; ++i) {
    const Rng base(derive_seed(config.master_seed, i));
    Rng rng = base.substream(kTrajectoryStream);
    const Trajectory traj = simulate_trajectory(setup, rule, rng, TrajectoryOptions{t_ref, false, false});
    Rng regret_rng = base.substream(kRegretStream);
    const auto regret = cumulative_regret(config, traj.final_state, regret_rng);
    ++out.reps;
    if (!regret || *regret > out.bound) ++out.violations;
  }
  out.rate = out.reps ? static_cast<double>(out.violations) / static_cast<double>(out.reps) : 0.0;
  return out;
}

}  // namespace banditstop
