#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "banditstop/bounds.hpp"
#include "banditstop/config.hpp"
#include "banditstop/estimators.hpp"
#include "banditstop/inference.hpp"
#include "banditstop/stopping.hpp"

namespace banditstop {

/// Value gap E[max_a x'beta_a - x'beta_{pi(x)}] of the greedy policy built
/// from (beta_hat0, beta_hat1), by Monte Carlo over fresh contexts.
double policy_regret(const ContextSpec& context, const TrueModel& model, const Vector& beta_hat0,
                     const Vector& beta_hat1, std::size_t mc_samples, Rng& rng);

struct ReplicationRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::vector<BatchOlsFit> fits;
  std::vector<StopDecision> stop_trace;
  std::int64_t stop_time = 0;
  bool cap_hit = false;
  std::optional<IvwEstimate> terminal;
  /// ||Sigma_hat_{T,a}||_2 per arm.
  std::optional<std::array<double, 2>> var_norms;
  /// Regret of the greedy policy from the cumulative OLS fit at T.
  std::optional<double> regret_hat;
  /// Regret bound at T: U(T) for pre-determined rules, the variance bound
  /// with delta/2 per arm for online rules.
  std::optional<double> bound;
  std::optional<CostAdjustedRegret> creg;
  /// sum_{t <= T} U(t) + c n T (Additive) or c n T (Threshold); pre-determined
  /// rules only.
  std::optional<double> creg_cumulative;
  std::optional<InferenceResult> inference;
  /// Every coordinate of the true coefficients inside its interval.
  std::optional<bool> covered;
  std::optional<std::string> error;
  bool failed = false;
};

/// One replication. Deterministic in (config, rep, K). `K` is required only by
/// the pre-determined rules.
ReplicationRecord run_experiment(const ExperimentConfig& config, std::size_t rep, std::optional<double> K);

struct Aggregates {
  std::size_t replications = 0;
  std::size_t failed = 0;
  std::map<std::int64_t, std::size_t> stop_time_histogram;
  double stop_time_mean = 0.0;
  std::size_t cap_hits = 0;
  std::optional<double> regret_mean;
  std::optional<double> creg_mean;
  std::optional<double> creg_sd;
  std::size_t creg_infinite = 0;
  std::optional<double> creg_cumulative_mean;
  std::optional<double> bound_violation_rate;
  std::size_t bound_checked = 0;
  std::optional<double> coverage;
  std::size_t coverage_checked = 0;
  std::optional<double> rejection_rate;
  /// rejection_rate when the truth is marked as H0.
  std::optional<double> type1_error;
  std::optional<double> acceptance_rate_mean;
};

/// Reduction over records in rep order; independent of execution order.
Aggregates aggregate(std::span<const ReplicationRecord> records, bool truth_is_null);

struct RunOptions {
  unsigned threads = 1;
  /// Execution order of rep indices. Must be a permutation of 0..R-1.
  std::optional<std::vector<std::size_t>> order;
};

struct ExperimentResult {
  std::optional<double> K;
  std::vector<ReplicationRecord> records;  // indexed by rep
  Aggregates aggregates;
};

/// K from the config, else calibrated when the rule needs it.
std::optional<double> resolve_k(const ExperimentConfig& config);

/// Per-rep fatal errors are recorded, never propagated.
ExperimentResult run_replications(const ExperimentConfig& config, const RunOptions& options = {});

struct CalibrationResult {
  double K = 0.0;
  std::int64_t t_ref = 0;
  std::size_t pilot_reps = 0;
  /// Per pilot: max_a ||beta_hat_a - beta_a||_1^2 n t p^2.
  std::vector<double> scores;
};

/// Smallest K with max_a ||beta_hat_{t,a} - beta_a||_1 <= sqrt(K / (n t p^2))
/// in a (1 - delta) fraction of pilot replications at t = t_ref. Pilot i uses
/// seed derive_seed(master, kPilotOffset + i).
CalibrationResult calibrate_k(const ExperimentConfig& config, std::size_t pilot_reps, std::int64_t t_ref);

struct BoundCheck {
  std::size_t reps = 0;
  std::size_t violations = 0;
  double rate = 0.0;
  double bound = 0.0;
};

/// Realized regret at t_ref against U(t_ref) over `reps` seeds
/// derive_seed(master, i), i = 0..reps-1 (disjoint from pilot seeds).
BoundCheck check_bound_validity(const ExperimentConfig& config, double K, std::int64_t t_ref, std::size_t reps);

}  // namespace banditstop
