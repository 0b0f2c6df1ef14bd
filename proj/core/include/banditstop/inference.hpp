#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "banditstop/estimators.hpp"
#include "banditstop/rng.hpp"
#include "banditstop/stopping.hpp"
#include "banditstop/trajectory.hpp"

namespace banditstop {

enum class SamplerMode {
  /// Draw from N(beta_ivw(T), Sigma_hat_T / n) per arm. Valid when the stop
  /// statistic depends on Gram matrices only (known sigma).
  IndependenceShortcut,
  /// Resimulate whole trajectories under the plug-in model and keep the
  /// terminal IVW pair of those that stop exactly at T.
  ResimulationRejection,
};

enum class Multiplicity { None, Bonferroni };

struct ConditionalSamplerConfig {
  SamplerMode mode = SamplerMode::IndependenceShortcut;
  std::size_t n_samples = 1000;
  std::size_t max_attempts = 100000;
  double level = 0.95;
  Multiplicity multiplicity = Multiplicity::Bonferroni;

  void validate() const;
};

struct BetaPair {
  Vector beta0;
  Vector beta1;

  const Vector& arm(int a) const { return a == 1 ? beta1 : beta0; }
};

struct ConditionalSamples {
  std::vector<BetaPair> samples;
  std::uint64_t attempts = 0;
  double acceptance_rate = 1.0;
};

/// What the sampler conditions on: the realized stop time and the terminal
/// IVW estimate.
struct StoppedExperiment {
  std::int64_t stop_time = 0;
  IvwEstimate terminal;
};

/// Throws InfeasibleConditioning if no attempt is accepted. Attempt k of the
/// rejection sampler draws from rng.substream(k), so the output does not
/// depend on execution order.
ConditionalSamples sample_conditional(const StoppedExperiment& stopped, const SimulationSetup& setup,
                                      const StoppingRuleSpec& rule, const ConditionalSamplerConfig& cfg, Rng& rng);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Per-coordinate nearest-rank interval: lo is the value at 1-based rank
/// ceil((alpha/2) N), hi at ceil((1 - alpha/2) N), alpha = 1 - level.
/// Requires at least 100 samples.
std::vector<Interval> bootstrap_interval(std::span<const Vector> samples, double level);

/// Per-coordinate level that gives `level` jointly over `coordinates` under
/// the chosen correction.
double coordinate_level(double level, int coordinates, Multiplicity multiplicity);

/// Reject iff any coordinate of beta0* or beta1* lies strictly outside its
/// interval.
bool test_hypothesis(std::span<const BetaPair> samples, const BetaPair& hypothesis, double level,
                     Multiplicity multiplicity = Multiplicity::None);

struct InferenceResult {
  std::array<Vector, 2> point;
  std::array<std::vector<Interval>, 2> intervals;
  std::optional<bool> reject;
  double acceptance_rate = 1.0;
  std::size_t samples_retained = 0;
  std::uint64_t attempts = 0;
  double coordinate_level = 0.95;
};

/// Sample, form intervals at the corrected per-coordinate level and, when a
/// hypothesis is supplied, test it.
InferenceResult run_inference(const StoppedExperiment& stopped, const SimulationSetup& setup,
                              const StoppingRuleSpec& rule, const ConditionalSamplerConfig& cfg,
                              const std::optional<BetaPair>& hypothesis, Rng& rng);

}  // namespace banditstop
