#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "banditstop/estimators.hpp"
#include "banditstop/model.hpp"
#include "banditstop/policies.hpp"
#include "banditstop/rng.hpp"
#include "banditstop/stopping.hpp"

namespace banditstop {

/// Everything needed to play the batched protocol forward.
struct SimulationSetup {
  ContextSpec context;
  TrueModel model;
  PolicyKind policy = UniformRandom{};
  ClipSchedule clip;
  std::int64_t batch_size = 100;
  SigmaMode sigma_mode = KnownSigma{1.0};

  void validate() const;
};

struct TrajectoryOptions {
  /// Stop simulating after this many batches even if the rule has not fired.
  std::optional<std::int64_t> horizon;
  bool keep_batch_data = false;
  bool keep_propensities = false;
};

struct Trajectory {
  std::vector<BatchOlsFit> fits;
  std::vector<StopDecision> stop_trace;
  std::int64_t stop_time = 0;
  bool stopped = false;
  bool cap_hit = false;
  PolicyState final_state;
  /// IVW estimate at the last simulated batch, when estimable.
  std::optional<IvwEstimate> terminal;
  std::vector<BatchData> data;
  std::vector<BatchActions> propensities;
};

/// Play batches until the rule stops (or the horizon). Per batch: sample
/// contexts, select actions with the frozen policy, realize rewards, fit BOLS,
/// update the IVW sums and the policy state, evaluate the rule.
Trajectory simulate_trajectory(const SimulationSetup& setup, const StoppingRuleSpec& rule, Rng& rng,
                               const TrajectoryOptions& options = {});

/// Sigma_hat per arm after each prefix of `fits`; nullopt where not estimable.
std::vector<std::optional<std::array<Matrix, 2>>> variance_path(std::span<const BatchOlsFit> fits,
                                                                const SigmaMode& mode, std::int64_t n);

/// Recompute the stop decisions from stored fits alone.
std::vector<StopDecision> replay_stop_trace(std::span<const BatchOlsFit> fits, const SigmaMode& mode,
                                            std::int64_t n, const StoppingRuleSpec& rule);

}  // namespace banditstop
