#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "banditstop/linalg.hpp"
#include "banditstop/rng.hpp"
#include "banditstop/schedule.hpp"

namespace banditstop {

struct UniformRandom {};

/// Greedy arm with probability 1 - p_t/2, the other with p_t/2.
struct EpsGreedy {
  Schedule eps;
};

/// argmax_a  x'beta_hat_a + c_t * sqrt(x' G_a^-1 x)
struct Ucb {
  Schedule c;
};

/// Independent Gaussian posteriors N(beta_hat_a, sigma_prior^2 G_a^-1).
struct Thompson {
  double sigma_prior = 1.0;
};

using PolicyKind = std::variant<UniformRandom, EpsGreedy, Ucb, Thompson>;

/// Throws ConfigError when a schedule is out of range or increasing.
void validate_policy(const PolicyKind& kind, std::int64_t check_through = 10000);

/// Cumulative sufficient statistics for one arm.
struct ArmStats {
  Matrix gram;
  Vector moment;
  std::int64_t count = 0;
};

/// Everything the three adaptive policies read. `t` counts completed batches,
/// so the batch about to be played is t + 1.
struct PolicyState {
  std::array<ArmStats, 2> arms;
  std::int64_t t = 0;

  static PolicyState empty(int dim);
  int dim() const { return static_cast<int>(arms[0].moment.size()); }

  /// G_a^-1 m_a, or nullopt when G_a is singular.
  std::optional<Vector> ols(int arm) const;
};

/// Clip levels p_t in (0, 1/2]; the floor is the schedule's limit.
struct ClipSchedule {
  Schedule levels = Schedule::constant(0.05);

  double at(std::int64_t t) const { return levels.at(t); }
  double floor() const { return levels.limit(); }
  void validate(std::int64_t check_through = 10000) const;
};

/// Batch-frozen view of a policy: estimates and factorizations computed once
/// from the state, then queried per unit.
class FrozenPolicy {
 public:
  FrozenPolicy(const PolicyKind& kind, const PolicyState& state);

  /// Pre-clip probability of playing arm 1 at context x.
  double prob_arm1(const Eigen::Ref<const Vector>& x) const;

  std::int64_t batch_index() const noexcept { return batch_; }
  bool degenerate() const noexcept { return degenerate_; }

 private:
  PolicyKind kind_;
  std::int64_t batch_;
  bool degenerate_ = true;
  std::array<Vector, 2> beta_;
  std::array<std::optional<Eigen::LLT<Matrix>>, 2> chol_;
  double schedule_value_ = 0.0;
};

double action_probability(const PolicyKind& kind, const PolicyState& state, const Vector& x);

/// min(max(prob, p_t), 1 - p_t). Throws ConfigError unless p_t in (0, 1/2].
double clip(double prob, double p_t);

/// Per-unit propensity log of one batch.
struct BatchActions {
  std::vector<int> actions;
  std::vector<double> pre_clip;
  std::vector<double> post_clip;
  double clip_level = 0.0;
};

BatchActions select_actions(const PolicyKind& kind, const PolicyState& state, const Matrix& contexts,
                            const ClipSchedule& clip_schedule, Rng& rng);

/// Adds one completed batch: G_a += x x', m_a += x y per unit, then t += 1.
PolicyState update_state(PolicyState state, const Matrix& contexts, std::span<const int> actions,
                         const Vector& rewards);

/// In-place form used by the simulator.
void accumulate_batch(PolicyState& state, const Matrix& contexts, std::span<const int> actions,
                      const Vector& rewards);

/// Monte Carlo estimate of P(x'b1 > x'b0) with b_a drawn from the Thompson
/// posteriors. Cross-check for the closed form.
double thompson_sampled_probability(const PolicyState& state, const Vector& x, double sigma_prior,
                                    std::size_t draws, Rng& rng);

}  // namespace banditstop
