#include "banditstop/trajectory.hpp"

#include "banditstop/errors.hpp"

namespace banditstop {

namespace {

// Advances the IVW sums by one fit and reports Sigma_hat for both arms.
class VarianceTracker {
 public:
  VarianceTracker(int dim, SigmaMode mode, std::int64_t n) : acc_(dim), mode_(mode), n_(n) {}

  void add(const BatchOlsFit& fit) {
    acc_.add(fit);
    previous_ = std::move(current_);
    current_.reset();
    try {
      last_ = acc_.estimate(mode_, n_);
      current_ = std::array<Matrix, 2>{last_->arm(0).sigma_hat, last_->arm(1).sigma_hat};
    } catch (const EstimatorUnavailable&) {
      last_.reset();
    }
  }

  VarianceSnapshot snapshot() const { return VarianceSnapshot{current_, previous_, n_}; }
  const std::optional<std::array<Matrix, 2>>& current() const { return current_; }
  const std::optional<IvwEstimate>& last() const { return last_; }

 private:
  IvwAccumulator acc_;
  SigmaMode mode_;
  std::int64_t n_;
  std::optional<std::array<Matrix, 2>> current_;
  std::optional<std::array<Matrix, 2>> previous_;
  std::optional<IvwEstimate> last_;
};

}  // namespace

void SimulationSetup::validate() const {
  context.validate();
  model.validate(context.dim);
  validate_policy(policy);
  clip.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (const auto* known = std::get_if<KnownSigma>(&sigma_mode)) {
    if (!(known->sigma > 0.0)) throw ConfigError("known sigma must be positive");
  }
}

Trajectory simulate_trajectory(const SimulationSetup& setup, const StoppingRuleSpec& rule, Rng& rng,
                               const TrajectoryOptions& options) {
  const int d = setup.context.dim;
  const auto n = static_cast<std::size_t>(setup.batch_size);
  Trajectory traj;
  traj.final_state = PolicyState::empty(d);
  VarianceTracker tracker(d, setup.sigma_mode, setup.batch_size);

  for (std::int64_t t = 1;; ++t) {
    if (options.horizon && t > *options.horizon) break;
    Matrix X = sample_batch_contexts(setup.context, n, rng);
    BatchActions acts = select_actions(setup.policy, traj.final_state, X, setup.clip, rng);
    Vector y = realize_rewards(setup.model, X, acts.actions, rng);

    traj.fits.push_back(fit_batch_ols(X, acts.actions, y, t));
    accumulate_batch(traj.final_state, X, acts.actions, y);
    tracker.add(traj.fits.back());

    StopDecision decision = evaluate(rule, t, tracker.snapshot());
    traj.stop_trace.push_back(decision);
    traj.stop_time = t;

    if (options.keep_batch_data) traj.data.push_back(BatchData{std::move(X), acts.actions, std::move(y)});
    if (options.keep_propensities) traj.propensities.push_back(std::move(acts));

    if (decision.stop) {
      traj.stopped = true;
      traj.cap_hit = decision.cap_hit;
      break;
    }
  }
  traj.terminal = tracker.last();
  return traj;
}

std::vector<std::optional<std::array<Matrix, 2>>> variance_path(std::span<const BatchOlsFit> fits,
                                                                const SigmaMode& mode, std::int64_t n) {
  std::vector<std::optional<std::array<Matrix, 2>>> path;
  if (fits.empty()) return path;
  VarianceTracker tracker(fits.front().dim(), mode, n);
  for (const auto& f : fits) {
    tracker.add(f);
    path.push_back(tracker.current());
  }
  return path;
}

std::vector<StopDecision> replay_stop_trace(std::span<const BatchOlsFit> fits, const SigmaMode& mode,
                                            std::int64_t n, const StoppingRuleSpec& rule) {
  std::vector<StopDecision> trace;
  if (fits.empty()) return trace;
  VarianceTracker tracker(fits.front().dim(), mode, n);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    tracker.add(fits[i]);
    trace.push_back(evaluate(rule, static_cast<std::int64_t>(i + 1), tracker.snapshot()));
  }
  return trace;
}

}  // namespace banditstop
