#include "banditstop/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "banditstop/errors.hpp"

namespace banditstop {

namespace {

// Symmetric square root with negative eigenvalues clamped; handles the
// zero-noise case where the covariance is exactly 0.
Matrix psd_sqrt(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

std::size_t nearest_rank(double q, std::size_t n) {
  // Guard against q*n landing a hair above an integer through rounding.
  const double raw = std::ceil(q * static_cast<double>(n) - 1e-9);
  const auto r = static_cast<std::int64_t>(raw);
  return static_cast<std::size_t>(std::clamp<std::int64_t>(r, 1, static_cast<std::int64_t>(n)));
}

ConditionalSamples shortcut(const StoppedExperiment& stopped, const ConditionalSamplerConfig& cfg, Rng& rng) {
  const auto& est = stopped.terminal;
  const int d = static_cast<int>(est.arm(0).beta.size());
  std::array<Matrix, 2> root{psd_sqrt(est.estimator_covariance(0)), psd_sqrt(est.estimator_covariance(1))};
  ConditionalSamples out;
  out.samples.reserve(cfg.n_samples);
  Vector z(d);
  for (std::size_t k = 0; k < cfg.n_samples; ++k) {
    BetaPair pair;
    for (int a = 0; a < 2; ++a) {
      for (int j = 0; j < d; ++j) z[j] = rng.normal();
      Vector draw = est.arm(a).beta + root[static_cast<std::size_t>(a)] * z;
      (a == 0 ? pair.beta0 : pair.beta1) = std::move(draw);
    }
    out.samples.push_back(std::move(pair));
  }
  out.attempts = cfg.n_samples;
  out.acceptance_rate = 1.0;
  return out;
}

ConditionalSamples rejection(const StoppedExperiment& stopped, const SimulationSetup& setup,
                             const StoppingRuleSpec& rule, const ConditionalSamplerConfig& cfg, Rng& rng) {
  const auto& est = stopped.terminal;
  SimulationSetup plug_in = setup;
  plug_in.model.beta0 = est.arm(0).beta;
  plug_in.model.beta1 = est.arm(1).beta;
  if (const auto* known = std::get_if<KnownSigma>(&setup.sigma_mode)) {
    plug_in.model.sigma0 = known->sigma;
    plug_in.model.sigma1 = known->sigma;
  } else {
    plug_in.model.sigma0 = std::sqrt(est.arm(0).noise_variance);
    plug_in.model.sigma1 = std::sqrt(est.arm(1).noise_variance);
  }

  TrajectoryOptions options;
  options.horizon = stopped.stop_time;

  ConditionalSamples out;
  out.samples.reserve(cfg.n_samples);
  std::uint64_t attempt = 0;
  while (out.samples.size() < cfg.n_samples && attempt < cfg.max_attempts) {
    Rng stream = rng.substream(attempt);
    ++attempt;
    const Trajectory traj = simulate_trajectory(plug_in, rule, stream, options);
    if (!traj.stopped || traj.stop_time != stopped.stop_time || !traj.terminal) continue;
    out.samples.push_back(BetaPair{traj.terminal->arm(0).beta, traj.terminal->arm(1).beta});
  }
  out.attempts = attempt;
  if (out.samples.empty()) {
    throw InfeasibleConditioning(attempt, "rejection sampler accepted no trajectory stopping at T=" +
                                              std::to_string(stopped.stop_time) + " in " +
                                              std::to_string(attempt) + " attempts");
  }
  out.acceptance_rate = static_cast<double>(out.samples.size()) / static_cast<double>(attempt);
  return out;
}

std::vector<Vector> arm_samples(std::span<const BetaPair> samples, int arm) {
  std::vector<Vector> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.arm(arm));
  return out;
}

}  // namespace

void ConditionalSamplerConfig::validate() const {
  if (n_samples < 100) throw ConfigError("inference: n_samples must be >= 100");
  if (max_attempts < n_samples) throw ConfigError("inference: max_attempts must be >= n_samples");
  if (!(level > 0.0) || !(level < 1.0)) throw ConfigError("inference: level must lie in (0, 1)");
}

ConditionalSamples sample_conditional(const StoppedExperiment& stopped, const SimulationSetup& setup,
                                      const StoppingRuleSpec& rule, const ConditionalSamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (stopped.stop_time < 1) throw ContractError("sample_conditional: stop time must be >= 1");
  if (cfg.mode == SamplerMode::IndependenceShortcut) return shortcut(stopped, cfg, rng);
  return rejection(stopped, setup, rule, cfg, rng);
}

std::vector<Interval> bootstrap_interval(std::span<const Vector> samples, double level) {
  if (samples.size() < 100) throw ContractError("bootstrap_interval: need at least 100 samples");
  if (!(level > 0.0) || !(level < 1.0)) throw ContractError("bootstrap_interval: level must lie in (0, 1)");
  const auto d = samples.front().size();
  const std::size_t n = samples.size();
  const double alpha = 1.0 - level;
  const std::size_t lo_rank = nearest_rank(alpha / 2.0, n);
  const std::size_t hi_rank = nearest_rank(1.0 - alpha / 2.0, n);

  std::vector<Interval> out(static_cast<std::size_t>(d));
  std::vector<double> column(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (samples[i].size() != d) throw ContractError("bootstrap_interval: ragged samples");
      column[i] = samples[i][j];
    }
    std::sort(column.begin(), column.end());
    out[static_cast<std::size_t>(j)] = Interval{column[lo_rank - 1], column[hi_rank - 1]};
  }
  return out;
}

double coordinate_level(double level, int coordinates, Multiplicity multiplicity) {
  if (multiplicity == Multiplicity::None || coordinates <= 1) return level;
  return 1.0 - (1.0 - level) / static_cast<double>(coordinates);
}

bool test_hypothesis(std::span<const BetaPair> samples, const BetaPair& hypothesis, double level,
                     Multiplicity multiplicity) {
  if (samples.empty()) throw ContractError("test_hypothesis: no samples");
  const auto d = samples.front().beta0.size();
  if (hypothesis.beta0.size() != d || hypothesis.beta1.size() != d) {
    throw ContractError("test_hypothesis: hypothesis dimension mismatch");
  }
  const double per_coord = coordinate_level(level, static_cast<int>(2 * d), multiplicity);
  for (int a = 0; a < 2; ++a) {
    const auto intervals = bootstrap_interval(arm_samples(samples, a), per_coord);
    const Vector& h = hypothesis.arm(a);
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!intervals[static_cast<std::size_t>(j)].contains(h[j])) return true;
    }
  }
  return false;
}

InferenceResult run_inference(const StoppedExperiment& stopped, const SimulationSetup& setup,
                              const StoppingRuleSpec& rule, const ConditionalSamplerConfig& cfg,
                              const std::optional<BetaPair>& hypothesis, Rng& rng) {
  const ConditionalSamples draws = sample_conditional(stopped, setup, rule, cfg, rng);
  InferenceResult result;
  const auto d = static_cast<int>(stopped.terminal.arm(0).beta.size());
  result.coordinate_level = coordinate_level(cfg.level, 2 * d, cfg.multiplicity);
  result.acceptance_rate = draws.acceptance_rate;
  result.samples_retained = draws.samples.size();
  result.attempts = draws.attempts;
  for (int a = 0; a < 2; ++a) {
    result.point[static_cast<std::size_t>(a)] = stopped.terminal.arm(a).beta;
    result.intervals[static_cast<std::size_t>(a)] =
        bootstrap_interval(arm_samples(draws.samples, a), result.coordinate_level);
  }
  if (hypothesis) {
    bool reject = false;
    for (int a = 0; a < 2; ++a) {
      const Vector& h = hypothesis->arm(a);
      if (h.size() != d) throw ContractError("run_inference: hypothesis dimension mismatch");
      for (int j = 0; j < d; ++j) {
        if (!result.intervals[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)].contains(h[j])) reject = true;
      }
    }
    result.reject = reject;
  }
  return result;
}

}  // namespace banditstop
