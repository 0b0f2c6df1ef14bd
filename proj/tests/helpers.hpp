#pragma once

#include <cstdint>

#include "banditstop/model.hpp"
#include "banditstop/policies.hpp"
#include "banditstop/stopping.hpp"
#include "banditstop/trajectory.hpp"

namespace testing_support {

using namespace banditstop;

// x = (1, u), u ~ U[-1, 1]. An intercept keeps the arm-1 second moment away
// from a multiple of the identity.
inline ContextSpec intercept_context() {
  ContextSpec s;
  s.dim = 2;
  s.dist = UniformBox{(Vector(2) << 1.0, -1.0).finished(), (Vector(2) << 1.0, 1.0).finished()};
  s.bound_L = 1.0;
  return s;
}

// Delta = (0.2, 1): arm 1 is better for u > -0.2.
inline TrueModel intercept_model(double sigma = 1.0) {
  return TrueModel{Vector::Zero(2), (Vector(2) << 0.2, 1.0).finished(), sigma, sigma, NoiseKind::Gaussian};
}

inline SimulationSetup eps_greedy_setup(std::int64_t n, double sigma = 1.0) {
  SimulationSetup s;
  s.context = intercept_context();
  s.model = intercept_model(sigma);
  s.policy = EpsGreedy{Schedule::constant(0.2)};
  s.clip = ClipSchedule{Schedule::constant(0.1)};
  s.batch_size = n;
  s.sigma_mode = KnownSigma{sigma};
  return s;
}

// Runs exactly `horizon` batches.
inline StoppingRuleSpec never_stop(std::int64_t horizon) {
  return StoppingRuleSpec{OnlineThreshold{1e-300}, horizon + 1};
}

// E[P(A = 1 | x) x x'] under the limiting eps-greedy policy, by Monte Carlo.
inline Matrix limiting_arm1_moment(const ContextSpec& ctx, const TrueModel& model, double greedy_prob,
                                   std::size_t draws, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix X = sample_batch_contexts(ctx, draws, rng);
  const Vector delta = model.beta1 - model.beta0;
  Matrix acc = Matrix::Zero(ctx.dim, ctx.dim);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Vector x = X.row(i).transpose();
    const double p1 = x.dot(delta) > 0.0 ? greedy_prob : 1.0 - greedy_prob;
    acc += p1 * x * x.transpose();
  }
  return acc / static_cast<double>(draws);
}

}  // namespace testing_support
