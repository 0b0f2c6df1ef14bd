#include "banditstop/bounds.hpp"

#include <cmath>

#include "banditstop/errors.hpp"

namespace banditstop {

double BoundConstants::k_prime() const { return std::pow(2.0 * L * std::sqrt(K), 1.0 + lambda) * M; }

double BoundConstants::k_double_prime() const {
  return k_prime() / (static_cast<double>(n) * p_floor * p_floor);
}

void BoundConstants::validate() const {
  if (!(L > 0.0)) throw ConfigError("bounds: L must be positive");
  if (!(lambda > 0.0)) throw ConfigError("bounds: lambda must be positive");
  if (!(M > 0.0)) throw ConfigError("bounds: M must be positive");
  if (d < 1) throw ConfigError("bounds: d must be >= 1");
  if (!(sigma >= 0.0)) throw ConfigError("bounds: sigma must be >= 0");
  if (!(delta > 0.0) || !(delta < 1.0)) throw ConfigError("bounds: delta must lie in (0, 1)");
  if (!(K > 0.0)) throw ConfigError("bounds: K must be positive");
  if (!(c >= 0.0)) throw ConfigError("bounds: c must be >= 0");
  if (n < 1) throw ConfigError("bounds: n must be >= 1");
  if (!(p_floor > 0.0) || p_floor > 0.5) throw ConfigError("bounds: p must lie in (0, 1/2]");
}

double euclidean_bound(double sup_bound, int d) { return std::sqrt(static_cast<double>(d)) * sup_bound; }

double tail_radius(std::int64_t t, double p_t, const BoundConstants& consts, Batching batching) {
  if (t < 1) throw DomainError("tail_radius: t must be >= 1");
  if (!(p_t > 0.0)) throw DomainError("tail_radius: p_t must be positive");
  double denom = static_cast<double>(t) * p_t * p_t;
  if (batching == Batching::Batched) denom *= static_cast<double>(consts.n);
  return std::sqrt(consts.K / denom);
}

double regret_bound_from_radius(double radius, const BoundConstants& consts) {
  if (radius < 0.0) throw DomainError("regret_bound_from_radius: radius must be >= 0");
  return std::pow(2.0 * radius * consts.L, 1.0 + consts.lambda) * consts.M;
}

double regret_bound_time(std::int64_t t, const BoundConstants& consts, Batching batching) {
  return regret_bound_from_radius(tail_radius(t, consts.p_floor, consts, batching), consts);
}

double chebyshev_radius(int d, double v_norm, double delta) {
  if (!(delta > 0.0) || delta > 1.0) throw DomainError("chebyshev_radius: delta must lie in (0, 1]");
  if (v_norm < 0.0) throw DomainError("chebyshev_radius: variance norm must be >= 0");
  if (d < 1) throw DomainError("chebyshev_radius: d must be >= 1");
  return std::sqrt(static_cast<double>(d) * v_norm / delta);
}

double regret_bound_from_variance(double k, const BoundConstants& consts) {
  if (k < 0.0) throw DomainError("regret_bound_from_variance: k must be >= 0");
  return regret_bound_from_radius(chebyshev_radius(consts.d, k, consts.delta), consts);
}

CostAdjustedRegret cost_adjusted_regret(double bound, std::int64_t t, const BoundConstants& consts, CostMode mode,
                                        double threshold) {
  if (t < 1) throw DomainError("cost_adjusted_regret: t must be >= 1");
  CostAdjustedRegret out;
  out.mode = mode;
  out.cost_term = consts.c * static_cast<double>(consts.n) * static_cast<double>(t);
  if (mode == CostMode::Additive) {
    out.bound_term = bound;
    out.value = bound + out.cost_term;
    return out;
  }
  if (bound > threshold) {
    out.infinite = true;
    out.bound_term = bound;
    return out;
  }
  out.value = out.cost_term;
  return out;
}

}  // namespace banditstop
