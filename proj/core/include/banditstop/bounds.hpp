#pragma once

#include <cstdint>

namespace banditstop {

/// Constants of the regret bounds.
///
/// `L` multiplies the estimation error inside the regret bound, so it must
/// bound the context in the norm dual to the error norm. Error radii here are
/// Euclidean, so L is the Euclidean context bound; `euclidean_bound` converts
/// a sup-norm bound.
struct BoundConstants {
  double L = 1.0;
  double lambda = 1.0;  // margin exponent
  double M = 1.0;       // margin constant
  int d = 1;
  double sigma = 1.0;
  double delta = 0.1;
  /// Tail constant: ||beta_hat_t - beta|| <= sqrt(K / (t p_t^2)) w.p. >= 1 - delta.
  double K = 1.0;
  double c = 0.0;  // unit sampling cost
  std::int64_t n = 1;
  double p_floor = 0.1;

  /// K' = (2 L sqrt(K))^(1 + lambda) M
  double k_prime() const;
  /// K'' = K' / (n p^2), the lambda = 1 batched constant.
  double k_double_prime() const;

  void validate() const;
};

double euclidean_bound(double sup_bound, int d);

enum class Batching { NonBatched, Batched };

/// sqrt(K / (t p_t^2)), or sqrt(K / (n t p_t^2)) when batched.
double tail_radius(std::int64_t t, double p_t, const BoundConstants& consts, Batching batching = Batching::Batched);

/// (2 B L)^(1 + lambda) M
double regret_bound_from_radius(double radius, const BoundConstants& consts);

/// U(t) = K' (1 / sqrt(n t p^2))^(1 + lambda) with p = consts.p_floor.
double regret_bound_time(std::int64_t t, const BoundConstants& consts, Batching batching = Batching::Batched);

/// sqrt(d ||V||_2 / delta)
double chebyshev_radius(int d, double v_norm, double delta);

/// M (2 L sqrt(d k / delta))^(1 + lambda)
double regret_bound_from_variance(double k, const BoundConstants& consts);

enum class CostMode { Additive, Threshold };

/// Cost-adjusted regret. Infinity is carried by `infinite`, never by `value`.
struct CostAdjustedRegret {
  CostMode mode = CostMode::Additive;
  bool infinite = false;
  double value = 0.0;
  double bound_term = 0.0;
  double cost_term = 0.0;
};

/// Additive: U + c n t.  Threshold(k): infinite if U > k, else c n t.
CostAdjustedRegret cost_adjusted_regret(double bound, std::int64_t t, const BoundConstants& consts, CostMode mode,
                                        double threshold = 0.0);

}  // namespace banditstop
