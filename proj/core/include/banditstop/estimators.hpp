#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "banditstop/linalg.hpp"
#include "banditstop/policies.hpp"

namespace banditstop {

/// One arm's share of one batch.
///
/// `gram`, `moment`, `sum_sq_reward` and `count` are the raw per-batch sums;
/// `beta_hat` solves gram * beta = moment and is absent iff gram is singular.
struct ArmFit {
  std::optional<Vector> beta_hat;
  Matrix gram;
  Vector moment;
  std::int64_t count = 0;
  std::optional<double> rss;
  double sum_sq_reward = 0.0;
};

/// Batched OLS (BOLS) fit of a single batch, both arms.
struct BatchOlsFit {
  std::array<ArmFit, 2> arms;
  std::int64_t batch_index = 1;

  const ArmFit& arm(int a) const { return arms[static_cast<std::size_t>(a)]; }
  int dim() const { return static_cast<int>(arms[0].moment.size()); }
};

/// Raw per-unit data of one batch.
struct BatchData {
  Matrix contexts;
  std::vector<int> actions;
  Vector rewards;
};

BatchOlsFit fit_batch_ols(const Matrix& contexts, std::span<const int> actions, const Vector& rewards,
                          std::int64_t batch_index = 1);

struct KnownSigma {
  double sigma = 1.0;
};
struct ResidualSigma {};
using SigmaMode = std::variant<KnownSigma, ResidualSigma>;

struct ArmIvw {
  Vector beta;
  /// n * (sum_j G_j)^-1 * s^2, with s^2 the known or residual noise variance.
  Matrix sigma_hat;
  /// s^2 used above.
  double noise_variance = 0.0;
  std::int64_t batches_used = 0;
};

/// Inverse-variance weighted combination of per-batch OLS estimates.
///
/// `sigma_hat` follows the n-scaled convention n (sum G)^-1 s^2, which is the
/// covariance of sqrt(n) (beta_ivw - beta). Sampling and interval code must
/// use `estimator_covariance`, which removes the factor n.
struct IvwEstimate {
  std::array<ArmIvw, 2> arms;
  std::int64_t batches = 0;
  std::int64_t n = 0;
  SigmaMode sigma_mode = KnownSigma{};

  const ArmIvw& arm(int a) const { return arms[static_cast<std::size_t>(a)]; }
  Matrix estimator_covariance(int a) const;
};

/// Running IVW sums. Adding fits one at a time and calling `estimate` gives
/// the same bits as `ivw_combine` over the same list.
///
/// The weighted mean is computed around the first usable batch estimate r:
///   beta_ivw = r + (sum G_j)^-1 sum G_j (beta_j - r)
/// so identical batch estimates reproduce exactly.
class IvwAccumulator {
 public:
  explicit IvwAccumulator(int dim);

  void add(const BatchOlsFit& fit);

  std::int64_t batches() const noexcept { return batches_; }
  int dim() const noexcept { return dim_; }

  /// Total weighted Gram nonsingular.
  bool available(int arm) const;
  /// Throws EstimatorUnavailable.
  Vector beta(int arm) const;
  const Matrix& weighted_gram(int arm) const { return arms_[static_cast<std::size_t>(arm)].gram_sum; }

  /// sum over all arm units of (y - x'b)^2 / count, from raw moments.
  /// Throws EstimatorUnavailable when count < d + 1.
  double residual_noise_variance(int arm, const Vector& b) const;

  IvwEstimate estimate(const SigmaMode& mode, std::int64_t n) const;

 private:
  struct Arm {
    Matrix gram_sum;
    Vector centered_rhs;
    std::optional<Vector> reference;
    std::int64_t used = 0;
    Matrix raw_gram;
    Vector raw_moment;
    double raw_sum_sq = 0.0;
    std::int64_t raw_count = 0;
  };

  int dim_;
  std::int64_t batches_ = 0;
  std::array<Arm, 2> arms_;
};

/// Throws EstimatorUnavailable when an arm has no usable batch.
IvwEstimate ivw_combine(std::span<const BatchOlsFit> fits, const SigmaMode& mode, std::int64_t n);

/// Per arm n * (sum_j G_{j,a})^-1 * sigma^2.
std::array<Matrix, 2> variance_known_sigma(std::span<const BatchOlsFit> fits, double sigma, std::int64_t n);

/// Per arm n * (sum_j G_{j,a})^-1 * mean squared residual against the arm's
/// IVW estimate, computed directly from per-unit data.
std::array<Matrix, 2> variance_residual(std::span<const BatchOlsFit> fits, std::span<const BatchData> data,
                                        const IvwEstimate& ivw, std::int64_t n);

/// (beta_hat_{j,1}, G_{j,1}, beta_hat_{j,0}, G_{j,0}) for one batch.
struct SufficientTuple {
  std::optional<Vector> beta1;
  Matrix gram1;
  std::optional<Vector> beta0;
  Matrix gram0;
};
using SufficientStats = std::vector<SufficientTuple>;

SufficientStats sufficient_statistics(std::span<const BatchOlsFit> fits);

/// Per-batch moment sum_i 1{A=a} x y recovered as G * beta_hat.
Vector recovered_moment(const SufficientTuple& tuple, int arm);

/// Cumulative policy state rebuilt from sufficient statistics alone. Batches
/// whose arm estimate is absent contribute their Gram but no moment.
PolicyState policy_state_from(const SufficientStats& stats, int dim);

}  // namespace banditstop
