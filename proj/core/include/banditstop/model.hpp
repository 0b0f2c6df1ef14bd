#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "banditstop/linalg.hpp"
#include "banditstop/rng.hpp"

namespace banditstop {

// ---------------------------------------------------------------------------
// Context distribution
// ---------------------------------------------------------------------------

/// Independent Uniform[lower_i, upper_i] coordinates. lower_i == upper_i gives
/// a point mass, which is how an intercept column is expressed.
struct UniformBox {
  Vector lower;
  Vector upper;
};

/// N(mean, covariance) conditioned on the cube [-box, box]^d, drawn by
/// rejection. The effective cube is min(box, bound_L).
struct TruncatedGaussian {
  Vector mean;
  Matrix covariance;
  double box = 1.0;
};

struct ContextSpec {
  int dim = 1;
  std::variant<UniformBox, TruncatedGaussian> dist;
  /// Sup-norm bound: every sampled x has max_i |x_i| <= bound_L.
  double bound_L = 1.0;

  /// Throws ConfigError on inverted box, box outside +-bound_L, non-SPD
  /// covariance or mismatched lengths.
  void validate() const;

  /// Default family: i.i.d. Uniform[-half_width, half_width]^d.
  static ContextSpec uniform_cube(int dim, double half_width = 1.0);
};

// ---------------------------------------------------------------------------
// Reward model  y = x' beta_a + e,  e | a ~ (0, sigma_a^2),  e independent of x
// ---------------------------------------------------------------------------

enum class NoiseKind { Gaussian, BoundedUniform };

struct TrueModel {
  Vector beta0;
  Vector beta1;
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  NoiseKind noise = NoiseKind::Gaussian;

  const Vector& beta(int arm) const { return arm == 1 ? beta1 : beta0; }
  double sigma(int arm) const { return arm == 1 ? sigma1 : sigma0; }
  bool homoskedastic() const { return sigma0 == sigma1; }

  void validate(int dim) const;
};

/// Row i of the returned n x d matrix is context i.
Matrix sample_batch_contexts(const ContextSpec& spec, std::size_t n, Rng& rng);

/// Noise draw with mean zero and standard deviation sigma. The bounded
/// variant is Uniform[-sqrt(3) sigma, sqrt(3) sigma].
double draw_noise(NoiseKind kind, double sigma, Rng& rng);

Vector realize_rewards(const TrueModel& model, const Matrix& contexts,
                       std::span<const int> actions, Rng& rng);

// ---------------------------------------------------------------------------
// Empirical checks of boundedness, second-moment eigenvalue and margin.
// ---------------------------------------------------------------------------

/// Log-log least squares fit of P(|(beta1-beta0)'x| <= h) ~ M h^lambda.
struct MarginFit {
  double M = 0.0;
  double lambda = 0.0;
  int points_used = 0;
};

struct AssumptionReport {
  double L_hat = 0.0;
  double lambda_min_hat = 0.0;
  /// nullopt when the fit is impossible (beta1 == beta0, or fewer than two
  /// grid points with positive empirical mass).
  std::optional<MarginFit> margin_fit;
  /// Empirical P(|delta'x| <= h) on the supplied grid.
  std::vector<double> margin_probabilities;
  std::size_t mc_samples = 0;

  bool bounded_satisfied = false;
  bool eigen_satisfied = false;
  bool margin_satisfied = false;
};

std::vector<double> default_margin_grid();

/// `q` is the eigenvalue floor for the second-moment check (strict >).
AssumptionReport check_assumptions(const ContextSpec& spec, const TrueModel& model,
                                   std::size_t mc_samples, std::span<const double> h_grid,
                                   Rng& rng, double q = 0.0);

}  // namespace banditstop
