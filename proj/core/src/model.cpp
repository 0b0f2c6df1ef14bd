#include "banditstop/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "banditstop/errors.hpp"

namespace banditstop {

namespace {

constexpr std::size_t kMaxRejectionFactor = 10000;

void require_length(const Vector& v, int dim, const char* what) {
  if (v.size() != dim) {
    throw ConfigError(std::string(what) + ": expected length " + std::to_string(dim) + ", got " +
                      std::to_string(v.size()));
  }
}

}  // namespace

void ContextSpec::validate() const {
  if (dim < 1) throw ConfigError("context: dim must be >= 1");
  if (!(bound_L > 0.0) || !std::isfinite(bound_L)) throw ConfigError("context: bound_L must be positive");
  if (const auto* box = std::get_if<UniformBox>(&dist)) {
    require_length(box->lower, dim, "context.lower");
    require_length(box->upper, dim, "context.upper");
    for (int i = 0; i < dim; ++i) {
      if (box->lower[i] > box->upper[i]) throw ConfigError("context: inverted box on coordinate " + std::to_string(i));
      if (std::abs(box->lower[i]) > bound_L || std::abs(box->upper[i]) > bound_L) {
        throw ConfigError("context: box exceeds bound_L on coordinate " + std::to_string(i));
      }
    }
  } else {
    const auto& g = std::get<TruncatedGaussian>(dist);
    require_length(g.mean, dim, "context.mean");
    if (g.covariance.rows() != dim || g.covariance.cols() != dim) {
      throw ConfigError("context: covariance must be dim x dim");
    }
    if (!is_symmetric(g.covariance)) throw ConfigError("context: covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.covariance, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 0.0) throw ConfigError("context: covariance is not positive definite");
    if (!(g.box > 0.0)) throw ConfigError("context: truncation box must be positive");
  }
}

ContextSpec ContextSpec::uniform_cube(int dim, double half_width) {
  ContextSpec spec;
  spec.dim = dim;
  spec.dist = UniformBox{Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width)};
  spec.bound_L = half_width;
  return spec;
}

void TrueModel::validate(int dim) const {
  require_length(beta0, dim, "model.beta0");
  require_length(beta1, dim, "model.beta1");
  if (!(sigma0 >= 0.0) || !(sigma1 >= 0.0)) throw ConfigError("model: noise sd must be >= 0");
}

Matrix sample_batch_contexts(const ContextSpec& spec, std::size_t n, Rng& rng) {
  if (n < 1) throw ContractError("sample_batch_contexts: n must be >= 1");
  spec.validate();
  const int d = spec.dim;
  Matrix X(static_cast<Eigen::Index>(n), d);

  if (const auto* box = std::get_if<UniformBox>(&spec.dist)) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (int j = 0; j < d; ++j) X(i, j) = rng.uniform(box->lower[j], box->upper[j]);
    }
    return X;
  }

  const auto& g = std::get<TruncatedGaussian>(spec.dist);
  const double cube = std::min(g.box, spec.bound_L);
  const Matrix chol = Eigen::LLT<Matrix>(g.covariance).matrixL();
  Vector z(d);
  std::size_t attempts = 0;
  const std::size_t budget = kMaxRejectionFactor * n;
  for (Eigen::Index i = 0; i < X.rows();) {
    if (++attempts > budget) {
      throw ConfigError("context: truncation region has negligible mass under the Gaussian");
    }
    for (int j = 0; j < d; ++j) z[j] = rng.normal();
    Vector x = g.mean + chol * z;
    if (x.cwiseAbs().maxCoeff() <= cube) {
      X.row(i) = x.transpose();
      ++i;
    }
  }
  return X;
}

double draw_noise(NoiseKind kind, double sigma, Rng& rng) {
  if (sigma == 0.0) return 0.0;
  if (kind == NoiseKind::Gaussian) return sigma * rng.normal();
  const double half = std::sqrt(3.0) * sigma;
  return rng.uniform(-half, half);
}

Vector realize_rewards(const TrueModel& model, const Matrix& contexts, std::span<const int> actions,
                       Rng& rng) {
  const auto n = contexts.rows();
  if (static_cast<std::size_t>(n) != actions.size()) {
    throw ContractError("realize_rewards: contexts and actions differ in length");
  }
  if (model.beta0.size() != contexts.cols() || model.beta1.size() != contexts.cols()) {
    throw ContractError("realize_rewards: beta length does not match context dimension");
  }
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a != 0 && a != 1) throw ContractError("realize_rewards: actions must be 0 or 1");
    y[i] = contexts.row(i).dot(model.beta(a)) + draw_noise(model.noise, model.sigma(a), rng);
  }
  return y;
}

std::vector<double> default_margin_grid() {
  std::vector<double> grid;
  for (int j = 0; j <= 6; ++j) grid.push_back(0.01 * std::ldexp(1.0, j));
  return grid;
}

AssumptionReport check_assumptions(const ContextSpec& spec, const TrueModel& model, std::size_t mc_samples,
                                   std::span<const double> h_grid, Rng& rng, double q) {
  if (mc_samples < 1000) throw ContractError("check_assumptions: mc_samples must be >= 1000");
  for (std::size_t i = 0; i < h_grid.size(); ++i) {
    if (!(h_grid[i] > 0.0)) throw ContractError("check_assumptions: h grid must be positive");
    if (i > 0 && h_grid[i] < h_grid[i - 1]) throw ContractError("check_assumptions: h grid must be ascending");
  }
  spec.validate();
  model.validate(spec.dim);

  const Matrix X = sample_batch_contexts(spec, mc_samples, rng);
  const Vector delta = model.beta1 - model.beta0;

  AssumptionReport report;
  report.mc_samples = mc_samples;
  report.L_hat = X.cwiseAbs().maxCoeff();
  report.bounded_satisfied = report.L_hat <= spec.bound_L;

  const Matrix second_moment = (X.transpose() * X) / static_cast<double>(mc_samples);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(second_moment, Eigen::EigenvaluesOnly);
  report.lambda_min_hat = eig.eigenvalues().minCoeff();
  report.eigen_satisfied = report.lambda_min_hat > std::max(q, 1e-12);

  const Vector margins = (X * delta).cwiseAbs();
  report.margin_probabilities.reserve(h_grid.size());
  for (double h : h_grid) {
    const auto hits = (margins.array() <= h).count();
    report.margin_probabilities.push_back(static_cast<double>(hits) / static_cast<double>(mc_samples));
  }

  if (delta.cwiseAbs().maxCoeff() == 0.0) return report;

  // log P = log M + lambda log h
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < h_grid.size(); ++i) {
    const double p = report.margin_probabilities[i];
    if (p <= 0.0) continue;
    const double lx = std::log(h_grid[i]);
    const double ly = std::log(p);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++used;
  }
  if (used < 2) return report;
  const double denom = used * sxx - sx * sx;
  if (denom <= 0.0) return report;
  const double slope = (used * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / used;
  report.margin_fit = MarginFit{std::exp(intercept), slope, used};
  report.margin_satisfied = slope > 0.0;
  return report;
}

}  // namespace banditstop
