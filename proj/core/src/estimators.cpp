#include "banditstop/estimators.hpp"

#include <algorithm>
#include <string>

#include "banditstop/errors.hpp"

namespace banditstop {

namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix scaled_inverse(const Matrix& gram, double scale, const char* who) {
  auto llt = factor_gram(gram);
  if (!llt) throw EstimatorUnavailable(std::string(who) + ": total Gram is singular");
  return symmetrize(scale * llt->solve(Matrix::Identity(gram.rows(), gram.cols())));
}

}  // namespace

BatchOlsFit fit_batch_ols(const Matrix& contexts, std::span<const int> actions, const Vector& rewards,
                          std::int64_t batch_index) {
  const auto n = contexts.rows();
  const auto d = contexts.cols();
  if (static_cast<std::size_t>(n) != actions.size() || rewards.size() != n) {
    throw ContractError("fit_batch_ols: batch arrays disagree in length");
  }
  BatchOlsFit fit;
  fit.batch_index = batch_index;
  for (auto& arm : fit.arms) {
    arm.gram = Matrix::Zero(d, d);
    arm.moment = Vector::Zero(d);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a != 0 && a != 1) throw ContractError("fit_batch_ols: actions must be 0 or 1");
    auto& arm = fit.arms[static_cast<std::size_t>(a)];
    const auto x = contexts.row(i).transpose();
    arm.gram.noalias() += x * x.transpose();
    arm.moment.noalias() += x * rewards[i];
    arm.sum_sq_reward += rewards[i] * rewards[i];
    ++arm.count;
  }
  for (int a = 0; a < 2; ++a) {
    auto& arm = fit.arms[static_cast<std::size_t>(a)];
    auto llt = factor_gram(arm.gram);
    if (!llt) continue;
    Vector beta = llt->solve(arm.moment);
    beta += llt->solve(arm.moment - arm.gram * beta);  // one refinement step
    double rss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (actions[static_cast<std::size_t>(i)] != a) continue;
      const double r = rewards[i] - contexts.row(i).dot(beta);
      rss += r * r;
    }
    arm.beta_hat = std::move(beta);
    arm.rss = rss;
  }
  return fit;
}

Matrix IvwEstimate::estimator_covariance(int a) const {
  return arm(a).sigma_hat / static_cast<double>(n);
}

IvwAccumulator::IvwAccumulator(int dim) : dim_(dim) {
  if (dim < 1) throw ContractError("IvwAccumulator: dim must be >= 1");
  for (auto& arm : arms_) {
    arm.gram_sum = Matrix::Zero(dim, dim);
    arm.centered_rhs = Vector::Zero(dim);
    arm.raw_gram = Matrix::Zero(dim, dim);
    arm.raw_moment = Vector::Zero(dim);
  }
}

void IvwAccumulator::add(const BatchOlsFit& fit) {
  if (fit.dim() != dim_) throw ContractError("IvwAccumulator: fit dimension mismatch");
  for (int a = 0; a < 2; ++a) {
    const auto& f = fit.arm(a);
    auto& acc = arms_[static_cast<std::size_t>(a)];
    acc.raw_gram += f.gram;
    acc.raw_moment += f.moment;
    acc.raw_sum_sq += f.sum_sq_reward;
    acc.raw_count += f.count;
    if (!f.beta_hat) continue;
    if (!acc.reference) acc.reference = *f.beta_hat;
    acc.gram_sum += f.gram;
    acc.centered_rhs.noalias() += f.gram * (*f.beta_hat - *acc.reference);
    ++acc.used;
  }
  ++batches_;
}

bool IvwAccumulator::available(int arm) const {
  const auto& acc = arms_[static_cast<std::size_t>(arm)];
  return acc.used > 0 && !is_singular_gram(acc.gram_sum);
}

Vector IvwAccumulator::beta(int arm) const {
  const auto& acc = arms_[static_cast<std::size_t>(arm)];
  if (acc.used == 0) throw EstimatorUnavailable("ivw: arm " + std::to_string(arm) + " has no nonsingular batch");
  auto llt = factor_gram(acc.gram_sum);
  if (!llt) throw EstimatorUnavailable("ivw: total Gram of arm " + std::to_string(arm) + " is singular");
  return *acc.reference + llt->solve(acc.centered_rhs);
}

double IvwAccumulator::residual_noise_variance(int arm, const Vector& b) const {
  const auto& acc = arms_[static_cast<std::size_t>(arm)];
  if (acc.raw_count < dim_ + 1) {
    throw EstimatorUnavailable("residual variance: arm " + std::to_string(arm) + " has fewer than d+1 observations");
  }
  const double rss = acc.raw_sum_sq - 2.0 * b.dot(acc.raw_moment) + b.dot(acc.raw_gram * b);
  return std::max(rss, 0.0) / static_cast<double>(acc.raw_count);
}

IvwEstimate IvwAccumulator::estimate(const SigmaMode& mode, std::int64_t n) const {
  if (n < 1) throw ContractError("ivw: batch size must be >= 1");
  IvwEstimate est;
  est.batches = batches_;
  est.n = n;
  est.sigma_mode = mode;
  for (int a = 0; a < 2; ++a) {
    auto& out = est.arms[static_cast<std::size_t>(a)];
    out.beta = beta(a);
    out.batches_used = arms_[static_cast<std::size_t>(a)].used;
    if (const auto* known = std::get_if<KnownSigma>(&mode)) {
      out.noise_variance = known->sigma * known->sigma;
    } else {
      out.noise_variance = residual_noise_variance(a, out.beta);
    }
    out.sigma_hat = scaled_inverse(weighted_gram(a), static_cast<double>(n) * out.noise_variance, "ivw");
  }
  return est;
}

IvwEstimate ivw_combine(std::span<const BatchOlsFit> fits, const SigmaMode& mode, std::int64_t n) {
  if (fits.empty()) throw EstimatorUnavailable("ivw_combine: no batches");
  IvwAccumulator acc(fits.front().dim());
  for (const auto& f : fits) acc.add(f);
  return acc.estimate(mode, n);
}

std::array<Matrix, 2> variance_known_sigma(std::span<const BatchOlsFit> fits, double sigma, std::int64_t n) {
  if (fits.empty()) throw EstimatorUnavailable("variance_known_sigma: no batches");
  IvwAccumulator acc(fits.front().dim());
  for (const auto& f : fits) acc.add(f);
  std::array<Matrix, 2> out;
  for (int a = 0; a < 2; ++a) {
    out[static_cast<std::size_t>(a)] =
        scaled_inverse(acc.weighted_gram(a), static_cast<double>(n) * sigma * sigma, "variance_known_sigma");
  }
  return out;
}

std::array<Matrix, 2> variance_residual(std::span<const BatchOlsFit> fits, std::span<const BatchData> data,
                                        const IvwEstimate& ivw, std::int64_t n) {
  if (fits.empty()) throw EstimatorUnavailable("variance_residual: no batches");
  const int d = fits.front().dim();
  IvwAccumulator acc(d);
  for (const auto& f : fits) acc.add(f);

  std::array<double, 2> rss{0.0, 0.0};
  std::array<std::int64_t, 2> count{0, 0};
  for (const auto& batch : data) {
    if (batch.contexts.cols() != d) throw ContractError("variance_residual: context dimension mismatch");
    for (Eigen::Index i = 0; i < batch.contexts.rows(); ++i) {
      const int a = batch.actions[static_cast<std::size_t>(i)];
      const double r = batch.rewards[i] - batch.contexts.row(i).dot(ivw.arm(a).beta);
      rss[static_cast<std::size_t>(a)] += r * r;
      ++count[static_cast<std::size_t>(a)];
    }
  }
  std::array<Matrix, 2> out;
  for (int a = 0; a < 2; ++a) {
    const auto k = count[static_cast<std::size_t>(a)];
    if (k < d + 1) {
      throw EstimatorUnavailable("variance_residual: arm " + std::to_string(a) + " has fewer than d+1 observations");
    }
    const double s2 = rss[static_cast<std::size_t>(a)] / static_cast<double>(k);
    out[static_cast<std::size_t>(a)] =
        scaled_inverse(acc.weighted_gram(a), static_cast<double>(n) * s2, "variance_residual");
  }
  return out;
}

SufficientStats sufficient_statistics(std::span<const BatchOlsFit> fits) {
  SufficientStats stats;
  stats.reserve(fits.size());
  for (const auto& f : fits) {
    stats.push_back(SufficientTuple{f.arm(1).beta_hat, f.arm(1).gram, f.arm(0).beta_hat, f.arm(0).gram});
  }
  return stats;
}

Vector recovered_moment(const SufficientTuple& tuple, int arm) {
  const auto& beta = arm == 1 ? tuple.beta1 : tuple.beta0;
  const auto& gram = arm == 1 ? tuple.gram1 : tuple.gram0;
  if (!beta) return Vector::Zero(gram.rows());
  return gram * *beta;
}

PolicyState policy_state_from(const SufficientStats& stats, int dim) {
  PolicyState state = PolicyState::empty(dim);
  for (const auto& tuple : stats) {
    state.arms[1].gram += tuple.gram1;
    state.arms[0].gram += tuple.gram0;
    state.arms[1].moment += recovered_moment(tuple, 1);
    state.arms[0].moment += recovered_moment(tuple, 0);
    ++state.t;
  }
  return state;
}

}  // namespace banditstop
