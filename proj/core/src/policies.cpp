#include "banditstop/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "banditstop/errors.hpp"

namespace banditstop {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double compare(double lhs, double rhs, double high, double low) {
  if (lhs > rhs) return high;
  if (lhs < rhs) return low;
  return 0.5;
}

void check_schedule(const Schedule& s, double lo, bool lo_open, double hi, std::int64_t through, const char* what) {
  if (!s.nonincreasing_through(through)) throw ConfigError(std::string(what) + ": schedule must be non-increasing");
  const double first = s.at(1);
  const double last = s.limit();
  for (double v : {first, last}) {
    const bool lo_ok = lo_open ? v > lo : v >= lo;
    if (!lo_ok || v > hi) throw ConfigError(std::string(what) + ": schedule value out of range");
  }
}

}  // namespace

void validate_policy(const PolicyKind& kind, std::int64_t check_through) {
  std::visit(overloaded{
                 [](const UniformRandom&) {},
                 [&](const EpsGreedy& p) { check_schedule(p.eps, 0.0, true, 1.0, check_through, "eps_greedy"); },
                 [&](const Ucb& p) {
                   check_schedule(p.c, 0.0, false, std::numeric_limits<double>::max(), check_through, "ucb");
                 },
                 [](const Thompson& p) {
                   if (!(p.sigma_prior > 0.0)) throw ConfigError("thompson: sigma_prior must be positive");
                 },
             },
             kind);
}

PolicyState PolicyState::empty(int dim) {
  if (dim < 1) throw ContractError("PolicyState: dim must be >= 1");
  PolicyState s;
  for (auto& arm : s.arms) {
    arm.gram = Matrix::Zero(dim, dim);
    arm.moment = Vector::Zero(dim);
    arm.count = 0;
  }
  return s;
}

std::optional<Vector> PolicyState::ols(int arm) const {
  const auto& stats = arms[static_cast<std::size_t>(arm)];
  auto llt = factor_gram(stats.gram);
  if (!llt) return std::nullopt;
  return Vector(llt->solve(stats.moment));
}

void ClipSchedule::validate(std::int64_t check_through) const {
  check_schedule(levels, 0.0, true, 0.5, check_through, "clip");
}

FrozenPolicy::FrozenPolicy(const PolicyKind& kind, const PolicyState& state)
    : kind_(kind), batch_(state.t + 1) {
  if (std::holds_alternative<UniformRandom>(kind_)) return;
  for (int a = 0; a < 2; ++a) {
    const auto& stats = state.arms[static_cast<std::size_t>(a)];
    chol_[static_cast<std::size_t>(a)] = factor_gram(stats.gram);
    if (!chol_[static_cast<std::size_t>(a)]) return;
    beta_[static_cast<std::size_t>(a)] = chol_[static_cast<std::size_t>(a)]->solve(stats.moment);
  }
  degenerate_ = false;
  if (const auto* eps = std::get_if<EpsGreedy>(&kind_)) schedule_value_ = eps->eps.at(batch_);
  if (const auto* ucb = std::get_if<Ucb>(&kind_)) schedule_value_ = ucb->c.at(batch_);
}

double FrozenPolicy::prob_arm1(const Eigen::Ref<const Vector>& x) const {
  if (degenerate_) return 0.5;
  const double mean1 = x.dot(beta_[1]);
  const double mean0 = x.dot(beta_[0]);
  return std::visit(overloaded{
                        [](const UniformRandom&) { return 0.5; },
                        [&](const EpsGreedy&) {
                          return compare(mean1, mean0, 1.0 - schedule_value_ / 2.0, schedule_value_ / 2.0);
                        },
                        [&](const Ucb&) {
                          const double w1 = chol_[1]->matrixL().solve(x).norm();
                          const double w0 = chol_[0]->matrixL().solve(x).norm();
                          return compare(mean1 + schedule_value_ * w1, mean0 + schedule_value_ * w0, 1.0, 0.0);
                        },
                        [&](const Thompson& t) {
                          const double diff = mean1 - mean0;
                          const double var = t.sigma_prior * t.sigma_prior *
                                             (chol_[1]->matrixL().solve(x).squaredNorm() +
                                              chol_[0]->matrixL().solve(x).squaredNorm());
                          if (var <= 0.0) return compare(diff, 0.0, 1.0, 0.0);
                          return standard_normal_cdf(diff / std::sqrt(var));
                        },
                    },
                    kind_);
}

double action_probability(const PolicyKind& kind, const PolicyState& state, const Vector& x) {
  if (x.size() != state.dim()) throw ContractError("action_probability: context dimension mismatch");
  return FrozenPolicy(kind, state).prob_arm1(x);
}

double clip(double prob, double p_t) {
  if (!(p_t > 0.0) || p_t > 0.5) throw ConfigError("clip: level must lie in (0, 1/2]");
  return std::min(std::max(prob, p_t), 1.0 - p_t);
}

BatchActions select_actions(const PolicyKind& kind, const PolicyState& state, const Matrix& contexts,
                            const ClipSchedule& clip_schedule, Rng& rng) {
  if (contexts.cols() != state.dim()) throw ContractError("select_actions: context dimension mismatch");
  const FrozenPolicy policy(kind, state);
  const auto n = static_cast<std::size_t>(contexts.rows());
  BatchActions out;
  out.clip_level = clip_schedule.at(policy.batch_index());
  out.actions.resize(n);
  out.pre_clip.resize(n);
  out.post_clip.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pre = policy.prob_arm1(contexts.row(static_cast<Eigen::Index>(i)).transpose());
    const double post = clip(pre, out.clip_level);
    out.pre_clip[i] = pre;
    out.post_clip[i] = post;
    out.actions[i] = rng.bernoulli(post) ? 1 : 0;
  }
  return out;
}

void accumulate_batch(PolicyState& state, const Matrix& contexts, std::span<const int> actions,
                      const Vector& rewards) {
  const auto n = contexts.rows();
  if (contexts.cols() != state.dim() || static_cast<std::size_t>(n) != actions.size() || rewards.size() != n) {
    throw ContractError("update_state: batch arrays disagree in shape");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a != 0 && a != 1) throw ContractError("update_state: actions must be 0 or 1");
    auto& arm = state.arms[static_cast<std::size_t>(a)];
    const auto x = contexts.row(i).transpose();
    arm.gram.noalias() += x * x.transpose();
    arm.moment.noalias() += x * rewards[i];
    ++arm.count;
  }
  ++state.t;
}

PolicyState update_state(PolicyState state, const Matrix& contexts, std::span<const int> actions,
                         const Vector& rewards) {
  accumulate_batch(state, contexts, actions, rewards);
  return state;
}

double thompson_sampled_probability(const PolicyState& state, const Vector& x, double sigma_prior,
                                    std::size_t draws, Rng& rng) {
  std::array<Vector, 2> beta;
  std::array<Matrix, 2> lower;
  for (int a = 0; a < 2; ++a) {
    auto llt = factor_gram(state.arms[static_cast<std::size_t>(a)].gram);
    if (!llt) return 0.5;
    beta[static_cast<std::size_t>(a)] = llt->solve(state.arms[static_cast<std::size_t>(a)].moment);
    // Cov = sigma^2 G^-1 = sigma^2 L^-T L^-1, so a draw is beta + sigma L^-T z.
    lower[static_cast<std::size_t>(a)] = llt->matrixL();
  }
  const int d = state.dim();
  Vector z(d);
  std::size_t wins = 0;
  for (std::size_t k = 0; k < draws; ++k) {
    double score[2];
    for (int a = 0; a < 2; ++a) {
      for (int j = 0; j < d; ++j) z[j] = rng.normal();
      const Vector offset = lower[static_cast<std::size_t>(a)].transpose().triangularView<Eigen::Upper>().solve(z);
      score[a] = x.dot(beta[static_cast<std::size_t>(a)] + sigma_prior * offset);
    }
    if (score[1] > score[0]) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(draws);
}

}  // namespace banditstop
