#include "banditstop/stopping.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "banditstop/errors.hpp"

namespace banditstop {

namespace {

std::array<double, 2> norms_of(const std::array<Matrix, 2>& sigmas) {
  return {spectral_norm(sigmas[0]), spectral_norm(sigmas[1])};
}

void finish(StopDecision& decision, bool rule_fires, std::int64_t t_max) {
  decision.stop = rule_fires;
  if (!rule_fires && decision.t >= t_max) {
    decision.stop = true;
    decision.cap_hit = true;
  }
}

}  // namespace

double spectral_norm(const Matrix& m) {
  if (m.rows() != m.cols()) throw ContractError("spectral_norm: matrix must be square");
  if (m.size() == 0) return 0.0;
  if (!is_symmetric(m, 1e-9)) throw ContractError("spectral_norm: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return std::max(eig.eigenvalues().maxCoeff(), 0.0);
}

bool StoppingRuleSpec::predetermined() const {
  return std::holds_alternative<PredeterminedOpportunity>(rule) ||
         std::holds_alternative<PredeterminedThreshold>(rule);
}

void StoppingRuleSpec::validate() const {
  if (t_max < 1) throw ConfigError("stopping: t_max must be >= 1");
  if (const auto* r = std::get_if<PredeterminedOpportunity>(&rule)) r->consts.validate();
  if (const auto* r = std::get_if<PredeterminedThreshold>(&rule)) {
    r->consts.validate();
    if (!(r->k > 0.0)) throw ConfigError("stopping: threshold k must be positive");
  }
  if (const auto* r = std::get_if<OnlineThreshold>(&rule)) {
    if (!(r->k > 0.0)) throw ConfigError("stopping: threshold k must be positive");
  }
  if (const auto* r = std::get_if<OnlineOpportunity>(&rule)) {
    if (!(r->c_prime > 0.0)) throw ConfigError("stopping: c' must be positive");
  }
}

StopDecision evaluate(const StoppingRuleSpec& spec, std::int64_t t, const VarianceSnapshot& state) {
  if (t < 1) throw ContractError("evaluate: t must be >= 1");
  StopDecision decision;
  decision.t = t;

  if (const auto* r = std::get_if<PredeterminedOpportunity>(&spec.rule)) {
    const double now = regret_bound_time(t, r->consts);
    const double next = regret_bound_time(t + 1, r->consts);
    decision.bound_t = now;
    decision.bound_next = next;
    finish(decision, now - next <= r->consts.c * static_cast<double>(r->consts.n), spec.t_max);
    return decision;
  }
  if (const auto* r = std::get_if<PredeterminedThreshold>(&spec.rule)) {
    const double now = regret_bound_time(t, r->consts);
    decision.bound_t = now;
    decision.bound_next = regret_bound_time(t + 1, r->consts);
    finish(decision, now <= r->k, spec.t_max);
    return decision;
  }

  if (!state.current) {
    decision.estimator_unavailable = true;
    finish(decision, false, spec.t_max);
    return decision;
  }
  const auto norms = norms_of(*state.current);
  decision.norms = norms;

  if (const auto* r = std::get_if<OnlineThreshold>(&spec.rule)) {
    finish(decision, std::max(norms[0], norms[1]) <= r->k, spec.t_max);
    return decision;
  }

  const auto& r = std::get<OnlineOpportunity>(spec.rule);
  if (!state.previous) {
    decision.insufficient_history = true;
    finish(decision, false, spec.t_max);
    return decision;
  }
  const auto prev = norms_of(*state.previous);
  decision.previous_norms = prev;
  const double limit = r.scale_by_n ? r.c_prime * static_cast<double>(state.n) : r.c_prime;
  // A rising norm gives a negative decrement, which counts as <= c'.
  const bool fires = (prev[0] - norms[0] <= limit) && (prev[1] - norms[1] <= limit);
  finish(decision, fires, spec.t_max);
  return decision;
}

ClosedFormStop closed_form_stop_time(const StoppingRuleSpec& spec) {
  if (const auto* r = std::get_if<PredeterminedOpportunity>(&spec.rule)) {
    const auto& k = r->consts;
    if (k.lambda != 1.0) throw UnsupportedCase("closed_form_stop_time: only derived for lambda = 1");
    const double cn = k.c * static_cast<double>(k.n);
    if (!(cn > 0.0)) throw DomainError("closed_form_stop_time: c n must be positive");
    const double kpp = k.k_double_prime();
    const double t_star = std::sqrt(kpp / cn);
    return {t_star, kpp * std::log(t_star) + cn * t_star};
  }
  if (const auto* r = std::get_if<PredeterminedThreshold>(&spec.rule)) {
    const auto& k = r->consts;
    if (k.lambda != 1.0) throw UnsupportedCase("closed_form_stop_time: only derived for lambda = 1");
    const double p2 = k.p_floor * k.p_floor;
    const double t_star = k.k_prime() / (p2 * static_cast<double>(k.n) * r->k);
    return {t_star, k.k_prime() * k.c / (p2 * r->k)};
  }
  throw UnsupportedCase("closed_form_stop_time: online rules have no closed form");
}

std::int64_t scan_stop_time(const StoppingRuleSpec& spec) {
  if (!spec.predetermined()) throw UnsupportedCase("scan_stop_time: rule depends on data");
  const VarianceSnapshot none;
  for (std::int64_t t = 1;; ++t) {
    if (evaluate(spec, t, none).stop) return t;
  }
}

}  // namespace banditstop
