#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <variant>

#include "banditstop/bounds.hpp"
#include "banditstop/linalg.hpp"

namespace banditstop {

/// Largest eigenvalue of a symmetric PSD matrix. Throws ContractError when the
/// input is not symmetric within 1e-9.
double spectral_norm(const Matrix& m);

/// Stop when U(t) - U(t+1) <= c n.
struct PredeterminedOpportunity {
  BoundConstants consts;
};

/// Stop when U(t) <= k.
struct PredeterminedThreshold {
  BoundConstants consts;
  double k = 1.0;
};

/// Stop when max_a ||Sigma_hat_{t,a}||_2 <= k.
struct OnlineThreshold {
  double k = 1.0;
};

/// Stop when ||Sigma_hat_{t-1,a}|| - ||Sigma_hat_{t,a}|| <= c' for both arms
/// (<= c' n with `scale_by_n`).
struct OnlineOpportunity {
  double c_prime = 1.0;
  bool scale_by_n = false;
};

using StoppingRule = std::variant<PredeterminedOpportunity, PredeterminedThreshold, OnlineThreshold, OnlineOpportunity>;

struct StoppingRuleSpec {
  StoppingRule rule;
  std::int64_t t_max = 10000;

  bool predetermined() const;
  bool online() const { return !predetermined(); }
  void validate() const;
};

/// Sigma_hat per arm at batch t and t-1; absent when not estimable.
struct VarianceSnapshot {
  std::optional<std::array<Matrix, 2>> current;
  std::optional<std::array<Matrix, 2>> previous;
  /// Batch size, used only by OnlineOpportunity with scale_by_n.
  std::int64_t n = 1;
};

struct StopDecision {
  bool stop = false;
  std::int64_t t = 0;
  bool cap_hit = false;
  /// Online rule could not be evaluated: no variance estimate at t.
  bool estimator_unavailable = false;
  /// OnlineOpportunity at a batch without a previous estimate.
  bool insufficient_history = false;
  std::optional<std::array<double, 2>> norms;
  std::optional<std::array<double, 2>> previous_norms;
  /// U(t) and U(t+1) for the pre-determined rules.
  std::optional<double> bound_t;
  std::optional<double> bound_next;

  bool operator==(const StopDecision&) const = default;
};

StopDecision evaluate(const StoppingRuleSpec& spec, std::int64_t t, const VarianceSnapshot& state);

/// Approximate stop time and cost-adjusted regret for lambda = 1 and constant p.
struct ClosedFormStop {
  double t_star = 0.0;
  double creg_star = 0.0;
};

/// Opportunity cost: t* = sqrt(K'' / (c n)), cReg* = K'' ln t* + c n t*.
/// Threshold: t* = K' / (p^2 n k), cReg* = K' c / (p^2 k).
/// Throws UnsupportedCase for online rules or lambda != 1.
ClosedFormStop closed_form_stop_time(const StoppingRuleSpec& spec);

/// First t in [1, t_max] where a pre-determined rule fires (t_max if none).
std::int64_t scan_stop_time(const StoppingRuleSpec& spec);

}  // namespace banditstop
