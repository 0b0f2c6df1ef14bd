#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "banditstop/bounds.hpp"
#include "banditstop/estimators.hpp"
#include "banditstop/inference.hpp"
#include "banditstop/model.hpp"
#include "banditstop/policies.hpp"
#include "banditstop/stopping.hpp"
#include "banditstop/trajectory.hpp"

namespace banditstop {

inline constexpr int kSchemaVersion = 1;

enum class RuleKind { PredeterminedOpportunity, PredeterminedThreshold, OnlineThreshold, OnlineOpportunity };

struct StoppingConfig {
  RuleKind rule = RuleKind::OnlineThreshold;
  double k = 1.0;        // threshold rules
  double c_prime = 1.0;  // online opportunity
  bool scale_by_n = false;
  std::int64_t t_max = 10000;
};

struct CalibrationConfig {
  std::size_t pilot_reps = 200;
  std::int64_t t_ref = 10;
};

struct BoundsConfig {
  /// Euclidean context bound; defaults to sqrt(d) * context.bound_L.
  std::optional<double> L;
  double lambda = 1.0;
  double M = 1.0;
  double delta = 0.1;
  /// Manual override. When absent K is calibrated on pilot replications.
  std::optional<double> K;
  CalibrationConfig calibration;
  double c = 0.0;
};

struct InferenceConfig {
  bool enabled = true;
  ConditionalSamplerConfig sampler;
  std::optional<BetaPair> hypothesis;
  /// The true model is H0: coverage and rejections count as Type-I error, and
  /// the hypothesis defaults to the true coefficients.
  bool truth_is_null = false;
};

struct OutputConfig {
  std::string dir = "out";
  bool csv = true;
  bool json = true;
  bool trajectories = false;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  ContextSpec context;
  TrueModel model;
  PolicyKind policy = UniformRandom{};
  ClipSchedule clip;
  std::int64_t batch_size = 100;
  SigmaMode variance = KnownSigma{1.0};
  StoppingConfig stopping;
  BoundsConfig bounds;
  InferenceConfig inference;
  std::size_t replications = 100;
  std::uint64_t master_seed = 1;
  std::size_t regret_mc_samples = 100000;
  OutputConfig output;

  /// Throws ConfigError on the first problem found.
  void validate() const;

  SimulationSetup setup() const;
  /// Bound constants with the given K (the configured or calibrated value).
  BoundConstants bound_constants(double K) const;
  /// Rule spec; pre-determined rules embed bound_constants(K).
  StoppingRuleSpec stopping_rule(double K) const;
  /// Hypothesis actually tested: the configured one, else the truth when it
  /// is marked as H0.
  std::optional<BetaPair> effective_hypothesis() const;
};

/// Parse and validate. Missing optional keys take the defaults above.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field, defaults included, so parse(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& cfg);

nlohmann::json schedule_to_json(const Schedule& s);
Schedule schedule_from_json(const nlohmann::json& j);

std::string rule_name(RuleKind kind);

}  // namespace banditstop
