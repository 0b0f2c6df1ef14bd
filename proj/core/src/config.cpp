#include "banditstop/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "banditstop/errors.hpp"

namespace banditstop {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

template <class T>
T as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return as<T>(j.at(key), where + "." + key);
}

Vector vector_from(const json& j, const std::string& where) {
  const auto v = as<std::vector<double>>(j, where);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json vector_to(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Matrix matrix_from(const json& j, const std::string& where) {
  const auto rows = as<std::vector<std::vector<double>>>(j, where);
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c) {
      throw ConfigError(where + ": ragged matrix");
    }
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return m;
}

json matrix_to(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to(m.row(i).transpose()));
  return rows;
}

ContextSpec context_from(const json& j) {
  ContextSpec spec;
  spec.dim = as<int>(require(j, "dim", "context"), "context.dim");
  spec.bound_L = get_or<double>(j, "bound_L", 1.0, "context");
  if (!j.contains("dist")) {
    spec.dist = UniformBox{Vector::Constant(std::max(spec.dim, 0), -spec.bound_L),
                           Vector::Constant(std::max(spec.dim, 0), spec.bound_L)};
    return spec;
  }
  const json& d = j.at("dist");
  const auto type = as<std::string>(require(d, "type", "context.dist"), "context.dist.type");
  if (type == "uniform_box") {
    spec.dist = UniformBox{vector_from(require(d, "lower", "context.dist"), "context.dist.lower"),
                           vector_from(require(d, "upper", "context.dist"), "context.dist.upper")};
  } else if (type == "truncated_gaussian") {
    spec.dist = TruncatedGaussian{vector_from(require(d, "mean", "context.dist"), "context.dist.mean"),
                                  matrix_from(require(d, "covariance", "context.dist"), "context.dist.covariance"),
                                  get_or<double>(d, "box", spec.bound_L, "context.dist")};
  } else {
    throw ConfigError("context.dist.type: unknown distribution '" + type + "'");
  }
  return spec;
}

json context_to(const ContextSpec& spec) {
  json dist;
  if (const auto* box = std::get_if<UniformBox>(&spec.dist)) {
    dist = {{"type", "uniform_box"}, {"lower", vector_to(box->lower)}, {"upper", vector_to(box->upper)}};
  } else {
    const auto& g = std::get<TruncatedGaussian>(spec.dist);
    dist = {{"type", "truncated_gaussian"},
            {"mean", vector_to(g.mean)},
            {"covariance", matrix_to(g.covariance)},
            {"box", g.box}};
  }
  return {{"dim", spec.dim}, {"bound_L", spec.bound_L}, {"dist", dist}};
}

NoiseKind noise_from(const std::string& s) {
  if (s == "gaussian") return NoiseKind::Gaussian;
  if (s == "bounded_uniform") return NoiseKind::BoundedUniform;
  throw ConfigError("model.noise: unknown noise family '" + s + "'");
}

TrueModel model_from(const json& j) {
  TrueModel m;
  m.beta0 = vector_from(require(j, "beta0", "model"), "model.beta0");
  m.beta1 = vector_from(require(j, "beta1", "model"), "model.beta1");
  m.sigma0 = get_or<double>(j, "sigma0", 1.0, "model");
  m.sigma1 = get_or<double>(j, "sigma1", 1.0, "model");
  m.noise = noise_from(get_or<std::string>(j, "noise", "gaussian", "model"));
  return m;
}

json model_to(const TrueModel& m) {
  return {{"beta0", vector_to(m.beta0)},
          {"beta1", vector_to(m.beta1)},
          {"sigma0", m.sigma0},
          {"sigma1", m.sigma1},
          {"noise", m.noise == NoiseKind::Gaussian ? "gaussian" : "bounded_uniform"}};
}

PolicyKind policy_from(const json& j) {
  const auto type = as<std::string>(require(j, "type", "policy"), "policy.type");
  if (type == "uniform") return UniformRandom{};
  if (type == "eps_greedy") return EpsGreedy{schedule_from_json(require(j, "eps", "policy"))};
  if (type == "ucb") return Ucb{schedule_from_json(require(j, "c", "policy"))};
  if (type == "thompson") return Thompson{get_or<double>(j, "sigma_prior", 1.0, "policy")};
  throw ConfigError("policy.type: unknown policy '" + type + "'");
}

json policy_to(const PolicyKind& p) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, UniformRandom>) {
          return {{"type", "uniform"}};
        } else if constexpr (std::is_same_v<T, EpsGreedy>) {
          return {{"type", "eps_greedy"}, {"eps", schedule_to_json(v.eps)}};
        } else if constexpr (std::is_same_v<T, Ucb>) {
          return {{"type", "ucb"}, {"c", schedule_to_json(v.c)}};
        } else {
          return {{"type", "thompson"}, {"sigma_prior", v.sigma_prior}};
        }
      },
      p);
}

SigmaMode variance_from(const json& j) {
  const auto mode = as<std::string>(require(j, "mode", "variance"), "variance.mode");
  if (mode == "known_sigma") return KnownSigma{as<double>(require(j, "sigma", "variance"), "variance.sigma")};
  if (mode == "residual") return ResidualSigma{};
  throw ConfigError("variance.mode: unknown mode '" + mode + "'");
}

json variance_to(const SigmaMode& m) {
  if (const auto* k = std::get_if<KnownSigma>(&m)) return {{"mode", "known_sigma"}, {"sigma", k->sigma}};
  return {{"mode", "residual"}};
}

RuleKind rule_from(const std::string& s) {
  for (auto k : {RuleKind::PredeterminedOpportunity, RuleKind::PredeterminedThreshold, RuleKind::OnlineThreshold,
                 RuleKind::OnlineOpportunity}) {
    if (rule_name(k) == s) return k;
  }
  throw ConfigError("stopping.rule: unknown rule '" + s + "'");
}

StoppingConfig stopping_from(const json& j) {
  StoppingConfig s;
  s.rule = rule_from(as<std::string>(require(j, "rule", "stopping"), "stopping.rule"));
  s.k = get_or<double>(j, "k", s.k, "stopping");
  s.c_prime = get_or<double>(j, "c_prime", s.c_prime, "stopping");
  s.scale_by_n = get_or<bool>(j, "scale_by_n", s.scale_by_n, "stopping");
  s.t_max = get_or<std::int64_t>(j, "t_max", s.t_max, "stopping");
  return s;
}

json stopping_to(const StoppingConfig& s) {
  return {{"rule", rule_name(s.rule)}, {"k", s.k}, {"c_prime", s.c_prime}, {"scale_by_n", s.scale_by_n},
          {"t_max", s.t_max}};
}

BoundsConfig bounds_from(const json& j) {
  BoundsConfig b;
  if (j.contains("L") && !j.at("L").is_null()) b.L = as<double>(j.at("L"), "bounds.L");
  b.lambda = get_or<double>(j, "lambda", b.lambda, "bounds");
  b.M = get_or<double>(j, "M", b.M, "bounds");
  b.delta = get_or<double>(j, "delta", b.delta, "bounds");
  if (j.contains("K") && !j.at("K").is_null()) b.K = as<double>(j.at("K"), "bounds.K");
  if (j.contains("calibration")) {
    const json& c = j.at("calibration");
    b.calibration.pilot_reps = get_or<std::size_t>(c, "pilot_reps", b.calibration.pilot_reps, "bounds.calibration");
    b.calibration.t_ref = get_or<std::int64_t>(c, "t_ref", b.calibration.t_ref, "bounds.calibration");
  }
  b.c = get_or<double>(j, "c", b.c, "bounds");
  return b;
}

json bounds_to(const BoundsConfig& b) {
  return {{"L", b.L ? json(*b.L) : json(nullptr)},
          {"lambda", b.lambda},
          {"M", b.M},
          {"delta", b.delta},
          {"K", b.K ? json(*b.K) : json(nullptr)},
          {"calibration", {{"pilot_reps", b.calibration.pilot_reps}, {"t_ref", b.calibration.t_ref}}},
          {"c", b.c}};
}

InferenceConfig inference_from(const json& j) {
  InferenceConfig inf;
  inf.enabled = get_or<bool>(j, "enabled", inf.enabled, "inference");
  const auto mode = get_or<std::string>(j, "mode", "shortcut", "inference");
  if (mode == "shortcut") {
    inf.sampler.mode = SamplerMode::IndependenceShortcut;
  } else if (mode == "rejection") {
    inf.sampler.mode = SamplerMode::ResimulationRejection;
  } else {
    throw ConfigError("inference.mode: unknown mode '" + mode + "'");
  }
  inf.sampler.n_samples = get_or<std::size_t>(j, "n_samples", inf.sampler.n_samples, "inference");
  inf.sampler.max_attempts = get_or<std::size_t>(j, "max_attempts", inf.sampler.max_attempts, "inference");
  inf.sampler.level = get_or<double>(j, "level", inf.sampler.level, "inference");
  const auto mult = get_or<std::string>(j, "multiplicity", "bonferroni", "inference");
  if (mult == "bonferroni") {
    inf.sampler.multiplicity = Multiplicity::Bonferroni;
  } else if (mult == "none") {
    inf.sampler.multiplicity = Multiplicity::None;
  } else {
    throw ConfigError("inference.multiplicity: unknown correction '" + mult + "'");
  }
  if (j.contains("hypothesis") && !j.at("hypothesis").is_null()) {
    const json& h = j.at("hypothesis");
    inf.hypothesis = BetaPair{vector_from(require(h, "beta0", "inference.hypothesis"), "inference.hypothesis.beta0"),
                              vector_from(require(h, "beta1", "inference.hypothesis"), "inference.hypothesis.beta1")};
  }
  inf.truth_is_null = get_or<bool>(j, "truth_is_null", inf.truth_is_null, "inference");
  return inf;
}

json inference_to(const InferenceConfig& inf) {
  json h = nullptr;
  if (inf.hypothesis) h = {{"beta0", vector_to(inf.hypothesis->beta0)}, {"beta1", vector_to(inf.hypothesis->beta1)}};
  return {{"enabled", inf.enabled},
          {"mode", inf.sampler.mode == SamplerMode::IndependenceShortcut ? "shortcut" : "rejection"},
          {"n_samples", inf.sampler.n_samples},
          {"max_attempts", inf.sampler.max_attempts},
          {"level", inf.sampler.level},
          {"multiplicity", inf.sampler.multiplicity == Multiplicity::Bonferroni ? "bonferroni" : "none"},
          {"hypothesis", h},
          {"truth_is_null", inf.truth_is_null}};
}

OutputConfig output_from(const json& j) {
  OutputConfig o;
  o.dir = get_or<std::string>(j, "dir", o.dir, "output");
  if (j.contains("formats")) {
    const auto formats = as<std::vector<std::string>>(j.at("formats"), "output.formats");
    o.csv = o.json = false;
    for (const auto& f : formats) {
      if (f == "csv") {
        o.csv = true;
      } else if (f == "json") {
        o.json = true;
      } else {
        throw ConfigError("output.formats: unknown format '" + f + "'");
      }
    }
  }
  o.trajectories = get_or<bool>(j, "trajectories", o.trajectories, "output");
  return o;
}

json output_to(const OutputConfig& o) {
  json formats = json::array();
  if (o.csv) formats.push_back("csv");
  if (o.json) formats.push_back("json");
  return {{"dir", o.dir}, {"formats", formats}, {"trajectories", o.trajectories}};
}

}  // namespace

std::string rule_name(RuleKind kind) {
  switch (kind) {
    case RuleKind::PredeterminedOpportunity:
      return "predetermined_opportunity";
    case RuleKind::PredeterminedThreshold:
      return "predetermined_threshold";
    case RuleKind::OnlineThreshold:
      return "online_threshold";
    case RuleKind::OnlineOpportunity:
      return "online_opportunity";
  }
  return "unknown";
}

json schedule_to_json(const Schedule& s) {
  switch (s.kind()) {
    case Schedule::Kind::Constant:
      return {{"type", "constant"}, {"value", s.scale()}};
    case Schedule::Kind::Power:
      return {{"type", "power"}, {"scale", s.scale()}, {"exponent", s.exponent()}, {"floor", s.floor()}};
    case Schedule::Kind::Explicit:
      return {{"type", "explicit"}, {"values", s.values()}};
  }
  return nullptr;
}

Schedule schedule_from_json(const json& j) {
  if (j.is_number()) return Schedule::constant(as<double>(j, "schedule"));
  const auto type = as<std::string>(require(j, "type", "schedule"), "schedule.type");
  try {
    if (type == "constant") return Schedule::constant(as<double>(require(j, "value", "schedule"), "schedule.value"));
    if (type == "power") {
      return Schedule::power(as<double>(require(j, "scale", "schedule"), "schedule.scale"),
                             as<double>(require(j, "exponent", "schedule"), "schedule.exponent"),
                             get_or<double>(j, "floor", 0.0, "schedule"));
    }
    if (type == "explicit") {
      return Schedule::explicit_values(as<std::vector<double>>(require(j, "values", "schedule"), "schedule.values"));
    }
  } catch (const ContractError& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  throw ConfigError("schedule.type: unknown schedule '" + type + "'");
}

void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                      std::to_string(schema_version));
  }
  setup().validate();

  if (stopping.t_max < 1) throw ConfigError("stopping.t_max must be >= 1");
  if ((stopping.rule == RuleKind::PredeterminedThreshold || stopping.rule == RuleKind::OnlineThreshold) &&
      !(stopping.k > 0.0)) {
    throw ConfigError("stopping.k must be positive");
  }
  if (stopping.rule == RuleKind::OnlineOpportunity && !(stopping.c_prime > 0.0)) {
    throw ConfigError("stopping.c_prime must be positive");
  }

  if (bounds.L && !(*bounds.L > 0.0)) throw ConfigError("bounds.L must be positive");
  if (bounds.K && !(*bounds.K > 0.0)) throw ConfigError("bounds.K must be positive");
  if (bounds.calibration.pilot_reps < 1) throw ConfigError("bounds.calibration.pilot_reps must be >= 1");
  if (bounds.calibration.t_ref < 1) throw ConfigError("bounds.calibration.t_ref must be >= 1");
  bound_constants(bounds.K.value_or(1.0)).validate();

  if (inference.enabled) {
    inference.sampler.validate();
    if (inference.hypothesis) {
      const auto d = static_cast<Eigen::Index>(context.dim);
      if (inference.hypothesis->beta0.size() != d || inference.hypothesis->beta1.size() != d) {
        throw ConfigError("inference.hypothesis: dimension must equal context.dim");
      }
    }
  }
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (regret_mc_samples < 1) throw ConfigError("regret_mc_samples must be >= 1");
  if (output.dir.empty()) throw ConfigError("output.dir must not be empty");
}

SimulationSetup ExperimentConfig::setup() const {
  return SimulationSetup{context, model, policy, clip, batch_size, variance};
}

BoundConstants ExperimentConfig::bound_constants(double K) const {
  BoundConstants b;
  b.L = bounds.L.value_or(euclidean_bound(context.bound_L, context.dim));
  b.lambda = bounds.lambda;
  b.M = bounds.M;
  b.d = context.dim;
  if (const auto* known = std::get_if<KnownSigma>(&variance)) {
    b.sigma = known->sigma;
  } else {
    b.sigma = std::max(model.sigma0, model.sigma1);
  }
  b.delta = bounds.delta;
  b.K = K;
  b.c = bounds.c;
  b.n = batch_size;
  b.p_floor = clip.floor();
  return b;
}

StoppingRuleSpec ExperimentConfig::stopping_rule(double K) const {
  StoppingRuleSpec spec;
  spec.t_max = stopping.t_max;
  switch (stopping.rule) {
    case RuleKind::PredeterminedOpportunity:
      spec.rule = PredeterminedOpportunity{bound_constants(K)};
      break;
    case RuleKind::PredeterminedThreshold:
      spec.rule = PredeterminedThreshold{bound_constants(K), stopping.k};
      break;
    case RuleKind::OnlineThreshold:
      spec.rule = OnlineThreshold{stopping.k};
      break;
    case RuleKind::OnlineOpportunity:
      spec.rule = OnlineOpportunity{stopping.c_prime, stopping.scale_by_n};
      break;
  }
  return spec;
}

std::optional<BetaPair> ExperimentConfig::effective_hypothesis() const {
  if (inference.hypothesis) return inference.hypothesis;
  if (inference.truth_is_null) return BetaPair{model.beta0, model.beta1};
  return std::nullopt;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig cfg;
  cfg.schema_version = as<int>(require(j, "schema_version", "config"), "schema_version");
  cfg.context = context_from(require(j, "context", "config"));
  cfg.model = model_from(require(j, "model", "config"));
  if (j.contains("policy")) cfg.policy = policy_from(j.at("policy"));
  if (j.contains("clip")) cfg.clip = ClipSchedule{schedule_from_json(j.at("clip"))};
  cfg.batch_size = get_or<std::int64_t>(j, "batch_size", cfg.batch_size, "config");
  if (j.contains("variance")) cfg.variance = variance_from(j.at("variance"));
  cfg.stopping = stopping_from(require(j, "stopping", "config"));
  if (j.contains("bounds")) cfg.bounds = bounds_from(j.at("bounds"));
  if (j.contains("inference")) cfg.inference = inference_from(j.at("inference"));
  cfg.replications = get_or<std::size_t>(j, "replications", cfg.replications, "config");
  cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", cfg.master_seed, "config");
  cfg.regret_mc_samples = get_or<std::size_t>(j, "regret_mc_samples", cfg.regret_mc_samples, "config");
  if (j.contains("output")) cfg.output = output_from(j.at("output"));
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
  return {{"schema_version", cfg.schema_version},
          {"context", context_to(cfg.context)},
          {"model", model_to(cfg.model)},
          {"policy", policy_to(cfg.policy)},
          {"clip", schedule_to_json(cfg.clip.levels)},
          {"batch_size", cfg.batch_size},
          {"variance", variance_to(cfg.variance)},
          {"stopping", stopping_to(cfg.stopping)},
          {"bounds", bounds_to(cfg.bounds)},
          {"inference", inference_to(cfg.inference)},
          {"replications", cfg.replications},
          {"master_seed", cfg.master_seed},
          {"regret_mc_samples", cfg.regret_mc_samples},
          {"output", output_to(cfg.output)}};
}

}  // namespace banditstop
