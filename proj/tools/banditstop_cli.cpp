// banditstop command line: run replications, scan stop times, rerun
// inference from a stored trajectory, calibrate K, check assumptions.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "banditstop/config.hpp"
#include "banditstop/errors.hpp"
#include "banditstop/harness.hpp"
#include "banditstop/model.hpp"
#include "banditstop/report.hpp"
#include "banditstop/stopping.hpp"
#include "banditstop/trajectory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace banditstop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

void add_common(CLI::App* sub, CommonFlags& f, bool config_required = true) {
  auto* opt = sub->add_option("--config", f.config, "Experiment config (JSON)");
  if (config_required) opt->required();
  sub->add_option("--seed", f.seed, "Override master seed");
  sub->add_option("--reps", f.reps, "Override replication count");
  sub->add_option("--out", f.out, "Override output directory");
  sub->add_option("--format", f.format, "Comma-separated output formats: csv,json");
}

void apply_format(OutputConfig& out, const std::string& list) {
  out.csv = out.json = false;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "csv") {
      out.csv = true;
    } else if (item == "json") {
      out.json = true;
    } else if (!item.empty()) {
      throw ConfigError("--format: unknown format '" + item + "'");
    }
  }
}

ExperimentConfig apply_overrides(ExperimentConfig cfg, const CommonFlags& f) {
  if (f.seed) cfg.master_seed = *f.seed;
  if (f.reps) cfg.replications = *f.reps;
  if (f.out) cfg.output.dir = *f.out;
  if (f.format) apply_format(cfg.output, *f.format);
  cfg.validate();
  return cfg;
}

ExperimentConfig load(const CommonFlags& f) { return apply_overrides(load_config(f.config), f); }

// Writes `name` under the output dir when JSON output is on; always echoes to stdout.
void emit_json(const ExperimentConfig& cfg, const std::string& name, const json& j) {
  std::cout << j.dump(2) << '\n';
  if (!cfg.output.json) return;
  std::error_code ec;
  fs::create_directories(cfg.output.dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.output.dir + "': " + ec.message());
  const fs::path path = fs::path(cfg.output.dir) / name;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

int cmd_simulate(const CommonFlags& f, unsigned threads) {
  const ExperimentConfig cfg = load(f);
  RunOptions opts;
  opts.threads = threads;
  const ExperimentResult result = run_replications(cfg, opts);
  emit_reports(result, cfg, cfg.output.dir, utc_timestamp());
  const auto& agg = result.aggregates;
  std::cout << "replications: " << agg.replications << "  failed: " << agg.failed
            << "  mean stop time: " << format_double(agg.stop_time_mean) << '\n';
  if (agg.creg_mean) std::cout << "mean cReg: " << format_double(*agg.creg_mean) << '\n';
  if (agg.coverage) std::cout << "coverage: " << format_double(*agg.coverage) << '\n';
  if (agg.rejection_rate) std::cout << "rejection rate: " << format_double(*agg.rejection_rate) << '\n';
  std::cout << "wrote " << cfg.output.dir << '\n';
  return agg.failed > 0 ? kExitRuntime : kExitOk;
}

int cmd_stop_scan(const CommonFlags& f) {
  const ExperimentConfig cfg = load(f);
  if (cfg.stopping.rule != RuleKind::PredeterminedOpportunity &&
      cfg.stopping.rule != RuleKind::PredeterminedThreshold) {
    throw ConfigError("stop-scan: rule '" + rule_name(cfg.stopping.rule) + "' depends on data");
  }
  const auto K = resolve_k(cfg);
  const StoppingRuleSpec rule = cfg.stopping_rule(*K);
  const BoundConstants consts = cfg.bound_constants(*K);
  const std::int64_t t_scan = scan_stop_time(rule);

  json j = {{"rule", rule_name(cfg.stopping.rule)},
            {"K", *K},
            {"K_prime", consts.k_prime()},
            {"K_double_prime", consts.k_double_prime()},
            {"t_scan", t_scan},
            {"bound_at_t_scan", regret_bound_time(t_scan, consts)}};
  try {
    const ClosedFormStop cf = closed_form_stop_time(rule);
    j["t_star"] = cf.t_star;
    j["creg_star"] = cf.creg_star;
  } catch (const UnsupportedCase& e) {
    j["t_star"] = nullptr;
    j["closed_form_note"] = e.what();
  }
  emit_json(cfg, "stop_scan.json", j);
  return kExitOk;
}

int cmd_infer(const CommonFlags& f, const std::string& trajectory_path) {
  const TrajectoryFile tf = read_trajectory(trajectory_path);
  const ExperimentConfig cfg = f.config.empty() ? apply_overrides(parse_config(tf.config), f) : load(f);
  const StoppingRuleSpec rule = cfg.stopping_rule(tf.K.value_or(1.0));

  const auto replayed = replay_stop_trace(tf.fits, cfg.variance, cfg.batch_size, rule);
  if (replayed != tf.stop_trace) throw std::runtime_error("infer: replayed stop decisions differ from the log");

  const IvwEstimate terminal = ivw_combine(tf.fits, cfg.variance, cfg.batch_size);
  ConditionalSamplerConfig sampler = cfg.inference.sampler;
  Rng rng = Rng(tf.seed).substream(kInferenceStream);
  const InferenceResult res = run_inference(StoppedExperiment{tf.stop_time, terminal}, cfg.setup(), rule, sampler,
                                            cfg.effective_hypothesis(), rng);

  json arms = json::array();
  for (int a = 0; a < 2; ++a) {
    json coords = json::array();
    const auto& iv = res.intervals[static_cast<std::size_t>(a)];
    for (std::size_t i = 0; i < iv.size(); ++i) {
      coords.push_back({{"point", res.point[static_cast<std::size_t>(a)][static_cast<Eigen::Index>(i)]},
                        {"lo", iv[i].lo},
                        {"hi", iv[i].hi}});
    }
    arms.push_back(coords);
  }
  json j = {{"rep", tf.rep},
            {"seed", tf.seed},
            {"stop_time", tf.stop_time},
            {"coordinate_level", res.coordinate_level},
            {"arms", arms},
            {"reject", res.reject ? json(*res.reject) : json(nullptr)},
            {"acceptance_rate", res.acceptance_rate},
            {"samples_retained", res.samples_retained},
            {"attempts", res.attempts}};
  emit_json(cfg, "inference_rep_" + std::to_string(tf.rep) + ".json", j);
  return kExitOk;
}

int cmd_calibrate(const CommonFlags& f, std::optional<std::size_t> pilot_reps, std::optional<std::int64_t> t_ref,
                  std::optional<std::size_t> holdout) {
  const ExperimentConfig cfg = load(f);
  const std::size_t pilots = pilot_reps.value_or(cfg.bounds.calibration.pilot_reps);
  const std::int64_t t = t_ref.value_or(cfg.bounds.calibration.t_ref);
  const CalibrationResult cal = calibrate_k(cfg, pilots, t);
  json j = {{"K", cal.K}, {"t_ref", cal.t_ref}, {"pilot_reps", cal.pilot_reps}, {"delta", cfg.bounds.delta}};
  if (holdout) {
    const BoundCheck check = check_bound_validity(cfg, cal.K, t, *holdout);
    j["holdout"] = {{"reps", check.reps}, {"violations", check.violations}, {"rate", check.rate},
                    {"bound", check.bound}};
  }
  emit_json(cfg, "calibration.json", j);
  return kExitOk;
}

int cmd_check_assumptions(const CommonFlags& f, std::size_t mc, double q) {
  const ExperimentConfig cfg = load(f);
  Rng rng(cfg.master_seed);
  const auto grid = default_margin_grid();
  const AssumptionReport rep = check_assumptions(cfg.context, cfg.model, mc, grid, rng, q);
  json margin = nullptr;
  if (rep.margin_fit) {
    margin = {{"M", rep.margin_fit->M}, {"lambda", rep.margin_fit->lambda},
              {"points_used", rep.margin_fit->points_used}};
  }
  json j = {{"L_hat", rep.L_hat},
            {"lambda_min_hat", rep.lambda_min_hat},
            {"margin_fit", margin},
            {"margin_grid", grid},
            {"margin_probabilities", rep.margin_probabilities},
            {"mc_samples", rep.mc_samples},
            {"bounded_satisfied", rep.bounded_satisfied},
            {"eigen_satisfied", rep.eigen_satisfied},
            {"margin_satisfied", rep.margin_satisfied},
            {"configured", {{"L_sup", cfg.context.bound_L}, {"M", cfg.bounds.M}, {"lambda", cfg.bounds.lambda}}}};
  emit_json(cfg, "assumptions.json", j);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batched two-arm contextual bandit experiments with early stopping"};
  app.require_subcommand(1);

  CommonFlags sim_f, scan_f, infer_f, cal_f, check_f;
  unsigned threads = 1;
  auto* sim = app.add_subcommand("simulate", "Run replications and write reports");
  add_common(sim, sim_f);
  sim->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* scan = app.add_subcommand("stop-scan", "Stop time of a pre-determined rule, scanned and closed form");
  add_common(scan, scan_f);

  std::string trajectory;
  auto* infer = app.add_subcommand("infer", "Rerun conditional inference on a stored trajectory");
  add_common(infer, infer_f, false);
  infer->add_option("--trajectory", trajectory, "Trajectory JSON written by simulate")->required();

  std::optional<std::size_t> pilot_reps;
  std::optional<std::int64_t> t_ref;
  std::optional<std::size_t> holdout;
  auto* cal = app.add_subcommand("calibrate-k", "Calibrate the tail constant K on pilot replications");
  add_common(cal, cal_f);
  cal->add_option("--pilot-reps", pilot_reps, "Pilot replications");
  cal->add_option("--t-ref", t_ref, "Reference batch index");
  cal->add_option("--holdout", holdout, "Held-out replications for a bound violation check");

  std::size_t mc = 100000;
  double q = 0.0;
  auto* check = app.add_subcommand("check-assumptions", "Empirical boundedness, eigenvalue and margin checks");
  add_common(check, check_f);
  check->add_option("--mc", mc, "Monte Carlo contexts");
  check->add_option("--q", q, "Eigenvalue floor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_f, threads);
    if (*scan) return cmd_stop_scan(scan_f);
    if (*infer) return cmd_infer(infer_f, trajectory);
    if (*cal) return cmd_calibrate(cal_f, pilot_reps, t_ref, holdout);
    if (*check) return cmd_check_assumptions(check_f, mc, q);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
