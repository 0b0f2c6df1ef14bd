#include "banditstop/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>

#include "banditstop/errors.hpp"

namespace banditstop {

using nlohmann::json;

namespace {

constexpr const char* kTrajectoryFormat = "banditstop.trajectory";
constexpr const char* kSummaryFormat = "banditstop.summary";
constexpr int kFileVersion = 1;

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json vec_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

Matrix mat_from(const json& j, Eigen::Index d) {
  Matrix m(d, d);
  if (static_cast<Eigen::Index>(j.size()) != d) throw ContractError("trajectory: gram has wrong shape");
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto row = j.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != d) throw ContractError("trajectory: gram has wrong shape");
    for (Eigen::Index k = 0; k < d; ++k) m(i, k) = row[static_cast<std::size_t>(k)];
  }
  return m;
}

json pair_json(const std::optional<std::array<double, 2>>& v) {
  return v ? json{(*v)[0], (*v)[1]} : json(nullptr);
}

std::optional<std::array<double, 2>> pair_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return std::array<double, 2>{j.at(0).get<double>(), j.at(1).get<double>()};
}

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json decision_json(const StopDecision& d) {
  return {{"t", d.t},
          {"stop", d.stop},
          {"cap_hit", d.cap_hit},
          {"estimator_unavailable", d.estimator_unavailable},
          {"insufficient_history", d.insufficient_history},
          {"norms", pair_json(d.norms)},
          {"previous_norms", pair_json(d.previous_norms)},
          {"bound_t", opt_json(d.bound_t)},
          {"bound_next", opt_json(d.bound_next)}};
}

StopDecision decision_from(const json& j) {
  StopDecision d;
  d.t = j.at("t").get<std::int64_t>();
  d.stop = j.at("stop").get<bool>();
  d.cap_hit = j.at("cap_hit").get<bool>();
  d.estimator_unavailable = j.at("estimator_unavailable").get<bool>();
  d.insufficient_history = j.at("insufficient_history").get<bool>();
  d.norms = pair_from(j.at("norms"));
  d.previous_norms = pair_from(j.at("previous_norms"));
  d.bound_t = opt_from(j.at("bound_t"));
  d.bound_next = opt_from(j.at("bound_next"));
  return d;
}

json arm_fit_json(const ArmFit& f) {
  return {{"beta_hat", f.beta_hat ? vec_json(*f.beta_hat) : json(nullptr)},
          {"gram", mat_json(f.gram)},
          {"moment", vec_json(f.moment)},
          {"count", f.count},
          {"rss", opt_json(f.rss)},
          {"sum_sq_reward", f.sum_sq_reward}};
}

ArmFit arm_fit_from(const json& j) {
  ArmFit f;
  f.moment = vec_from(j.at("moment"));
  f.gram = mat_from(j.at("gram"), f.moment.size());
  if (!j.at("beta_hat").is_null()) f.beta_hat = vec_from(j.at("beta_hat"));
  f.count = j.at("count").get<std::int64_t>();
  f.rss = opt_from(j.at("rss"));
  f.sum_sq_reward = j.at("sum_sq_reward").get<double>();
  return f;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> csv_header(int dim) {
  std::vector<std::string> h{"rep",    "seed",          "stop_time",    "cap_hit",
                             "regret_hat", "creg", "var_norm_arm0", "var_norm_arm1"};
  for (int a = 0; a < 2; ++a) {
    for (int i = 0; i < dim; ++i) {
      h.push_back("ci_lo_a" + std::to_string(a) + "_" + std::to_string(i));
      h.push_back("ci_hi_a" + std::to_string(a) + "_" + std::to_string(i));
    }
  }
  h.emplace_back("reject");
  return h;
}

void write_replications_csv(std::ostream& out, std::span<const ReplicationRecord> records, int dim) {
  const auto header = csv_header(dim);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : records) {
    out << r.rep << ',' << r.seed << ',';
    if (r.failed) {
      out << "NA,NA";
    } else {
      out << r.stop_time << ',' << (r.cap_hit ? 1 : 0);
    }
    out << ',' << opt(r.regret_hat) << ',';
    if (!r.creg) {
      out << "NA";
    } else if (r.creg->infinite) {
      out << "inf";
    } else {
      out << format_double(r.creg->value);
    }
    for (int a = 0; a < 2; ++a) {
      out << ',' << (r.var_norms ? format_double((*r.var_norms)[static_cast<std::size_t>(a)]) : "NA");
    }
    for (int a = 0; a < 2; ++a) {
      for (int i = 0; i < dim; ++i) {
        if (r.inference) {
          const auto& iv = r.inference->intervals[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)];
          out << ',' << format_double(iv.lo) << ',' << format_double(iv.hi);
        } else {
          out << ",NA,NA";
        }
      }
    }
    out << ',';
    if (r.inference && r.inference->reject) {
      out << (*r.inference->reject ? 1 : 0);
    } else {
      out << "NA";
    }
    out << '\n';
  }
}

json aggregates_to_json(const Aggregates& agg) {
  json hist = json::array();
  for (const auto& [t, count] : agg.stop_time_histogram) hist.push_back({t, count});
  return {{"replications", agg.replications},
          {"failed", agg.failed},
          {"stop_time_histogram", hist},
          {"stop_time_mean", agg.stop_time_mean},
          {"cap_hits", agg.cap_hits},
          {"regret_mean", opt_json(agg.regret_mean)},
          {"creg_mean", opt_json(agg.creg_mean)},
          {"creg_sd", opt_json(agg.creg_sd)},
          {"creg_infinite", agg.creg_infinite},
          {"creg_cumulative_mean", opt_json(agg.creg_cumulative_mean)},
          {"bound_violation_rate", opt_json(agg.bound_violation_rate)},
          {"bound_checked", agg.bound_checked},
          {"coverage", opt_json(agg.coverage)},
          {"coverage_checked", agg.coverage_checked},
          {"rejection_rate", opt_json(agg.rejection_rate)},
          {"type1_error", opt_json(agg.type1_error)},
          {"acceptance_rate_mean", opt_json(agg.acceptance_rate_mean)}};
}

json summary_json(const ExperimentResult& result, const ExperimentConfig& config, const std::string& generated_at) {
  json errors = json::array();
  for (const auto& r : result.records) {
    if (r.error) errors.push_back({{"rep", r.rep}, {"fatal", r.failed}, {"error", *r.error}});
  }
  return {{"format", kSummaryFormat},
          {"version", kFileVersion},
          {"resolved_K", opt_json(result.K)},
          {"aggregates", aggregates_to_json(result.aggregates)},
          {"errors", errors},
          {"config", to_json(config)},
          {"metadata", {{"generated_at", generated_at}}}};
}

json trajectory_to_json(const ReplicationRecord& record, const ExperimentConfig& config, std::optional<double> K) {
  json batches = json::array();
  for (const auto& f : record.fits) {
    batches.push_back({{"t", f.batch_index}, {"arms", {arm_fit_json(f.arm(0)), arm_fit_json(f.arm(1))}}});
  }
  json trace = json::array();
  for (const auto& d : record.stop_trace) trace.push_back(decision_json(d));
  return {{"format", kTrajectoryFormat},
          {"version", kFileVersion},
          {"rep", record.rep},
          {"seed", record.seed},
          {"stop_time", record.stop_time},
          {"cap_hit", record.cap_hit},
          {"K", opt_json(K)},
          {"batches", batches},
          {"stop_trace", trace},
          {"config", to_json(config)}};
}

TrajectoryFile trajectory_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kTrajectoryFormat || j.at("version").get<int>() != kFileVersion) {
      throw ConfigError("trajectory: unsupported format or version");
    }
    TrajectoryFile tf;
    tf.rep = j.at("rep").get<std::size_t>();
    tf.seed = j.at("seed").get<std::uint64_t>();
    tf.stop_time = j.at("stop_time").get<std::int64_t>();
    tf.cap_hit = j.at("cap_hit").get<bool>();
    tf.K = opt_from(j.at("K"));
    for (const auto& b : j.at("batches")) {
      BatchOlsFit fit;
      fit.batch_index = b.at("t").get<std::int64_t>();
      fit.arms[0] = arm_fit_from(b.at("arms").at(0));
      fit.arms[1] = arm_fit_from(b.at("arms").at(1));
      tf.fits.push_back(std::move(fit));
    }
    for (const auto& d : j.at("stop_trace")) tf.stop_trace.push_back(decision_from(d));
    tf.config = j.at("config");
    return tf;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("trajectory: ") + e.what());
  }
}

TrajectoryFile read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("trajectory: " + path.string() + ": " + e.what());
  }
  return trajectory_from_json(j);
}

void emit_reports(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& dir,
                  const std::string& generated_at) {
  if (result.records.empty()) throw ContractError("emit_reports: no records");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  const auto csv_path = dir / "replications.csv";
  const auto summary_path = dir / "summary.json";
  const auto traj_dir = dir / "trajectories";
  if (config.output.trajectories) {
    std::filesystem::create_directories(traj_dir, ec);
    if (ec) throw IoError("cannot create '" + traj_dir.string() + "': " + ec.message());
  }

  std::optional<std::ofstream> csv;
  std::optional<std::ofstream> summary;
  if (config.output.csv) csv = open_for_write(csv_path);
  if (config.output.json) summary = open_for_write(summary_path);

  if (csv) {
    write_replications_csv(*csv, result.records, config.context.dim);
    finish_write(*csv, csv_path);
  }
  if (config.output.trajectories) {
    for (const auto& r : result.records) {
      if (r.failed) continue;
      const auto path = traj_dir / ("rep_" + std::to_string(r.rep) + ".json");
      auto out = open_for_write(path);
      out << trajectory_to_json(r, config, result.K).dump() << '\n';
      finish_write(out, path);
    }
  }
  if (summary) {
    *summary << summary_json(result, config, generated_at).dump(2) << '\n';
    finish_write(*summary, summary_path);
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace banditstop
