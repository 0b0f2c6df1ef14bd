#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "banditstop/config.hpp"
#include "banditstop/harness.hpp"

namespace banditstop {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

std::vector<std::string> csv_header(int dim);

/// One header line and one row per record. Missing values are "NA" and an
/// infinite cost-adjusted regret is "inf".
void write_replications_csv(std::ostream& out, std::span<const ReplicationRecord> records, int dim);

nlohmann::json aggregates_to_json(const Aggregates& agg);

/// Aggregates, echoed config with the resolved K, per-rep errors, and a
/// metadata object holding the only nondeterministic field (generated_at).
nlohmann::json summary_json(const ExperimentResult& result, const ExperimentConfig& config,
                            const std::string& generated_at);

/// Per-batch fits and stop trace of one replication. Enough to replay the
/// stopping decisions and rerun inference.
nlohmann::json trajectory_to_json(const ReplicationRecord& record, const ExperimentConfig& config,
                                  std::optional<double> K);

struct TrajectoryFile {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::int64_t stop_time = 0;
  bool cap_hit = false;
  std::optional<double> K;
  std::vector<BatchOlsFit> fits;
  /// Logged (t, stop, cap_hit) per batch.
  std::vector<StopDecision> stop_trace;
  nlohmann::json config;
};

TrajectoryFile trajectory_from_json(const nlohmann::json& j);
TrajectoryFile read_trajectory(const std::filesystem::path& path);

/// Writes replications.csv, summary.json and, when enabled,
/// trajectories/rep_<i>.json under `dir`. All output files are opened before
/// any is written, so an unwritable path throws IoError without leaving a
/// partial summary.
void emit_reports(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& dir,
                  const std::string& generated_at);

/// UTC, ISO 8601.
std::string utc_timestamp();

}  // namespace banditstop
