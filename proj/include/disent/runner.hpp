#pragma once

// Sweeps over (kind x latent_dim x steps x seed), persisted as JSON lines
// keyed by config hash, plus aggregation, ranking and report output.

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "disent/config.hpp"
#include "disent/metrics.hpp"
#include "disent/training.hpp"

namespace disent {

inline constexpr std::array<std::string_view, 5> kMetricNames = {"factor_vae", "sap", "dci", "irs",
                                                                 "mig"};

struct RunRecord {
  std::string run_id;
  std::string config_hash;
  std::string kind;
  int latent_dim = 0;
  long steps = 0;
  std::uint64_t seed = 0;
  MetricReport metrics;
  double recon = 0;  // mean reconstruction loss over the last (up to) 100 steps
  double wall_time = 0;
  std::string error;  // non-empty marks an error row

  bool ok() const { return error.empty(); }
  double metric(std::string_view name) const;
};

/// Digest of everything that determines a run's record.
std::string config_hash(const DatasetSpec& dataset, const TrainConfig& config,
                        const MetricConfig& metrics);
std::string make_run_id(const TrainConfig& config, const std::string& hash);

/// Cartesian product kinds x latent_dims x steps x seeds, in that nesting order.
std::vector<TrainConfig> expand_sweep(const SweepSpec& spec);

/// Trains one config (or several differing only in `steps`, sharing one
/// trajectory) and evaluates at each requested step count. Never throws for
/// run failures; those become error rows.
std::vector<RunRecord> run_trajectory(const GroundTruthDataset& dataset,
                                      const std::vector<TrainConfig>& configs,
                                      const SweepSpec& spec);

struct SweepResult {
  std::vector<RunRecord> records;  // in expand_sweep order
  std::size_t executed = 0;        // records produced by this invocation
};

/// Runs every config without a record in <output_dir>/results.jsonl, using
/// `workers` forked processes. The calling process is the only writer.
SweepResult run_sweep(const SweepSpec& spec, int workers,
                      const std::function<void(const RunRecord&)>& on_record = {});

nlohmann::json record_to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);
std::vector<RunRecord> read_records_jsonl(const std::filesystem::path& path);

struct AggregateRow {
  std::string kind;
  long latent_dim = 0;
  long steps = 0;
  std::string label;  // display name of the group
  std::size_t n = 0;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;  // sample std, only when n >= 2

  /// Unweighted mean of the five metric means; SchemaError if one is missing.
  double score() const;
};

/// Groups ok records by (kind, latent_dim, steps); error rows are skipped.
std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records);

/// Descending by score; ties go to the smaller (latent_dim, steps), then kind.
std::vector<AggregateRow> rank_rows(std::vector<AggregateRow> rows);

void emit_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<RunRecord> parse_records_csv(const std::filesystem::path& path);
void emit_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);

/// Reads either a results CSV or a table with a configuration column
/// (kind/model, latent_dim, steps) and metric columns; rows sharing a key are averaged.
std::vector<AggregateRow> read_table_csv(const std::filesystem::path& path);

/// Writes report.md (ranked table, winner in bold) and one bar chart PNG per metric.
void emit_report(const std::vector<AggregateRow>& rows, const std::filesystem::path& dir);

/// "1000k" -> 1000000, "2m" -> 2000000, plain integers as is.
long parse_step_count(std::string_view text);

}  // namespace disent
