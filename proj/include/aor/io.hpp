#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aor/metrics.hpp"
#include "aor/network.hpp"
#include "aor/recovery.hpp"
#include "aor/sparse.hpp"
#include "aor/synthgen.hpp"

namespace aor::io {

/// Comma-delimited text with one header row. Parsing is strict: ragged or
/// non-numeric rows raise ValidationError with row context.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  int require_column(const std::string& name, const std::string& file) const;
};

Table read_table(const std::filesystem::path& path);

/// Node file: `id`. Link file: `id,from,to,length_m[,road_class]`.
Network load_network(const std::filesystem::path& node_file,
                     const std::filesystem::path& link_file);
void write_network(const std::filesystem::path& node_file, const std::filesystem::path& link_file,
                   const Network& network);

/// Speed file: `link_id,bin,speed_mps`, dense over links x bins. The bin
/// count is inferred; delta_t/t_start come from the caller. When impute is
/// set, missing (link, bin) entries take the link's mean present speed;
/// otherwise missing entries are an error. Non-positive speeds always are.
SpeedProfile load_speeds(const std::filesystem::path& path, const Network& network, double delta_t,
                         double t_start = 0.0, bool impute_missing = false);
void write_speeds(const std::filesystem::path& path, const Network& network,
                  const SpeedProfile& profile);

/// Demand file: `origin,destination,bin,demand`; OD order = first appearance.
struct DemandTable {
  std::vector<ODPair> od_pairs;
  std::vector<double> q;  // (od, bin) layout
  int num_bins = 0;
};
DemandTable load_demands(const std::filesystem::path& path);
void write_demands(const std::filesystem::path& path, std::span<const ODPair> od_pairs,
                   std::span<const double> q, int num_bins);

/// Flow file: `link_id,bin,flow` in (link, bin) layout. A non-positive
/// num_bins is inferred from the file.
std::vector<double> load_flows(const std::filesystem::path& path, const Network& network,
                               int num_bins, const std::string& value_column);
void write_flows(const std::filesystem::path& path, const Network& network, int num_bins,
                 std::span<const double> flows, const std::string& value_column);

/// Observation file: `link_id,bin,flow_obs`, sparse rows.
void write_observations(const std::filesystem::path& path, const Network& network,
                        const FlatIndex& index, const Observations& obs);
void load_observations(const std::filesystem::path& path, const Network& network,
                       const FlatIndex& index, Observations& obs);

/// Coordinate-triple serialization with the two-line header
/// `rows cols nnz` / values. Round-trips finalized matrices exactly.
void write_sparse(const std::filesystem::path& path, const SparseMatrix& matrix);
SparseMatrix read_sparse(const std::filesystem::path& path);

/// Sidecar documenting the flat layouts: link order, OD order, grid, and
/// the index formulas.
void write_index_map(const std::filesystem::path& path, const FlatIndex& index,
                     const Network& network, std::span<const ODPair> od_pairs,
                     const TimeGrid& grid);

/// Full scenario directory: nodes, links, speeds, true demands, true flows,
/// observations (6 data files) plus a manifest carrying the config.
void write_scenario(const std::filesystem::path& dir, const synth::Scenario& scenario,
                    const synth::ScenarioConfig& config, const std::string& created_at);

struct LoadedScenario {
  synth::Scenario scenario;
  synth::ScenarioConfig config;
};
/// Rebuilds paths, index, and the assignment matrix from the stored files.
LoadedScenario load_scenario(const std::filesystem::path& dir);

/// Estimates: `link_id,bin,flow_est` and `od_index,bin,demand_est`.
void write_flow_estimates(const std::filesystem::path& path, const Network& network, int num_bins,
                          std::span<const double> x);
void write_demand_estimates(const std::filesystem::path& path, int num_od, int num_bins,
                            std::span<const double> q);

struct MetricsReport {
  metrics::WrmeReport global;
  std::map<RoadClass, metrics::WrmeReport> by_class;
  std::vector<double> per_link_rme;  // NaN where undefined (zero-flow link)
  std::vector<double> per_link_mae;
  std::vector<std::int64_t> mae_histogram;  // buckets of width mae_bucket_width
  double mae_bucket_width = 5.0;
};
MetricsReport build_metrics_report(const metrics::FlowSeries& series,
                                   std::span<const std::optional<RoadClass>> classes);
void write_metrics_report(const std::filesystem::path& dir, const MetricsReport& report,
                          const Network& network);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace aor::io
