#include "aor/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "aor/common.hpp"

namespace aor::io {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || !std::isfinite(v))
    throw ValidationError(context + ": cannot parse number '" + text + "'");
  return v;
}

int parse_int(const std::string& text, const std::string& context) {
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0')
    throw ValidationError(context + ": cannot parse integer '" + text + "'");
  return static_cast<int>(v);
}

std::string row_context(const std::filesystem::path& path, std::size_t row) {
  return path.filename().string() + " row " + std::to_string(row + 2);  // 1-based, after header
}

}  // namespace

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int Table::require_column(const std::string& name, const std::string& file) const {
  const int c = column(name);
  if (c < 0) throw ValidationError(file + ": missing column '" + name + "'");
  return c;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_csv(line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != table.header.size())
      throw ValidationError(row_context(path, row) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    ++row;
  }
  return table;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

Network load_network(const std::filesystem::path& node_file,
                     const std::filesystem::path& link_file) {
  const Table node_table = read_table(node_file);
  const int id_col = node_table.require_column("id", node_file.string());
  std::vector<Node> nodes;
  nodes.reserve(node_table.rows.size());
  for (const auto& row : node_table.rows) nodes.push_back({row[id_col]});

  const Table link_table = read_table(link_file);
  const std::string lf = link_file.string();
  const int l_id = link_table.require_column("id", lf);
  const int l_from = link_table.require_column("from", lf);
  const int l_to = link_table.require_column("to", lf);
  const int l_len = link_table.require_column("length_m", lf);
  const int l_class = link_table.column("road_class");

  std::vector<Link> links;
  links.reserve(link_table.rows.size());
  for (std::size_t i = 0; i < link_table.rows.size(); ++i) {
    const auto& row = link_table.rows[i];
    Link link;
    link.id = row[l_id];
    link.from = row[l_from];
    link.to = row[l_to];
    link.length_m = parse_double(row[l_len], row_context(link_file, i));
    if (l_class >= 0 && !row[l_class].empty()) {
      link.road_class = parse_road_class(row[l_class]);
      if (!link.road_class)
        throw ValidationError(row_context(link_file, i) + ": unknown road class '" +
                              row[l_class] + "'");
    }
    links.push_back(std::move(link));
  }
  return Network::build(std::move(nodes), std::move(links));
}

void write_network(const std::filesystem::path& node_file, const std::filesystem::path& link_file,
                   const Network& network) {
  std::string nodes = "id\n";
  for (const Node& n : network.nodes()) nodes += n.id + "\n";
  write_text_file(node_file, nodes);

  std::string links = "id,from,to,length_m,road_class\n";
  for (const Link& l : network.links()) {
    links += l.id + "," + l.from + "," + l.to + "," + format_double(l.length_m) + ",";
    if (l.road_class) links += std::string(to_string(*l.road_class));
    links += "\n";
  }
  write_text_file(link_file, links);
}

SpeedProfile load_speeds(const std::filesystem::path& path, const Network& network, double delta_t,
                         double t_start, bool impute_missing) {
  const Table table = read_table(path);
  const std::string f = path.string();
  const int c_link = table.require_column("link_id", f);
  const int c_bin = table.require_column("bin", f);
  const int c_speed = table.require_column("speed_mps", f);

  int num_bins = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    num_bins = std::max(num_bins, parse_int(table.rows[i][c_bin], row_context(path, i)) + 1);
  if (num_bins == 0) throw ValidationError(f + ": no speed records");

  const std::size_t cells = static_cast<std::size_t>(network.num_links()) * num_bins;
  std::vector<double> speeds(cells, 0.0);
  std::vector<char> present(cells, 0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const int link = network.link_position(row[c_link]);
    const int bin = parse_int(row[c_bin], row_context(path, i));
    if (bin < 0) throw ValidationError(row_context(path, i) + ": negative bin");
    const double v = parse_double(row[c_speed], row_context(path, i));
    if (!(v > 0.0))
      throw ValidationError(row_context(path, i) + ": speed must be positive, got " +
                            row[c_speed]);
    const std::size_t cell = static_cast<std::size_t>(link) * num_bins + bin;
    if (present[cell])
      throw ValidationError(row_context(path, i) + ": duplicate (link, bin) entry");
    speeds[cell] = v;
    present[cell] = 1;
  }

  for (int l = 0; l < network.num_links(); ++l) {
    double sum = 0.0;
    int have = 0;
    for (int b = 0; b < num_bins; ++b) {
      const std::size_t cell = static_cast<std::size_t>(l) * num_bins + b;
      if (present[cell]) {
        sum += speeds[cell];
        ++have;
      }
    }
    if (have == num_bins) continue;
    if (!impute_missing)
      throw ValidationError(f + ": link '" + network.link(l).id + "' has " +
                            std::to_string(num_bins - have) + " missing speed bins");
    if (have == 0)
      throw ValidationError(f + ": link '" + network.link(l).id +
                            "' has no speeds to impute from");
    const double mean = sum / have;
    for (int b = 0; b < num_bins; ++b) {
      const std::size_t cell = static_cast<std::size_t>(l) * num_bins + b;
      if (!present[cell]) speeds[cell] = mean;
    }
  }
  return SpeedProfile(TimeGrid{t_start, delta_t, num_bins}, network.num_links(),
                      std::move(speeds));
}

void write_speeds(const std::filesystem::path& path, const Network& network,
                  const SpeedProfile& profile) {
  std::string out = "link_id,bin,speed_mps\n";
  for (int l = 0; l < network.num_links(); ++l)
    for (int b = 0; b < profile.grid().num_bins; ++b)
      out += network.link(l).id + "," + std::to_string(b) + "," +
             format_double(profile.speed(l, b)) + "\n";
  write_text_file(path, out);
}

DemandTable load_demands(const std::filesystem::path& path) {
  const Table table = read_table(path);
  const std::string f = path.string();
  const int c_o = table.require_column("origin", f);
  const int c_d = table.require_column("destination", f);
  const int c_bin = table.require_column("bin", f);
  const int c_q = table.require_column("demand", f);

  DemandTable out;
  std::map<std::pair<std::string, std::string>, int> od_index;
  int num_bins = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    num_bins = std::max(num_bins, parse_int(table.rows[i][c_bin], row_context(path, i)) + 1);
  out.num_bins = num_bins;

  std::vector<std::tuple<int, int, double>> records;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::pair<std::string, std::string> key{row[c_o], row[c_d]};
    auto it = od_index.find(key);
    int od;
    if (it == od_index.end()) {
      od = static_cast<int>(out.od_pairs.size());
      od_index.emplace(key, od);
      out.od_pairs.push_back({key.first, key.second});
    } else {
      od = it->second;
    }
    const int bin = parse_int(row[c_bin], row_context(path, i));
    records.emplace_back(od, bin, parse_double(row[c_q], row_context(path, i)));
  }
  out.q.assign(out.od_pairs.size() * static_cast<std::size_t>(num_bins), 0.0);
  for (const auto& [od, bin, v] : records) out.q[static_cast<std::size_t>(od) * num_bins + bin] = v;
  return out;
}

void write_demands(const std::filesystem::path& path, std::span<const ODPair> od_pairs,
                   std::span<const double> q, int num_bins) {
  std::string out = "origin,destination,bin,demand\n";
  for (std::size_t od = 0; od < od_pairs.size(); ++od)
    for (int b = 0; b < num_bins; ++b)
      out += od_pairs[od].origin + "," + od_pairs[od].destination + "," + std::to_string(b) + "," +
             format_double(q[od * num_bins + b]) + "\n";
  write_text_file(path, out);
}

std::vector<double> load_flows(const std::filesystem::path& path, const Network& network,
                               int num_bins, const std::string& value_column) {
  const Table table = read_table(path);
  const std::string f = path.string();
  const int c_link = table.require_column("link_id", f);
  const int c_bin = table.require_column("bin", f);
  const int c_val = table.require_column(value_column, f);
  if (num_bins <= 0) {
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      num_bins = std::max(num_bins, parse_int(table.rows[i][c_bin], row_context(path, i)) + 1);
    if (num_bins <= 0) throw ValidationError(f + ": no flow records");
  }
  std::vector<double> flows(static_cast<std::size_t>(network.num_links()) * num_bins, 0.0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const int link = network.link_position(row[c_link]);
    const int bin = parse_int(row[c_bin], row_context(path, i));
    if (bin < 0 || bin >= num_bins)
      throw ValidationError(row_context(path, i) + ": bin out of range");
    flows[static_cast<std::size_t>(link) * num_bins + bin] =
        parse_double(row[c_val], row_context(path, i));
  }
  return flows;
}

void write_flows(const std::filesystem::path& path, const Network& network, int num_bins,
                 std::span<const double> flows, const std::string& value_column) {
  std::string out = "link_id,bin," + value_column + "\n";
  for (int l = 0; l < network.num_links(); ++l)
    for (int b = 0; b < num_bins; ++b)
      out += network.link(l).id + "," + std::to_string(b) + "," +
             format_double(flows[static_cast<std::size_t>(l) * num_bins + b]) + "\n";
  write_text_file(path, out);
}

void write_observations(const std::filesystem::path& path, const Network& network,
                        const FlatIndex& index, const Observations& obs) {
  std::string out = "link_id,bin,flow_obs\n";
  for (std::size_t i = 0; i < obs.observed_link_rows.size(); ++i) {
    const auto [link, bin] = index.link_time_inverse(obs.observed_link_rows[i]);
    out += network.link(link).id + "," + std::to_string(bin) + "," + format_double(obs.x0[i]) +
           "\n";
  }
  write_text_file(path, out);
}

void load_observations(const std::filesystem::path& path, const Network& network,
                       const FlatIndex& index, Observations& obs) {
  const Table table = read_table(path);
  const std::string f = path.string();
  const int c_link = table.require_column("link_id", f);
  const int c_bin = table.require_column("bin", f);
  const int c_val = table.require_column("flow_obs", f);
  std::vector<std::pair<int, double>> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const int link = network.link_position(row[c_link]);
    const int bin = parse_int(row[c_bin], row_context(path, i));
    rows.emplace_back(index.link_time(link, bin), parse_double(row[c_val], row_context(path, i)));
  }
  std::sort(rows.begin(), rows.end());
  obs.observed_link_rows.clear();
  obs.x0.clear();
  for (const auto& [r, v] : rows) {
    obs.observed_link_rows.push_back(r);
    obs.x0.push_back(v);
  }
}

void write_sparse(const std::filesystem::path& path, const SparseMatrix& matrix) {
  std::string out = "rows cols nnz\n";
  out += std::to_string(matrix.rows()) + " " + std::to_string(matrix.cols()) + " " +
         std::to_string(matrix.nnz()) + "\n";
  for (const auto& t : matrix.triples())
    out += std::to_string(t.row) + " " + std::to_string(t.col) + " " + format_double(t.value) +
           "\n";
  write_text_file(path, out);
}

SparseMatrix read_sparse(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  if (header != "rows cols nnz" && header != "rows cols nnz\r")
    throw ValidationError(path.string() + ": bad sparse header");
  std::int64_t rows = -1, cols = -1, nnz = -1;
  in >> rows >> cols >> nnz;
  if (!in || rows < 0 || cols < 0 || nnz < 0)
    throw ValidationError(path.string() + ": bad sparse dimensions");
  SparseMatrix m(static_cast<int>(rows), static_cast<int>(cols));
  for (std::int64_t i = 0; i < nnz; ++i) {
    int r, c;
    double v;
    in >> r >> c >> v;
    if (!in) throw ValidationError(path.string() + ": truncated sparse entries");
    m.add(r, c, v);
  }
  m.finalize();
  return m;
}

void write_index_map(const std::filesystem::path& path, const FlatIndex& index,
                     const Network& network, std::span<const ODPair> od_pairs,
                     const TimeGrid& grid) {
  std::string out;
  out += "# flat index layouts\n";
  out += "# row(link_time) = link_position * num_bins + bin\n";
  out += "# col(od_time) = od_position * num_bins + bin\n";
  out += "# mid(path_time) = (od_position * paths_per_od + rank) * num_bins + bin\n";
  out += "num_bins " + std::to_string(index.num_bins()) + "\n";
  out += "delta_t " + format_double(grid.delta_t) + "\n";
  out += "t_start " + format_double(grid.t_start) + "\n";
  out += "paths_per_od " + std::to_string(index.paths_per_od()) + "\n";
  out += "links " + std::to_string(index.num_links()) + "\n";
  for (int l = 0; l < network.num_links(); ++l) out += network.link(l).id + "\n";
  out += "od_pairs " + std::to_string(index.num_od()) + "\n";
  for (const ODPair& od : od_pairs) out += od.origin + "," + od.destination + "\n";
  write_text_file(path, out);
}

namespace {

nlohmann::ordered_json config_to_json(const synth::ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["grid_rows"] = c.grid_rows;
  j["grid_cols"] = c.grid_cols;
  j["num_od"] = c.num_od;
  j["demand_range"] = c.demand_range;
  j["speed_range"] = c.speed_range;
  j["length_range"] = c.length_range;
  j["bins"] = c.bins;
  j["delta_t"] = c.delta_t;
  j["obs_fraction"] = c.obs_fraction;
  j["obs_bias"] = c.obs_bias;
  j["noise_std"] = c.noise_std;
  j["speed_mismatch"] = c.speed_mismatch;
  j["paths_per_od"] = c.paths_per_od;
  j["logit_alpha"] = c.logit_alpha;
  return j;
}

synth::ScenarioConfig config_from_json(const nlohmann::json& j) {
  synth::ScenarioConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.grid_rows = j.at("grid_rows").get<int>();
  c.grid_cols = j.at("grid_cols").get<int>();
  c.num_od = j.at("num_od").get<int>();
  c.demand_range = j.at("demand_range").get<std::array<double, 2>>();
  c.speed_range = j.at("speed_range").get<std::array<double, 2>>();
  c.length_range = j.at("length_range").get<std::array<double, 2>>();
  c.bins = j.at("bins").get<int>();
  c.delta_t = j.at("delta_t").get<double>();
  c.obs_fraction = j.at("obs_fraction").get<double>();
  c.obs_bias = j.at("obs_bias").get<bool>();
  c.noise_std = j.at("noise_std").get<double>();
  c.speed_mismatch = j.at("speed_mismatch").get<double>();
  c.paths_per_od = j.at("paths_per_od").get<int>();
  c.logit_alpha = j.at("logit_alpha").get<double>();
  return c;
}

}  // namespace

void write_scenario(const std::filesystem::path& dir, const synth::Scenario& scenario,
                    const synth::ScenarioConfig& config, const std::string& created_at) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());

  write_network(dir / "nodes.csv", dir / "links.csv", scenario.network);
  write_speeds(dir / "speeds.csv", scenario.network, scenario.profile);
  write_demands(dir / "demand_true.csv", scenario.od_pairs, scenario.q_true,
                scenario.index.num_bins());
  write_flows(dir / "flows_true.csv", scenario.network, scenario.index.num_bins(),
              scenario.x_true, "flow");
  write_observations(dir / "observations.csv", scenario.network, scenario.index,
                     scenario.observations);

  nlohmann::ordered_json manifest;
  manifest["format"] = "aor-scenario";
  manifest["version"] = 1;
  manifest["created_at"] = created_at;
  manifest["config"] = config_to_json(config);
  const std::string body = config_to_json(config).dump();
  manifest["config_hash"] = fnv1a(body.data(), body.size());
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedScenario load_scenario(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }
  LoadedScenario out;
  try {
    out.config = config_from_json(manifest.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }

  synth::Scenario& sc = out.scenario;
  sc.network = load_network(dir / "nodes.csv", dir / "links.csv");
  sc.profile = load_speeds(dir / "speeds.csv", sc.network, out.config.delta_t);

  const DemandTable demands = load_demands(dir / "demand_true.csv");
  sc.od_pairs = demands.od_pairs;
  sc.q_true = demands.q;

  const TimeGrid& grid = sc.profile.grid();
  if (demands.num_bins > grid.num_bins)
    throw ValidationError(dir.string() + ": demand bins exceed speed bins");

  sc.path_sets.reserve(sc.od_pairs.size());
  for (const ODPair& od : sc.od_pairs)
    sc.path_sets.push_back(
        k_shortest_paths(sc.network, sc.profile, od, out.config.paths_per_od, grid.t_start));
  sc.index = FlatIndex(sc.network.num_links(), grid.num_bins,
                       static_cast<int>(sc.od_pairs.size()), out.config.paths_per_od);

  const AssignmentWeights rho = build_rho(sc.network, sc.profile, sc.path_sets, sc.index);
  const PathChoice theta =
      build_theta(sc.network, sc.profile, sc.path_sets, sc.index, out.config.logit_alpha);
  sc.assignment = build_assignment(rho, theta);

  sc.x_true = load_flows(dir / "flows_true.csv", sc.network, grid.num_bins, "flow");
  load_observations(dir / "observations.csv", sc.network, sc.index, sc.observations);
  return out;
}

void write_flow_estimates(const std::filesystem::path& path, const Network& network, int num_bins,
                          std::span<const double> x) {
  write_flows(path, network, num_bins, x, "flow_est");
}

void write_demand_estimates(const std::filesystem::path& path, int num_od, int num_bins,
                            std::span<const double> q) {
  std::string out = "od_index,bin,demand_est\n";
  for (int od = 0; od < num_od; ++od)
    for (int b = 0; b < num_bins; ++b)
      out += std::to_string(od) + "," + std::to_string(b) + "," +
             format_double(q[static_cast<std::size_t>(od) * num_bins + b]) + "\n";
  write_text_file(path, out);
}

MetricsReport build_metrics_report(const metrics::FlowSeries& series,
                                   std::span<const std::optional<RoadClass>> classes) {
  MetricsReport report;
  report.global = metrics::wrme(series);
  report.by_class = metrics::wrme_by_class(series, classes);

  report.per_link_rme.resize(static_cast<std::size_t>(series.num_links));
  report.per_link_mae.resize(static_cast<std::size_t>(series.num_links));
  double max_mae = 0.0;
  for (int l = 0; l < series.num_links; ++l) {
    const std::span<const double> truth(series.truth.data() +
                                            static_cast<std::size_t>(l) * series.num_bins,
                                        static_cast<std::size_t>(series.num_bins));
    const std::span<const double> est(series.estimate.data() +
                                          static_cast<std::size_t>(l) * series.num_bins,
                                      static_cast<std::size_t>(series.num_bins));
    report.per_link_mae[l] = metrics::mae(truth, est);
    max_mae = std::max(max_mae, report.per_link_mae[l]);
    report.per_link_rme[l] = series.link_total(l) > 0.0
                                 ? metrics::rme(truth, est)
                                 : std::numeric_limits<double>::quiet_NaN();
  }

  const int buckets = static_cast<int>(std::floor(max_mae / report.mae_bucket_width)) + 1;
  report.mae_histogram.assign(static_cast<std::size_t>(buckets), 0);
  for (double m : report.per_link_mae)
    ++report.mae_histogram[static_cast<std::size_t>(m / report.mae_bucket_width)];
  return report;
}

void write_metrics_report(const std::filesystem::path& dir, const MetricsReport& report,
                          const Network& network) {
  std::string summary;
  summary += "global_wrme " + format_double(report.global.value) + "\n";
  summary += "excluded_zero_flow_links " + std::to_string(report.global.excluded_zero_flow_links) +
             "\n";
  for (const auto& [rc, r] : report.by_class)
    summary += "class_wrme " + std::string(to_string(rc)) + " " + format_double(r.value) + "\n";
  write_text_file(dir / "metrics_report.txt", summary);

  std::string per_link = "link_id,rme,mae\n";
  for (int l = 0; l < network.num_links(); ++l) {
    per_link += network.link(l).id + ",";
    per_link += std::isnan(report.per_link_rme[l]) ? "" : format_double(report.per_link_rme[l]);
    per_link += "," + format_double(report.per_link_mae[l]) + "\n";
  }
  write_text_file(dir / "per_link_metrics.csv", per_link);

  std::string hist = "mae_lo,mae_hi,link_count\n";
  for (std::size_t b = 0; b < report.mae_histogram.size(); ++b)
    hist += format_double(b * report.mae_bucket_width) + "," +
            format_double((b + 1) * report.mae_bucket_width) + "," +
            std::to_string(report.mae_histogram[b]) + "\n";
  write_text_file(dir / "mae_histogram.csv", hist);
}

}  // namespace aor::io
