#include "aor/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aor/common.hpp"

namespace aor::synth {

void ScenarioConfig::validate() const {
  if (grid_rows < 2 || grid_cols < 2)
    throw ValidationError("ScenarioConfig: lattice must be at least 2x2");
  if (num_od < 1) throw ValidationError("ScenarioConfig: num_od must be >= 1");
  const std::int64_t nodes = static_cast<std::int64_t>(grid_rows) * grid_cols;
  if (num_od > nodes * (nodes - 1))
    throw ValidationError("ScenarioConfig: num_od exceeds the number of ordered node pairs");
  if (!(demand_range[0] >= 0.0) || !(demand_range[1] >= demand_range[0]))
    throw ValidationError("ScenarioConfig: demand_range must be ordered and non-negative");
  if (!(speed_range[0] > 0.0) || !(speed_range[1] >= speed_range[0]))
    throw ValidationError("ScenarioConfig: speed_range must be ordered and positive");
  if (!(length_range[0] > 0.0) || !(length_range[1] >= length_range[0]))
    throw ValidationError("ScenarioConfig: length_range must be ordered and positive");
  if (bins < 1) throw ValidationError("ScenarioConfig: bins must be >= 1");
  if (!(delta_t > 0.0)) throw ValidationError("ScenarioConfig: delta_t must be positive");
  if (!(obs_fraction > 0.0) || obs_fraction > 1.0)
    throw ValidationError("ScenarioConfig: obs_fraction must lie in (0, 1]");
  if (noise_std < 0.0) throw ValidationError("ScenarioConfig: noise_std must be non-negative");
  if (speed_mismatch < 0.0 || speed_mismatch >= 1.0)
    throw ValidationError("ScenarioConfig: speed_mismatch must lie in [0, 1)");
  if (paths_per_od < 1) throw ValidationError("ScenarioConfig: paths_per_od must be >= 1");
  if (!(logit_alpha > 0.0)) throw ValidationError("ScenarioConfig: logit_alpha must be positive");
}

namespace {

std::string node_name(int r, int c) { return "n" + std::to_string(r) + "_" + std::to_string(c); }

// Bidirectional lattice. Horizontal links are arterial (the middle row is
// highway), vertical links secondary, so class-level metrics have several
// populated classes to report on.
Network make_lattice(const ScenarioConfig& cfg, Rng& rng) {
  std::vector<Node> nodes;
  for (int r = 0; r < cfg.grid_rows; ++r)
    for (int c = 0; c < cfg.grid_cols; ++c) nodes.push_back({node_name(r, c)});

  std::vector<Link> links;
  auto add_pair = [&](int r1, int c1, int r2, int c2, RoadClass rc) {
    const double length = rng.uniform(cfg.length_range[0], cfg.length_range[1]);
    const std::string a = node_name(r1, c1);
    const std::string b = node_name(r2, c2);
    links.push_back({a + ">" + b, a, b, length, rc});
    links.push_back({b + ">" + a, b, a, length, rc});
  };
  const int highway_row = cfg.grid_rows / 2;
  for (int r = 0; r < cfg.grid_rows; ++r) {
    for (int c = 0; c < cfg.grid_cols; ++c) {
      if (c + 1 < cfg.grid_cols)
        add_pair(r, c, r, c + 1, r == highway_row ? RoadClass::highway : RoadClass::arterial);
      if (r + 1 < cfg.grid_rows) add_pair(r, c, r + 1, c, RoadClass::secondary);
    }
  }
  return Network::build(std::move(nodes), std::move(links));
}

std::vector<ODPair> sample_od_pairs(const Network& net, int count, Rng& rng) {
  const int n = net.num_nodes();
  std::vector<ODPair> out;
  std::vector<char> used(static_cast<std::size_t>(n) * n, 0);
  while (static_cast<int>(out.size()) < count) {
    const int o = static_cast<int>(rng.uniform_int(n));
    const int d = static_cast<int>(rng.uniform_int(n));
    if (o == d) continue;
    const std::size_t key = static_cast<std::size_t>(o) * n + d;
    if (used[key]) continue;
    used[key] = 1;
    out.push_back({net.nodes()[o].id, net.nodes()[d].id});
  }
  return out;
}

std::vector<double> sample_speeds(const ScenarioConfig& cfg, int num_links, Rng& rng) {
  std::vector<double> speeds(static_cast<std::size_t>(num_links) * cfg.bins);
  for (double& v : speeds) v = rng.uniform(cfg.speed_range[0], cfg.speed_range[1]);
  return speeds;
}

// Observation rows: uniform without replacement, or weighted by the row's
// link total flow when biased placement is requested.
std::vector<int> sample_observed_rows(const ScenarioConfig& cfg, const FlatIndex& index,
                                      std::span<const double> x_true, Rng& rng) {
  const int total_rows = index.link_time_count();
  int count = static_cast<int>(std::llround(cfg.obs_fraction * total_rows));
  count = std::clamp(count, 1, total_rows);

  std::vector<int> rows;
  if (!cfg.obs_bias) {
    std::vector<int> all(static_cast<std::size_t>(total_rows));
    for (int i = 0; i < total_rows; ++i) all[i] = i;
    for (int i = 0; i < count; ++i) {
      const auto j = i + rng.uniform_int(total_rows - i);
      std::swap(all[i], all[j]);
    }
    rows.assign(all.begin(), all.begin() + count);
  } else {
    std::vector<double> link_flow(static_cast<std::size_t>(index.num_links()), 0.0);
    for (int row = 0; row < total_rows; ++row)
      link_flow[index.link_time_inverse(row).first] += x_true[row];
    std::vector<double> weight(static_cast<std::size_t>(total_rows));
    for (int row = 0; row < total_rows; ++row)
      weight[row] = link_flow[index.link_time_inverse(row).first] + 1e-9;
    std::vector<char> taken(static_cast<std::size_t>(total_rows), 0);
    double remaining = 0.0;
    for (double w : weight) remaining += w;
    for (int i = 0; i < count; ++i) {
      double target = rng.uniform() * remaining;
      int pick = -1;
      for (int row = 0; row < total_rows; ++row) {
        if (taken[row]) continue;
        target -= weight[row];
        if (target <= 0.0) {
          pick = row;
          break;
        }
      }
      if (pick < 0)
        for (int row = total_rows - 1; row >= 0; --row)
          if (!taken[row]) {
            pick = row;
            break;
          }
      taken[pick] = 1;
      remaining -= weight[pick];
    }
    for (int row = 0; row < total_rows; ++row)
      if (taken[row]) rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

Scenario assemble_scenario(const ScenarioConfig& cfg, Network network,
                           std::vector<ODPair> od_pairs, Rng& rng,
                           const std::vector<int>* fixed_rows) {
  const TimeGrid grid{0.0, cfg.delta_t, cfg.bins};

  Scenario sc;
  sc.network = std::move(network);
  sc.od_pairs = std::move(od_pairs);

  std::vector<double> speeds = sample_speeds(cfg, sc.network.num_links(), rng);
  sc.profile = SpeedProfile(grid, sc.network.num_links(), speeds);

  sc.path_sets.reserve(sc.od_pairs.size());
  for (const ODPair& od : sc.od_pairs)
    sc.path_sets.push_back(
        k_shortest_paths(sc.network, sc.profile, od, cfg.paths_per_od, grid.t_start));

  sc.index = FlatIndex(sc.network.num_links(), cfg.bins, static_cast<int>(sc.od_pairs.size()),
                       cfg.paths_per_od);

  const AssignmentWeights rho = build_rho(sc.network, sc.profile, sc.path_sets, sc.index);
  const PathChoice theta =
      build_theta(sc.network, sc.profile, sc.path_sets, sc.index, cfg.logit_alpha);
  sc.assignment = build_assignment(rho, theta);

  sc.q_true.resize(static_cast<std::size_t>(sc.index.od_time_count()));
  for (double& v : sc.q_true) v = rng.uniform(cfg.demand_range[0], cfg.demand_range[1]);

  if (cfg.speed_mismatch > 0.0) {
    // ground truth produced by a perturbed forward map
    std::vector<double> gen_speeds = speeds;
    for (double& v : gen_speeds) v *= 1.0 + cfg.speed_mismatch * rng.uniform(-1.0, 1.0);
    const SpeedProfile gen_profile(grid, sc.network.num_links(), std::move(gen_speeds));
    const AssignmentWeights gen_rho = build_rho(sc.network, gen_profile, sc.path_sets, sc.index);
    const PathChoice gen_theta =
        build_theta(sc.network, gen_profile, sc.path_sets, sc.index, cfg.logit_alpha);
    sc.x_true = apply_assignment(build_assignment(gen_rho, gen_theta), sc.q_true);
  } else {
    sc.x_true = apply_assignment(sc.assignment, sc.q_true);
  }

  sc.observations.observed_link_rows =
      fixed_rows ? *fixed_rows : sample_observed_rows(cfg, sc.index, sc.x_true, rng);
  sc.observations.x0.reserve(sc.observations.observed_link_rows.size());
  for (int row : sc.observations.observed_link_rows) {
    double v = sc.x_true[row];
    if (cfg.noise_std > 0.0) v += rng.normal(0.0, cfg.noise_std);
    sc.observations.x0.push_back(std::max(0.0, v));
  }
  return sc;
}

}  // namespace

Scenario generate(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.seed);
  Network network = make_lattice(config, rng);
  std::vector<ODPair> od_pairs = sample_od_pairs(network, config.num_od, rng);
  return assemble_scenario(config, std::move(network), std::move(od_pairs), rng, nullptr);
}

std::vector<Scenario> generate_family(const ScenarioConfig& config, int count) {
  if (count < 1) throw ValidationError("generate_family: count must be >= 1");
  config.validate();

  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(count));
  Scenario base = generate(config);
  const std::vector<int> sensor_rows = base.observations.observed_link_rows;
  const Network base_network = base.network;
  const std::vector<ODPair> base_ods = base.od_pairs;
  out.push_back(std::move(base));

  for (int i = 1; i < count; ++i) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(i)));
    out.push_back(assemble_scenario(config, base_network, base_ods, rng, &sensor_rows));
  }
  return out;
}

std::vector<tuning::TrainingSample> split_samples(const ScenarioConfig& config, int count) {
  std::vector<Scenario> family = generate_family(config, count);
  std::vector<tuning::TrainingSample> samples;
  samples.reserve(family.size());
  for (std::size_t i = 0; i < family.size(); ++i)
    samples.push_back(to_training_sample(family[i], "sample" + std::to_string(i)));
  return samples;
}

tuning::TrainingSample to_training_sample(const Scenario& scenario, std::string label) {
  return {scenario.assignment, scenario.observations, std::move(label)};
}

}  // namespace aor::synth
