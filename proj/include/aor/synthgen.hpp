#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "aor/assignment.hpp"
#include "aor/network.hpp"
#include "aor/recovery.hpp"
#include "aor/tuning.hpp"

namespace aor::synth {

/// Seeded stand-in for the simulation ground-truth pipeline: lattice
/// network, random speeds and demands, forward-mapped true flows, and a
/// sparse observation mask.
struct ScenarioConfig {
  std::uint64_t seed = 0;
  int grid_rows = 4;
  int grid_cols = 4;
  int num_od = 10;
  std::array<double, 2> demand_range{20.0, 80.0};
  std::array<double, 2> speed_range{8.0, 16.0};
  std::array<double, 2> length_range{200.0, 600.0};
  int bins = 12;
  double delta_t = 300.0;
  double obs_fraction = 0.0232;
  bool obs_bias = false;  // sensor placement weighted by link flow
  double noise_std = 0.0;
  /// Relative perturbation of the generating speeds before recovery; zero
  /// keeps the exact forward-map (inverse-crime) setup.
  double speed_mismatch = 0.0;
  int paths_per_od = 3;
  double logit_alpha = 0.01;

  void validate() const;
};

struct Scenario {
  Network network;
  SpeedProfile profile;  // what recovery consumes
  std::vector<ODPair> od_pairs;
  std::vector<PathSet> path_sets;
  FlatIndex index;
  AssignmentMatrix assignment;   // built from `profile`
  std::vector<double> q_true;    // (od, bin) layout
  std::vector<double> x_true;    // (link, bin) layout, forward-mapped
  Observations observations;
};

Scenario generate(const ScenarioConfig& config);

/// Scenarios sharing the base scenario's network, OD list, and sensor rows,
/// with independently reseeded speeds, demands, and noise.
std::vector<Scenario> generate_family(const ScenarioConfig& config, int count);

/// generate_family mapped into per-sample training inputs.
std::vector<tuning::TrainingSample> split_samples(const ScenarioConfig& config, int count);

tuning::TrainingSample to_training_sample(const Scenario& scenario, std::string label);

}  // namespace aor::synth
