#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "aor/common.hpp"
#include "aor/synthgen.hpp"
#include "oracles.hpp"

using namespace aor;
using synth::Scenario;
using synth::ScenarioConfig;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig cfg;
  cfg.seed = 7;
  cfg.grid_rows = 3;
  cfg.grid_cols = 3;
  cfg.num_od = 6;
  cfg.bins = 6;
  cfg.obs_fraction = 0.1;
  cfg.paths_per_od = 2;
  return cfg;
}

}  // namespace

TEST_CASE("generate: identical seeds give identical scenarios") {
  const Scenario a = synth::generate(small_config());
  const Scenario b = synth::generate(small_config());
  CHECK(a.q_true == b.q_true);
  CHECK(a.x_true == b.x_true);
  CHECK(a.observations.observed_link_rows == b.observations.observed_link_rows);
  CHECK(a.observations.x0 == b.observations.x0);
  CHECK(a.assignment.A.triples() == b.assignment.A.triples());

  ScenarioConfig other = small_config();
  other.seed = 8;
  const Scenario c = synth::generate(other);
  CHECK(a.q_true != c.q_true);
}

TEST_CASE("generate: full noiseless observation reproduces the truth") {
  ScenarioConfig cfg = small_config();
  cfg.obs_fraction = 1.0;
  cfg.noise_std = 0.0;
  const Scenario sc = synth::generate(cfg);
  REQUIRE(sc.observations.observed_link_rows.size() == sc.x_true.size());
  for (std::size_t i = 0; i < sc.observations.x0.size(); ++i)
    CHECK(sc.observations.x0[i] == sc.x_true[sc.observations.observed_link_rows[i]]);
}

TEST_CASE("generate: forward map consistency x_true = A q_true") {
  const Scenario sc = synth::generate(small_config());
  const auto x = apply_assignment(sc.assignment, sc.q_true);
  REQUIRE(x.size() == sc.x_true.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - sc.x_true[i]) <= 1e-10);
}

TEST_CASE("generate: dense recomputation oracle on a 4x4 lattice") {
  ScenarioConfig cfg;
  cfg.seed = 42;
  cfg.grid_rows = 4;
  cfg.grid_cols = 4;
  cfg.num_od = 10;
  cfg.bins = 12;
  cfg.paths_per_od = 2;
  cfg.obs_fraction = 0.05;
  const Scenario sc = synth::generate(cfg);

  // independent dense rho * theta * q using the dense oracle helpers
  const auto rho = build_rho(sc.network, sc.profile, sc.path_sets, sc.index);
  const auto theta = build_theta(sc.network, sc.profile, sc.path_sets, sc.index, cfg.logit_alpha);
  const auto rho_d = oracles::to_dense(rho.rho);
  const auto theta_d = oracles::to_dense(theta.theta);
  const auto a_d = oracles::matmul(rho_d, theta_d);
  std::vector<double> want(static_cast<std::size_t>(a_d.rows), 0.0);
  for (int i = 0; i < a_d.rows; ++i)
    for (int j = 0; j < a_d.cols; ++j) want[i] += a_d.at(i, j) * sc.q_true[j];
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(want[i] - sc.x_true[i]) <= 1e-9);
}

TEST_CASE("generate: observation count and uniqueness") {
  ScenarioConfig cfg = small_config();
  cfg.obs_fraction = 0.0232;
  const Scenario sc = synth::generate(cfg);
  const int total = sc.index.link_time_count();
  const auto want = std::llround(0.0232 * total);
  const auto got = static_cast<long long>(sc.observations.observed_link_rows.size());
  CHECK(std::abs(got - want) <= 1);
  std::set<int> unique(sc.observations.observed_link_rows.begin(),
                       sc.observations.observed_link_rows.end());
  CHECK(unique.size() == sc.observations.observed_link_rows.size());
  for (int row : sc.observations.observed_link_rows) {
    CHECK(row >= 0);
    CHECK(row < total);
  }
}

TEST_CASE("generate: flow-biased sensors concentrate on high-flow links") {
  ScenarioConfig cfg = small_config();
  cfg.grid_rows = 4;
  cfg.grid_cols = 4;
  cfg.num_od = 12;
  cfg.obs_fraction = 0.15;
  cfg.obs_bias = false;
  const Scenario uniform = synth::generate(cfg);
  cfg.obs_bias = true;
  const Scenario biased = synth::generate(cfg);

  auto observed_flow_share = [](const Scenario& sc) {
    double total = 0.0;
    for (double v : sc.x_true) total += v;
    double observed = 0.0;
    for (int row : sc.observations.observed_link_rows) observed += sc.x_true[row];
    return observed / total;
  };
  CHECK(observed_flow_share(biased) > observed_flow_share(uniform));
}

TEST_CASE("generate: noise is truncated at zero") {
  ScenarioConfig cfg = small_config();
  cfg.noise_std = 50.0;
  cfg.demand_range = {1.0, 5.0};
  const Scenario sc = synth::generate(cfg);
  for (double v : sc.observations.x0) CHECK(v >= 0.0);
}

TEST_CASE("generate: speed mismatch breaks the inverse crime") {
  ScenarioConfig cfg = small_config();
  cfg.speed_mismatch = 0.2;
  const Scenario sc = synth::generate(cfg);
  const auto x_model = apply_assignment(sc.assignment, sc.q_true);
  double diff = 0.0;
  for (std::size_t i = 0; i < x_model.size(); ++i) diff += std::abs(x_model[i] - sc.x_true[i]);
  CHECK(diff > 1.0);
}

TEST_CASE("generate: config validation") {
  ScenarioConfig bad = small_config();
  bad.obs_fraction = 0.0;
  CHECK_THROWS_AS(synth::generate(bad), ValidationError);
  ScenarioConfig bad2 = small_config();
  bad2.num_od = 9 * 8 + 1;
  CHECK_THROWS_AS(synth::generate(bad2), ValidationError);
  ScenarioConfig bad3 = small_config();
  bad3.speed_range = {10.0, 5.0};
  CHECK_THROWS_AS(synth::generate(bad3), ValidationError);
}

TEST_CASE("generate_family: shared structure, fresh randomness") {
  const auto family = synth::generate_family(small_config(), 5);
  REQUIRE(family.size() == 5);
  for (const auto& sc : family) {
    CHECK(sc.network.num_links() == family[0].network.num_links());
    for (int l = 0; l < sc.network.num_links(); ++l)
      CHECK(sc.network.link(l).id == family[0].network.link(l).id);
    CHECK(sc.od_pairs == family[0].od_pairs);
    CHECK(sc.observations.observed_link_rows == family[0].observations.observed_link_rows);
  }
  CHECK(family[1].q_true != family[0].q_true);
  const auto raw0 = family[0].profile.raw();
  const auto raw1 = family[1].profile.raw();
  CHECK_FALSE(std::equal(raw1.begin(), raw1.end(), raw0.begin(), raw0.end()));
}

TEST_CASE("split_samples: 24 samples with distinct demands") {
  const auto samples = synth::split_samples(small_config(), 24);
  REQUIRE(samples.size() == 24);
  std::set<std::string> labels;
  for (const auto& s : samples) {
    labels.insert(s.label);
    CHECK(s.assignment.A.rows() == samples[0].assignment.A.rows());
    CHECK(s.assignment.A.cols() == samples[0].assignment.A.cols());
    CHECK(!s.obs.observed_link_rows.empty());
  }
  CHECK(labels.size() == 24);
  CHECK(samples[0].obs.x0 != samples[1].obs.x0);

  const auto single = synth::split_samples(small_config(), 1);
  CHECK(single.size() == 1);
}
