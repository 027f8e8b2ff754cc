// Small hand-built networks and profiles shared by the unit suites.
#pragma once

#include <string>
#include <vector>

#include "aor/network.hpp"

namespace fixtures {

/// Chain n0 -> n1 -> ... with one link per hop ("l0", "l1", ...).
inline aor::Network line_network(const std::vector<double>& lengths) {
  std::vector<aor::Node> nodes;
  for (std::size_t i = 0; i <= lengths.size(); ++i) nodes.push_back({"n" + std::to_string(i)});
  std::vector<aor::Link> links;
  for (std::size_t i = 0; i < lengths.size(); ++i)
    links.push_back({"l" + std::to_string(i), "n" + std::to_string(i), "n" + std::to_string(i + 1),
                     lengths[i], {}});
  return aor::Network::build(std::move(nodes), std::move(links));
}

/// Two disjoint 2-link routes s -> a -> t and s -> b -> t.
inline aor::Network diamond_network(double up_len = 100.0, double down_len = 200.0) {
  std::vector<aor::Node> nodes{{"s"}, {"a"}, {"b"}, {"t"}};
  std::vector<aor::Link> links{
      {"sa", "s", "a", up_len, {}},
      {"at", "a", "t", up_len, {}},
      {"sb", "s", "b", down_len, {}},
      {"bt", "b", "t", down_len, {}},
  };
  return aor::Network::build(std::move(nodes), std::move(links));
}

inline aor::SpeedProfile constant_profile(const aor::Network& net, aor::TimeGrid grid,
                                          double speed) {
  std::vector<double> speeds(static_cast<std::size_t>(net.num_links()) * grid.num_bins, speed);
  return aor::SpeedProfile(grid, net.num_links(), std::move(speeds));
}

/// Per-link, per-bin speeds given link-major.
inline aor::SpeedProfile profile_from(const aor::Network& net, aor::TimeGrid grid,
                                      std::vector<double> speeds) {
  return aor::SpeedProfile(grid, net.num_links(), std::move(speeds));
}

}  // namespace fixtures
