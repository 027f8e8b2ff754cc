#include "aor/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "aor/common.hpp"

namespace aor {

std::optional<RoadClass> parse_road_class(std::string_view text) {
  if (text == "highway") return RoadClass::highway;
  if (text == "expressway") return RoadClass::expressway;
  if (text == "arterial") return RoadClass::arterial;
  if (text == "secondary") return RoadClass::secondary;
  if (text == "branch") return RoadClass::branch;
  if (text == "frontage") return RoadClass::frontage;
  if (text == "ramp") return RoadClass::ramp;
  return std::nullopt;
}

std::string_view to_string(RoadClass rc) {
  switch (rc) {
    case RoadClass::highway: return "highway";
    case RoadClass::expressway: return "expressway";
    case RoadClass::arterial: return "arterial";
    case RoadClass::secondary: return "secondary";
    case RoadClass::branch: return "branch";
    case RoadClass::frontage: return "frontage";
    case RoadClass::ramp: return "ramp";
  }
  return "?";
}

Network Network::build(std::vector<Node> nodes, std::vector<Link> links) {
  Network net;
  net.nodes_ = std::move(nodes);
  net.links_ = std::move(links);

  for (std::size_t i = 0; i < net.nodes_.size(); ++i) {
    const auto& id = net.nodes_[i].id;
    if (id.empty()) throw ValidationError("node with empty id");
    if (!net.node_index_.emplace(id, static_cast<int>(i)).second)
      throw ValidationError("duplicate node id '" + id + "'");
  }

  net.link_from_.resize(net.links_.size());
  net.link_to_.resize(net.links_.size());
  net.outgoing_.resize(net.nodes_.size());
  for (std::size_t i = 0; i < net.links_.size(); ++i) {
    const Link& l = net.links_[i];
    if (l.id.empty()) throw ValidationError("link with empty id");
    if (!net.link_index_.emplace(l.id, static_cast<int>(i)).second)
      throw ValidationError("duplicate link id '" + l.id + "'");
    if (!(l.length_m > 0.0) || !std::isfinite(l.length_m))
      throw ValidationError("link '" + l.id + "': length must be positive");
    if (l.from == l.to) throw ValidationError("link '" + l.id + "': self-loop");
    auto fi = net.node_index_.find(l.from);
    auto ti = net.node_index_.find(l.to);
    if (fi == net.node_index_.end())
      throw ValidationError("link '" + l.id + "': unknown from-node '" + l.from + "'");
    if (ti == net.node_index_.end())
      throw ValidationError("link '" + l.id + "': unknown to-node '" + l.to + "'");
    net.link_from_[i] = fi->second;
    net.link_to_[i] = ti->second;
    net.outgoing_[fi->second].push_back(static_cast<int>(i));
  }
  return net;
}

int Network::node_position(std::string_view id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) throw ValidationError("unknown node '" + std::string(id) + "'");
  return it->second;
}

int Network::link_position(std::string_view id) const {
  auto it = link_index_.find(id);
  if (it == link_index_.end()) throw ValidationError("unknown link '" + std::string(id) + "'");
  return it->second;
}

bool Network::has_node(std::string_view id) const {
  return node_index_.find(id) != node_index_.end();
}

std::span<const int> Network::outgoing(int node_pos) const { return outgoing_[node_pos]; }

void TimeGrid::validate() const {
  if (!(delta_t > 0.0) || !std::isfinite(delta_t)) throw ValidationError("TimeGrid: delta_t must be positive");
  if (num_bins < 1) throw ValidationError("TimeGrid: num_bins must be >= 1");
  if (!std::isfinite(t_start)) throw ValidationError("TimeGrid: t_start must be finite");
}

int TimeGrid::bin_of(double t) const {
  if (!contains(t))
    throw ValidationError("time " + format_double(t) + " outside horizon [" + format_double(t_start) +
                          ", " + format_double(horizon_end()) + ")");
  int b = static_cast<int>(std::floor((t - t_start) / delta_t));
  if (b >= num_bins) b = num_bins - 1;  // fp guard at the upper edge
  if (b < 0) b = 0;
  return b;
}

int TimeGrid::clamped_bin(double t) const {
  if (t < t_start) return 0;
  int b = static_cast<int>(std::floor((t - t_start) / delta_t));
  if (b >= num_bins) return num_bins - 1;
  return b < 0 ? 0 : b;
}

SpeedProfile::SpeedProfile(TimeGrid grid, int num_links, std::vector<double> speeds)
    : grid_(grid), num_links_(num_links), speeds_(std::move(speeds)) {
  grid_.validate();
  if (num_links_ < 0) throw ValidationError("SpeedProfile: negative link count");
  if (speeds_.size() != static_cast<std::size_t>(num_links_) * grid_.num_bins)
    throw ValidationError("SpeedProfile: expected " + std::to_string(num_links_) + "x" +
                          std::to_string(grid_.num_bins) + " speeds, got " +
                          std::to_string(speeds_.size()));
  for (double v : speeds_)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError("SpeedProfile: speeds must be positive and finite");
}

double SpeedProfile::speed_at(int link, double t) const { return speed(link, grid_.bin_of(t)); }

double SpeedProfile::speed_clamped(int link, double t) const {
  return speed(link, grid_.clamped_bin(t));
}

double link_travel_time(const Network& network, const SpeedProfile& profile, int link, double t) {
  return network.link(link).length_m / profile.speed_at(link, t);
}

ArrivalTimes path_arrival_times(const Network& network, const SpeedProfile& profile,
                                const Path& path, double t_o) {
  const TimeGrid& grid = profile.grid();
  if (t_o < grid.t_start || t_o > grid.horizon_end())
    throw ValidationError("path_arrival_times: departure " + format_double(t_o) +
                          " outside horizon");
  ArrivalTimes out;
  out.times.reserve(path.links.size() + 1);
  out.times.push_back(t_o);
  double t = t_o;
  for (int link : path.links) {
    if (!grid.contains(t)) ++out.clamped_lookups;
    t += network.link(link).length_m / profile.speed_clamped(link, t);
    out.times.push_back(t);
  }
  return out;
}

namespace {

// Dijkstra over node positions with per-call link/node exclusion masks.
// Relaxation is strict and links are scanned in dense order, so the result
// is deterministic for identical inputs.
struct DijkstraResult {
  bool reached = false;
  double cost = 0.0;
  std::vector<int> links;  // path as link positions
};

DijkstraResult dijkstra(const Network& net, std::span<const double> weights, int source,
                        int target, const std::vector<char>& node_banned,
                        const std::vector<char>& link_banned) {
  const int n = net.num_nodes();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<int> pred_link(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    if (u == target) break;
    for (int lp : net.outgoing(u)) {
      if (link_banned[lp]) continue;
      const int v = net.link_to(lp);
      if (node_banned[v]) continue;
      const double nd = d + weights[lp];
      if (nd < dist[v]) {
        dist[v] = nd;
        pred_link[v] = lp;
        heap.push({nd, v});
      }
    }
  }
  DijkstraResult res;
  if (dist[target] == kInf) return res;
  res.reached = true;
  res.cost = dist[target];
  for (int v = target; v != source;) {
    const int lp = pred_link[v];
    res.links.push_back(lp);
    v = net.link_from(lp);
  }
  std::reverse(res.links.begin(), res.links.end());
  return res;
}

}  // namespace

PathSet k_shortest_paths(const Network& network, const SpeedProfile& profile, const ODPair& od,
                         int k, double t_ref) {
  if (k < 1) throw ValidationError("k_shortest_paths: k must be >= 1");
  if (od.origin == od.destination) throw ValidationError("k_shortest_paths: origin == destination");
  const int source = network.node_position(od.origin);
  const int target = network.node_position(od.destination);

  // Edge weights frozen at t_ref.
  std::vector<double> weights(network.num_links());
  for (int lp = 0; lp < network.num_links(); ++lp)
    weights[lp] = network.link(lp).length_m / profile.speed_at(lp, t_ref);

  auto path_cost = [&](const std::vector<int>& links) {
    double c = 0.0;
    for (int lp : links) c += weights[lp];
    return c;
  };
  auto id_less = [&](const std::vector<int>& a, const std::vector<int>& b) {
    return std::lexicographical_compare(
        a.begin(), a.end(), b.begin(), b.end(),
        [&](int la, int lb) { return network.link(la).id < network.link(lb).id; });
  };
  // cost first, then lexicographic link-id sequence
  auto candidate_less = [&](const std::pair<double, std::vector<int>>& a,
                            const std::pair<double, std::vector<int>>& b) {
    if (a.first != b.first) return a.first < b.first;
    return id_less(a.second, b.second);
  };

  PathSet result{od, {}};
  std::vector<char> node_banned(network.num_nodes(), 0);
  std::vector<char> link_banned(network.num_links(), 0);

  DijkstraResult first = dijkstra(network, weights, source, target, node_banned, link_banned);
  if (!first.reached) return result;  // disconnected OD: empty set, excluded downstream

  std::vector<std::pair<double, std::vector<int>>> accepted;
  accepted.emplace_back(first.cost, std::move(first.links));

  std::vector<std::pair<double, std::vector<int>>> candidates;
  while (static_cast<int>(accepted.size()) < k) {
    const auto& prev = accepted.back().second;
    // spur from every node of the previous accepted path
    std::vector<int> root_nodes{source};
    for (int lp : prev) root_nodes.push_back(network.link_to(lp));
    for (std::size_t i = 0; i + 1 < root_nodes.size(); ++i) {
      const int spur = root_nodes[i];
      std::vector<int> root(prev.begin(), prev.begin() + i);
      std::fill(node_banned.begin(), node_banned.end(), 0);
      std::fill(link_banned.begin(), link_banned.end(), 0);
      // ban the next link of every accepted/candidate path sharing this root
      for (const auto& [cost, links] : accepted) {
        if (links.size() >= root.size() + 1 && std::equal(root.begin(), root.end(), links.begin()))
          link_banned[links[root.size()]] = 1;
      }
      // ban root nodes except the spur node to keep paths loopless
      for (std::size_t j = 0; j < i; ++j) node_banned[root_nodes[j]] = 1;

      DijkstraResult spur_res = dijkstra(network, weights, spur, target, node_banned, link_banned);
      if (!spur_res.reached) continue;
      std::vector<int> full = root;
      full.insert(full.end(), spur_res.links.begin(), spur_res.links.end());
      const double cost = path_cost(full);
      auto cand = std::make_pair(cost, std::move(full));
      bool dup = false;
      for (const auto& c : candidates)
        if (c.second == cand.second) { dup = true; break; }
      for (const auto& a : accepted)
        if (a.second == cand.second) { dup = true; break; }
      if (!dup) candidates.push_back(std::move(cand));
    }
    if (candidates.empty()) break;
    auto best = std::min_element(candidates.begin(), candidates.end(), candidate_less);
    accepted.push_back(std::move(*best));
    candidates.erase(best);
  }

  std::sort(accepted.begin(), accepted.end(), candidate_less);
  for (auto& [cost, links] : accepted) result.paths.push_back(Path{od, std::move(links)});
  return result;
}

}  // namespace aor
