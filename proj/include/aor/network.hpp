#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aor {

enum class RoadClass { highway, expressway, arterial, secondary, branch, frontage, ramp };

std::optional<RoadClass> parse_road_class(std::string_view text);
std::string_view to_string(RoadClass rc);

struct Node {
  std::string id;
};

struct Link {
  std::string id;
  std::string from;
  std::string to;
  double length_m = 0.0;
  std::optional<RoadClass> road_class;
};

/// Directed road graph. Links keep the dense positions assigned at
/// construction (file order); everything downstream indexes by position.
/// Immutable after construction.
class Network {
 public:
  static Network build(std::vector<Node> nodes, std::vector<Link> links);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_links() const { return static_cast<int>(links_.size()); }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(int pos) const { return links_[pos]; }

  int node_position(std::string_view id) const;
  int link_position(std::string_view id) const;
  bool has_node(std::string_view id) const;

  int link_from(int pos) const { return link_from_[pos]; }
  int link_to(int pos) const { return link_to_[pos]; }

  /// Outgoing link positions of a node, ascending by link position.
  std::span<const int> outgoing(int node_pos) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::map<std::string, int, std::less<>> node_index_;
  std::map<std::string, int, std::less<>> link_index_;
  std::vector<int> link_from_;
  std::vector<int> link_to_;
  std::vector<std::vector<int>> outgoing_;
};

/// Discretization of the planning horizon: bin b covers
/// [t_start + b*delta_t, t_start + (b+1)*delta_t).
struct TimeGrid {
  double t_start = 0.0;
  double delta_t = 0.0;
  int num_bins = 0;

  double horizon_end() const { return t_start + delta_t * num_bins; }
  bool contains(double t) const { return t >= t_start && t < horizon_end(); }

  /// Bin containing t; t must lie in the horizon.
  int bin_of(double t) const;
  /// Bin containing t, clamped to [0, num_bins-1] for out-of-horizon t.
  int clamped_bin(double t) const;
  double bin_start(int bin) const { return t_start + delta_t * bin; }

  void validate() const;
};

/// Per-link, per-bin speeds over the planning horizon. All speeds are
/// strictly positive (validated at construction). Immutable.
class SpeedProfile {
 public:
  SpeedProfile() = default;
  /// speeds is link-major: speeds[link * num_bins + bin].
  SpeedProfile(TimeGrid grid, int num_links, std::vector<double> speeds);

  const TimeGrid& grid() const { return grid_; }
  int num_links() const { return num_links_; }

  double speed(int link, int bin) const { return speeds_[static_cast<std::size_t>(link) * grid_.num_bins + bin]; }
  /// Speed at clock time t; throws if t is outside the horizon.
  double speed_at(int link, double t) const;
  /// Speed at clock time t with the bin clamped into the horizon.
  double speed_clamped(int link, double t) const;

  std::span<const double> raw() const { return speeds_; }

 private:
  TimeGrid grid_;
  int num_links_ = 0;
  std::vector<double> speeds_;
};

struct ODPair {
  std::string origin;
  std::string destination;
  bool operator==(const ODPair&) const = default;
};

/// A simple directed walk from the OD origin to its destination, stored as
/// link positions. The link-incidence indicator is implicit in membership.
struct Path {
  ODPair od;
  std::vector<int> links;
};

/// Candidate paths of one OD pair, ascending by travel time at the
/// enumeration reference time.
struct PathSet {
  ODPair od;
  std::vector<Path> paths;
};

/// Travel time of one link entered at clock time t: length / speed(bin of t).
/// Throws ValidationError when t is outside the horizon.
double link_travel_time(const Network& network, const SpeedProfile& profile, int link, double t);

struct ArrivalTimes {
  /// times[0] = departure; times[i] = entry to path link i; times.back() =
  /// exit time at the destination. Size = path length + 1.
  std::vector<double> times;
  /// Number of speed lookups that fell past the horizon and reused the
  /// final bin's speed.
  int clamped_lookups = 0;
};

/// Walk a path departing at t_o, sampling each link's speed at the bin of
/// its entry time. Entries past the horizon reuse the last bin's speed.
/// t_o must lie in [t_start, horizon_end].
ArrivalTimes path_arrival_times(const Network& network, const SpeedProfile& profile,
                                const Path& path, double t_o);

/// K loopless shortest paths (Yen over a Dijkstra core) with edge weights
/// frozen at reference time t_ref. Returns fewer than k paths when the
/// graph admits fewer; an unreachable destination yields an empty set.
/// Equal-cost paths are ordered lexicographically by link-id sequence.
PathSet k_shortest_paths(const Network& network, const SpeedProfile& profile, const ODPair& od,
                         int k, double t_ref);

}  // namespace aor
