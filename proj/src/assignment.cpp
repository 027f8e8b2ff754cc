#include "aor/assignment.hpp"

#include <algorithm>
#include <cmath>

#include "aor/common.hpp"

namespace aor {

ArrivalWindow arrival_window(const Network& network, const SpeedProfile& profile, const Path& path,
                             int link, double t_o, double delta_t) {
  auto it = std::find(path.links.begin(), path.links.end(), link);
  if (it == path.links.end())
    throw ValidationError("arrival_window: link " + network.link(link).id + " not on path");
  const auto idx = static_cast<std::size_t>(it - path.links.begin());
  const ArrivalTimes lo = path_arrival_times(network, profile, path, t_o);
  const ArrivalTimes hi = path_arrival_times(network, profile, path, t_o + delta_t);
  ArrivalWindow w;
  w.begin = lo.times[idx];
  w.end = hi.times[idx];
  if (w.end < w.begin) {
    w.end = w.begin;
    w.inverted = true;
  }
  return w;
}

double rho_entry(const ArrivalWindow& window, double bin_start, double bin_end) {
  if (window.end < window.begin) throw ValidationError("rho_entry: inverted window");
  if (window.end == window.begin)
    return (window.begin >= bin_start && window.begin < bin_end) ? 1.0 : 0.0;
  const double lo = std::max(window.begin, bin_start);
  const double hi = std::min(window.end, bin_end);
  if (hi <= lo) return 0.0;
  return (hi - lo) / (window.end - window.begin);
}

AssignmentWeights build_rho(const Network& network, const SpeedProfile& profile,
                            std::span<const PathSet> path_sets, const FlatIndex& index) {
  const TimeGrid& grid = profile.grid();
  if (index.num_bins() != grid.num_bins || index.num_links() != network.num_links() ||
      index.num_od() != static_cast<int>(path_sets.size()))
    throw ValidationError("build_rho: index does not match inputs");

  SparseMatrix rho(index.link_time_count(), index.path_time_count());
  int inverted = 0;
  for (int od = 0; od < static_cast<int>(path_sets.size()); ++od) {
    const PathSet& ps = path_sets[od];
    if (static_cast<int>(ps.paths.size()) > index.paths_per_od())
      throw ValidationError("build_rho: path set exceeds the per-OD budget");
    for (int rank = 0; rank < static_cast<int>(ps.paths.size()); ++rank) {
      const Path& path = ps.paths[rank];
      for (int t_o = 0; t_o < grid.num_bins; ++t_o) {
        const int col = index.path_time(od, rank, t_o);
        const ArrivalTimes lo = path_arrival_times(network, profile, path, grid.bin_start(t_o));
        const ArrivalTimes hi =
            path_arrival_times(network, profile, path, grid.bin_start(t_o) + grid.delta_t);
        for (std::size_t li = 0; li < path.links.size(); ++li) {
          ArrivalWindow w{lo.times[li], hi.times[li], false};
          if (w.end < w.begin) {
            w.end = w.begin;
            ++inverted;
          }
          // bins the window can touch, clipped into the horizon
          const int first_bin = std::max(0, grid.clamped_bin(w.begin));
          const int last_bin = std::min(grid.num_bins - 1, grid.clamped_bin(w.end));
          if (w.begin >= grid.horizon_end()) continue;  // arrival past the horizon: mass lost
          for (int b = first_bin; b <= last_bin; ++b) {
            const double v = rho_entry(w, grid.bin_start(b), grid.bin_start(b) + grid.delta_t);
            if (v > kRhoDropTol) rho.add(index.link_time(path.links[li], b), col, v);
          }
        }
      }
    }
  }
  rho.finalize(kRhoDropTol);
  return AssignmentWeights{std::move(rho), inverted};
}

std::vector<double> path_choice_fraction(const Network& network, const SpeedProfile& profile,
                                         const PathSet& path_set, double t_o, double alpha) {
  if (path_set.paths.empty()) throw ValidationError("path_choice_fraction: empty path set");
  if (!(alpha > 0.0)) throw ValidationError("path_choice_fraction: alpha must be positive");
  std::vector<double> scores(path_set.paths.size());
  for (std::size_t i = 0; i < path_set.paths.size(); ++i) {
    const ArrivalTimes at = path_arrival_times(network, profile, path_set.paths[i], t_o);
    scores[i] = -alpha * (at.times.back() - t_o);
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - m);
    sum += s;
  }
  for (double& s : scores) s /= sum;
  return scores;
}

PathChoice build_theta(const Network& network, const SpeedProfile& profile,
                       std::span<const PathSet> path_sets, const FlatIndex& index, double alpha) {
  const TimeGrid& grid = profile.grid();
  if (index.num_bins() != grid.num_bins || index.num_od() != static_cast<int>(path_sets.size()))
    throw ValidationError("build_theta: index does not match inputs");
  SparseMatrix theta(index.path_time_count(), index.od_time_count());
  for (int od = 0; od < static_cast<int>(path_sets.size()); ++od) {
    const PathSet& ps = path_sets[od];
    if (ps.paths.empty()) continue;  // disconnected OD: no columns
    for (int t_o = 0; t_o < grid.num_bins; ++t_o) {
      const std::vector<double> shares =
          path_choice_fraction(network, profile, ps, grid.bin_start(t_o), alpha);
      const int col = index.od_time(od, t_o);
      for (int rank = 0; rank < static_cast<int>(shares.size()); ++rank)
        theta.add(index.path_time(od, rank, t_o), col, shares[rank]);
    }
  }
  theta.finalize();
  return PathChoice{std::move(theta), alpha};
}

AssignmentMatrix build_assignment(const AssignmentWeights& weights, const PathChoice& choice) {
  if (weights.rho.cols() != choice.theta.rows())
    throw ValidationError("build_assignment: rho columns (" + std::to_string(weights.rho.cols()) +
                          ") do not match theta rows (" + std::to_string(choice.theta.rows()) + ")");
  AssignmentMatrix out;
  out.A = weights.rho.multiply(choice.theta);
  out.rho_hash = weights.rho.content_hash();
  out.theta_hash = choice.theta.content_hash();
  return out;
}

std::vector<double> apply_assignment(const AssignmentMatrix& assignment, std::span<const double> q) {
  if (static_cast<int>(q.size()) != assignment.A.cols())
    throw ValidationError("apply_assignment: demand dimension mismatch");
  std::vector<double> x(static_cast<std::size_t>(assignment.A.rows()), 0.0);
  assignment.A.multiply_vector(q, x);
  return x;
}

PathFlowVector path_flows(const PathChoice& choice, std::span<const double> q) {
  if (static_cast<int>(q.size()) != choice.theta.cols())
    throw ValidationError("path_flows: demand dimension mismatch");
  PathFlowVector out;
  out.f.assign(static_cast<std::size_t>(choice.theta.rows()), 0.0);
  choice.theta.multiply_vector(q, out.f);
  return out;
}

}  // namespace aor
