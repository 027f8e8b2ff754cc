#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aor/network.hpp"
#include "aor/sparse.hpp"

namespace aor {

/// Flow-progression weights: row (link, bin), column (od, path, departure
/// bin). Entry = fraction of the column's departing cohort whose arrival at
/// the row's link falls inside the row's bin.
struct AssignmentWeights {
  SparseMatrix rho;
  /// Windows whose later departure arrived earlier (clamped to degenerate).
  int inverted_windows = 0;
};

/// Logit path-choice fractions: row (od, path, departure bin), column
/// (od, departure bin). Columns of a non-empty path set sum to 1.
struct PathChoice {
  SparseMatrix theta;
  double alpha = 0.01;
};

/// A = rho * theta, mapping OD departures to link-time flows.
struct AssignmentMatrix {
  SparseMatrix A;
  std::uint64_t rho_hash = 0;
  std::uint64_t theta_hash = 0;
};

/// Path flows f = theta * q over the (od, path, departure bin) layout.
struct PathFlowVector {
  std::vector<double> f;
};

/// Arrival window of one on-path link: entry times for departures at t_o
/// and t_o + delta_t. When rising speeds make a later departure arrive
/// earlier, the window is clamped to [a, a] and flagged.
struct ArrivalWindow {
  double begin = 0.0;
  double end = 0.0;
  bool inverted = false;
};

ArrivalWindow arrival_window(const Network& network, const SpeedProfile& profile, const Path& path,
                             int link, double t_o, double delta_t);

/// Overlap fraction of a window with one time bin. A degenerate window
/// (end == begin) puts full mass on the bin containing it.
double rho_entry(const ArrivalWindow& window, double bin_start, double bin_end);

/// Entries of rho smaller than this are dropped at build time.
inline constexpr double kRhoDropTol = 1e-12;

AssignmentWeights build_rho(const Network& network, const SpeedProfile& profile,
                            std::span<const PathSet> path_sets, const FlatIndex& index);

/// Logit shares over one OD's paths at departure time t_o:
/// softmax(-alpha * travel time), max-subtracted.
std::vector<double> path_choice_fraction(const Network& network, const SpeedProfile& profile,
                                         const PathSet& path_set, double t_o, double alpha);

PathChoice build_theta(const Network& network, const SpeedProfile& profile,
                       std::span<const PathSet> path_sets, const FlatIndex& index, double alpha);

AssignmentMatrix build_assignment(const AssignmentWeights& weights, const PathChoice& choice);

/// x = A q.
std::vector<double> apply_assignment(const AssignmentMatrix& assignment, std::span<const double> q);

/// f = theta q.
PathFlowVector path_flows(const PathChoice& choice, std::span<const double> q);

}  // namespace aor
