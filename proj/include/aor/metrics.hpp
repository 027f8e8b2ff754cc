#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "aor/network.hpp"

namespace aor::metrics {

/// Aligned ground-truth and estimated flows, link-major over bins.
struct FlowSeries {
  int num_links = 0;
  int num_bins = 0;
  std::vector<double> truth;
  std::vector<double> estimate;

  double truth_at(int link, int bin) const { return truth[static_cast<std::size_t>(link) * num_bins + bin]; }
  double estimate_at(int link, int bin) const { return estimate[static_cast<std::size_t>(link) * num_bins + bin]; }
  double link_total(int link) const;

  void validate() const;
};

/// W_l = total truth flow of link l over total network flow; sums to 1.
std::vector<double> link_weights(const FlowSeries& series);

struct WrmeReport {
  double value = 0.0;
  int excluded_zero_flow_links = 0;
};

/// Flow-weighted sum of per-link relative mean errors. Links with zero
/// total truth flow carry zero weight and are excluded from the ratio.
WrmeReport wrme(const FlowSeries& series);

/// Per-link relative mean error: sum_t |f - f_hat| / sum_t f.
double rme(std::span<const double> truth, std::span<const double> estimate);

/// Per-link mean absolute error: (1/T) sum_t |f - f_hat|.
double mae(std::span<const double> truth, std::span<const double> estimate);

/// WRME within each road class using class-internal weights. Classes with
/// no positive-flow links are skipped. Every link must carry a class.
std::map<RoadClass, WrmeReport> wrme_by_class(const FlowSeries& series,
                                              std::span<const std::optional<RoadClass>> classes);

}  // namespace aor::metrics
