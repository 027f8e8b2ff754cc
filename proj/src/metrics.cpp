#include "aor/metrics.hpp"

#include <cmath>

#include "aor/common.hpp"

namespace aor::metrics {

void FlowSeries::validate() const {
  const std::size_t expected = static_cast<std::size_t>(num_links) * num_bins;
  if (num_links < 0 || num_bins <= 0 || truth.size() != expected || estimate.size() != expected)
    throw ValidationError("FlowSeries: misaligned dimensions");
  for (double v : truth)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("FlowSeries: ground truth must be non-negative and finite");
  for (double v : estimate)
    if (!std::isfinite(v)) throw ValidationError("FlowSeries: non-finite estimate");
}

double FlowSeries::link_total(int link) const {
  double s = 0.0;
  for (int t = 0; t < num_bins; ++t) s += truth_at(link, t);
  return s;
}

std::vector<double> link_weights(const FlowSeries& series) {
  series.validate();
  double total = 0.0;
  for (double v : series.truth) total += v;
  if (!(total > 0.0)) throw ValidationError("link_weights: total network flow is zero");
  std::vector<double> w(static_cast<std::size_t>(series.num_links));
  for (int l = 0; l < series.num_links; ++l) w[l] = series.link_total(l) / total;
  return w;
}

WrmeReport wrme(const FlowSeries& series) {
  const std::vector<double> weights = link_weights(series);
  WrmeReport report;
  int included = 0;
  for (int l = 0; l < series.num_links; ++l) {
    const double total = series.link_total(l);
    if (total <= 0.0) {
      ++report.excluded_zero_flow_links;
      continue;
    }
    double abs_err = 0.0;
    for (int t = 0; t < series.num_bins; ++t)
      abs_err += std::abs(series.truth_at(l, t) - series.estimate_at(l, t));
    report.value += weights[l] * (abs_err / total);
    ++included;
  }
  if (included == 0) throw ValidationError("wrme: no links with positive flow");
  return report;
}

double rme(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) throw ValidationError("rme: dimension mismatch");
  double total = 0.0;
  double abs_err = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    total += truth[t];
    abs_err += std::abs(truth[t] - estimate[t]);
  }
  if (!(total > 0.0)) throw ValidationError("rme: zero total flow");
  return abs_err / total;
}

double mae(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) throw ValidationError("mae: dimension mismatch");
  if (truth.empty()) throw ValidationError("mae: empty series");
  double abs_err = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) abs_err += std::abs(truth[t] - estimate[t]);
  return abs_err / static_cast<double>(truth.size());
}

std::map<RoadClass, WrmeReport> wrme_by_class(const FlowSeries& series,
                                              std::span<const std::optional<RoadClass>> classes) {
  series.validate();
  if (static_cast<int>(classes.size()) != series.num_links)
    throw ValidationError("wrme_by_class: class list does not match link count");
  std::map<RoadClass, std::vector<int>> members;
  for (int l = 0; l < series.num_links; ++l) {
    if (!classes[l]) throw ValidationError("wrme_by_class: unlabeled link");
    members[*classes[l]].push_back(l);
  }
  std::map<RoadClass, WrmeReport> out;
  for (const auto& [rc, links] : members) {
    double class_total = 0.0;
    for (int l : links) class_total += series.link_total(l);
    if (!(class_total > 0.0)) continue;  // empty class: skipped
    WrmeReport report;
    for (int l : links) {
      const double total = series.link_total(l);
      if (total <= 0.0) {
        ++report.excluded_zero_flow_links;
        continue;
      }
      double abs_err = 0.0;
      for (int t = 0; t < series.num_bins; ++t)
        abs_err += std::abs(series.truth_at(l, t) - series.estimate_at(l, t));
      report.value += (total / class_total) * (abs_err / total);
    }
    out.emplace(rc, report);
  }
  return out;
}

}  // namespace aor::metrics
