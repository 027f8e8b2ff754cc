#include "aor/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aor/common.hpp"

namespace aor::tuning {

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("SgdConfig: learning_rate must be positive");
  if (epochs < 1) throw ValidationError("SgdConfig: epochs must be >= 1");
  if (!(hyper_floor > 0.0)) throw ValidationError("SgdConfig: hyper_floor must be positive");
}

double loss(std::span<const double> x, const Observations& obs) {
  const std::size_t count = obs.observed_link_rows.size();
  if (count == 0) throw ValidationError("loss: no observed link flows");
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = x[obs.observed_link_rows[i]] - obs.x0[i];
    sum += r * r;
  }
  return sum / static_cast<double>(count);
}

std::vector<double> loss_gradient_x(std::span<const double> x, const Observations& obs) {
  const std::size_t count = obs.observed_link_rows.size();
  if (count == 0) throw ValidationError("loss_gradient_x: no observed link flows");
  std::vector<double> grad(x.size(), 0.0);
  const double scale = 2.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int row = obs.observed_link_rows[i];
    grad[row] = scale * (x[row] - obs.x0[i]);
  }
  return grad;
}

Sensitivity solution_sensitivity(const BlockSystem& system, std::span<const double> e_solution,
                                 Hyper which, const CgOptions& options) {
  const int n_x = system.n_x();
  const int n_q = system.n_q();
  if (static_cast<int>(e_solution.size()) != n_x + n_q)
    throw ValidationError("solution_sensitivity: solution dimension mismatch");

  // rhs = dV/dw - (dM/dw) E
  std::vector<double> rhs(static_cast<std::size_t>(n_x + n_q), 0.0);
  const Observations& obs = system.observations();
  switch (which) {
    case Hyper::w_x:
      for (int i = 0; i < n_x; ++i) rhs[i] = -e_solution[i];
      break;
    case Hyper::w_q:
      for (int j = 0; j < n_q; ++j) rhs[n_x + j] = -e_solution[n_x + j];
      break;
    case Hyper::w_sx:
      for (std::size_t i = 0; i < obs.observed_link_rows.size(); ++i) {
        const int row = obs.observed_link_rows[i];
        rhs[row] = obs.x0[i] - e_solution[row];
      }
      break;
    case Hyper::w_sq:
      for (std::size_t i = 0; i < obs.observed_od_cols.size(); ++i) {
        const int col = obs.observed_od_cols[i];
        rhs[n_x + col] = obs.q0[i] - e_solution[n_x + col];
      }
      break;
  }

  // CG on M * dE = rhs, reusing the assembled operator
  Sensitivity out;
  out.dE.assign(rhs.size(), 0.0);
  double rhs_norm = 0.0;
  for (double v : rhs) rhs_norm += v * v;
  rhs_norm = std::sqrt(rhs_norm);
  if (rhs_norm == 0.0) return out;

  const std::int64_t max_iter =
      options.max_iter > 0 ? options.max_iter : static_cast<std::int64_t>(10) * (n_x + n_q);
  std::vector<double> r = rhs;
  std::vector<double> p = r;
  std::vector<double> mp(rhs.size());
  double rr = 0.0;
  for (double v : r) rr += v * v;
  out.converged = false;
  for (std::int64_t it = 1; it <= max_iter; ++it) {
    system.apply(p, mp);
    double pmp = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) pmp += p[i] * mp[i];
    if (pmp <= 0.0) break;
    const double alpha = rr / pmp;
    for (std::size_t i = 0; i < p.size(); ++i) {
      out.dE[i] += alpha * p[i];
      r[i] -= alpha * mp[i];
    }
    double rr_new = 0.0;
    for (double v : r) rr_new += v * v;
    out.cg_iterations = it;
    if (std::sqrt(rr_new) <= options.tol * rhs_norm) {
      out.converged = true;
      break;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }
  return out;
}

LossReport evaluate_loss_and_gradient(const BlockSystem& system, const RecoveryResult& solution,
                                      const CgOptions& options) {
  LossReport report;
  report.value = loss(solution.x, system.observations());

  const std::vector<double> dl_dx = loss_gradient_x(solution.x, system.observations());
  std::vector<double> e(solution.x);
  e.insert(e.end(), solution.q.begin(), solution.q.end());

  for (std::size_t h = 0; h < kAllHypers.size(); ++h) {
    const Sensitivity sens = solution_sensitivity(system, e, kAllHypers[h], options);
    if (!sens.converged) report.converged = false;
    double g = 0.0;
    for (int i = 0; i < system.n_x(); ++i) g += dl_dx[i] * sens.dE[i];
    report.gradient[h] = g;
  }
  return report;
}

SgdResult sgd_tune(std::span<const TrainingSample> samples, const SgdConfig& config,
                   const Hyperparameters& init) {
  config.validate();
  if (samples.empty()) throw ValidationError("sgd_tune: no training samples");
  init.validate();

  Rng rng(config.seed);
  SgdResult result;
  result.hyper = init;
  result.trajectory.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const int pick = static_cast<int>(rng.uniform_int(static_cast<std::int64_t>(samples.size())));
    const TrainingSample& sample = samples[pick];

    TrajectoryPoint point;
    point.epoch = epoch;
    point.sample_index = pick;

    const BlockSystem system = assemble_system(
        sample.assignment, sample.obs, result.hyper,
        Multipliers::zeros(sample.assignment.A.rows(), sample.assignment.A.cols()));
    const RecoveryResult sol = solve_cg(system, config.cg);
    if (!sol.converged) {
      point.skipped = true;
      point.hyper = result.hyper;
      point.loss = std::numeric_limits<double>::quiet_NaN();
      result.trajectory.push_back(point);
      ++result.skipped_epochs;
      continue;
    }

    const LossReport report = evaluate_loss_and_gradient(system, sol, config.cg);
    point.loss = report.value;

    double* w[4] = {&result.hyper.w_x, &result.hyper.w_q, &result.hyper.w_sx, &result.hyper.w_sq};
    for (std::size_t h = 0; h < 4; ++h) {
      *w[h] -= config.learning_rate * report.gradient[h];
      if (*w[h] < config.hyper_floor) *w[h] = config.hyper_floor;
    }
    point.hyper = result.hyper;
    result.trajectory.push_back(point);
  }
  return result;
}

Hyperparameters random_init(std::uint64_t seed) {
  Rng rng(seed);
  auto draw = [&] { return std::pow(10.0, rng.uniform(-3.0, 1.0)); };
  Hyperparameters h;
  h.w_x = draw();
  h.w_q = draw();
  h.w_sx = draw();
  h.w_sq = draw();
  return h;
}

}  // namespace aor::tuning
