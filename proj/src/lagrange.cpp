#include "aor/lagrange.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aor/common.hpp"

namespace aor::lr {

void LrConfig::validate() const {
  if (!(mu0 > 0.0)) throw ValidationError("LrConfig: mu0 must be positive");
  if (!(gap_threshold > 0.0)) throw ValidationError("LrConfig: gap_threshold must be positive");
  if (iterations < 1) throw ValidationError("LrConfig: iterations must be >= 1");
  if (stall_window < 1) throw ValidationError("LrConfig: stall_window must be >= 1");
}

double objective(std::span<const double> x, std::span<const double> q,
                 const AssignmentMatrix& assignment, const Observations& obs,
                 const Hyperparameters& hyper) {
  const int n_x = assignment.A.rows();
  const int n_q = assignment.A.cols();
  if (static_cast<int>(x.size()) != n_x || static_cast<int>(q.size()) != n_q)
    throw ValidationError("objective: dimension mismatch");

  std::vector<double> aq(static_cast<std::size_t>(n_x));
  assignment.A.multiply_vector(q, aq);

  double fit = 0.0;
  for (int i = 0; i < n_x; ++i) {
    const double r = x[i] - aq[i];
    fit += r * r;
  }
  double reg_x = 0.0;
  for (double v : x) reg_x += v * v;
  double reg_q = 0.0;
  for (double v : q) reg_q += v * v;
  double dev_x = 0.0;
  for (std::size_t i = 0; i < obs.observed_link_rows.size(); ++i) {
    const double r = x[obs.observed_link_rows[i]] - obs.x0[i];
    dev_x += r * r;
  }
  double dev_q = 0.0;
  for (std::size_t i = 0; i < obs.observed_od_cols.size(); ++i) {
    const double r = q[obs.observed_od_cols[i]] - obs.q0[i];
    dev_q += r * r;
  }
  return fit + hyper.w_x * reg_x + hyper.w_q * reg_q + hyper.w_sx * dev_x + hyper.w_sq * dev_q;
}

double relaxed_objective(std::span<const double> x, std::span<const double> q,
                         const Multipliers& multipliers, const AssignmentMatrix& assignment,
                         const Observations& obs, const Hyperparameters& hyper) {
  double value = objective(x, q, assignment, obs, hyper);
  for (std::size_t i = 0; i < x.size(); ++i) value -= multipliers.lambda_x[i] * x[i];
  for (std::size_t j = 0; j < q.size(); ++j) value -= multipliers.lambda_q[j] * q[j];
  return value;
}

std::pair<std::vector<double>, std::vector<double>> feasible_projection(std::span<const double> x,
                                                                        std::span<const double> q) {
  std::vector<double> xf(x.begin(), x.end());
  std::vector<double> qf(q.begin(), q.end());
  for (double& v : xf) v = std::max(0.0, v);
  for (double& v : qf) v = std::max(0.0, v);
  return {std::move(xf), std::move(qf)};
}

double feasible_objective(std::span<const double> x_f, std::span<const double> q_f,
                          const AssignmentMatrix& assignment, const Observations& obs,
                          const Hyperparameters& hyper) {
  for (double v : x_f)
    if (v < 0.0) throw ValidationError("feasible_objective: negative link flow");
  for (double v : q_f)
    if (v < 0.0) throw ValidationError("feasible_objective: negative demand");
  return objective(x_f, q_f, assignment, obs, hyper);
}

double step_size(double mu, double z_relaxed, double z_feasible, std::span<const double> x,
                 std::span<const double> q) {
  double total = 0.0;
  for (double v : x) total += v;
  for (double v : q) total += v;
  if (std::abs(total) < 1e-12) return 0.0;
  return mu * (z_relaxed - z_feasible) / (total * total);
}

Multipliers update_multipliers(const Multipliers& multipliers, double step,
                               std::span<const double> x, std::span<const double> q) {
  Multipliers out = multipliers;
  for (std::size_t i = 0; i < x.size(); ++i)
    out.lambda_x[i] = std::max(0.0, out.lambda_x[i] + step * x[i]);
  for (std::size_t j = 0; j < q.size(); ++j)
    out.lambda_q[j] = std::max(0.0, out.lambda_q[j] + step * q[j]);
  return out;
}

LrResult lr_solve(const AssignmentMatrix& assignment, const Observations& obs,
                  const Hyperparameters& hyper, const LrConfig& config) {
  hyper.validate();
  config.validate();
  const int n_x = assignment.A.rows();
  const int n_q = assignment.A.cols();

  LrResult result;
  result.multipliers = Multipliers::zeros(n_x, n_q);
  result.best_feasible_objective = std::numeric_limits<double>::infinity();
  double mu = config.mu0;
  std::vector<double> gap_history;
  gap_history.reserve(static_cast<std::size_t>(config.iterations));

  for (int iter = 1; iter <= config.iterations; ++iter) {
    const BlockSystem system = assemble_system(assignment, obs, hyper, result.multipliers);
    const RecoveryResult sol = solve_cg(system, config.cg);
    if (!sol.converged) {
      result.solver_failure = true;
      break;
    }

    const double z_r =
        relaxed_objective(sol.x, sol.q, result.multipliers, assignment, obs, hyper);
    auto [x_f, q_f] = feasible_projection(sol.x, sol.q);
    const double z_f = feasible_objective(x_f, q_f, assignment, obs, hyper);
    const double gap = z_r - z_f;

    const int lag = config.stall_window;
    if (static_cast<int>(gap_history.size()) >= lag &&
        std::abs(gap - gap_history[gap_history.size() - lag]) < config.gap_threshold)
      mu /= 2.0;

    const double step = step_size(mu, z_r, z_f, sol.x, sol.q);
    result.multipliers = update_multipliers(result.multipliers, step, sol.x, sol.q);

    result.trajectory.push_back({iter, gap, step, mu, z_r, z_f});
    gap_history.push_back(gap);

    if (z_f < result.best_feasible_objective) {
      result.best_feasible_objective = z_f;
      result.best = sol;
      result.best.x = std::move(x_f);
      result.best.q = std::move(q_f);
    }

    const double worst_violation =
        std::min(sol.x.empty() ? 0.0 : *std::min_element(sol.x.begin(), sol.x.end()),
                 sol.q.empty() ? 0.0 : *std::min_element(sol.q.begin(), sol.q.end()));
    if (std::abs(gap) / std::max(1.0, std::abs(z_f)) < config.early_stop_rel_gap &&
        worst_violation >= -config.feasibility_tol) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace aor::lr
