#pragma once

#include <span>
#include <utility>
#include <vector>

#include "aor/recovery.hpp"

namespace aor::lr {

struct LrConfig {
  double mu0 = 1e5;
  double gap_threshold = 500.0;  // G_T
  int iterations = 1000;
  int stall_window = 1;
  CgOptions cg;
  /// Stop early once |gap| / max(1, |Z_F|) drops below this and the relaxed
  /// iterate is already feasible to within feasibility_tol.
  double early_stop_rel_gap = 1e-6;
  double feasibility_tol = 1e-9;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double gap = 0.0;  // Z_R - Z_F
  double step = 0.0;
  double mu = 0.0;  // after this iteration's halving test
  double z_relaxed = 0.0;
  double z_feasible = 0.0;
};

struct LrResult {
  /// Best feasible iterate seen (lowest Z_F), entries >= 0 exactly.
  RecoveryResult best;
  double best_feasible_objective = 0.0;
  Multipliers multipliers;  // final
  std::vector<IterationRecord> trajectory;
  bool early_stopped = false;
  bool solver_failure = false;
};

/// Five-term regularized objective at (x, q).
double objective(std::span<const double> x, std::span<const double> q,
                 const AssignmentMatrix& assignment, const Observations& obs,
                 const Hyperparameters& hyper);

/// Objective minus the multiplier terms lambda_x . x and lambda_q . q.
double relaxed_objective(std::span<const double> x, std::span<const double> q,
                         const Multipliers& multipliers, const AssignmentMatrix& assignment,
                         const Observations& obs, const Hyperparameters& hyper);

/// Elementwise max(0, .).
std::pair<std::vector<double>, std::vector<double>> feasible_projection(std::span<const double> x,
                                                                        std::span<const double> q);

/// Objective at a feasible point; rejects negative inputs.
double feasible_objective(std::span<const double> x_f, std::span<const double> q_f,
                          const AssignmentMatrix& assignment, const Observations& obs,
                          const Hyperparameters& hyper);

/// mu * (Z_R - Z_F) / (sum x + sum q)^2; zero when the denominator vanishes.
double step_size(double mu, double z_relaxed, double z_feasible, std::span<const double> x,
                 std::span<const double> q);

/// lambda <- max(0, lambda + s * value), elementwise on both blocks.
Multipliers update_multipliers(const Multipliers& multipliers, double step,
                               std::span<const double> x, std::span<const double> q);

/// Iterative multiplier adjustment enforcing non-negativity: each iteration
/// re-solves the system with the multipliers folded into the right-hand
/// side, projects, and steps the multipliers by the relaxed/feasible gap.
/// mu halves whenever the gap change stays below gap_threshold across
/// stall_window iterations.
LrResult lr_solve(const AssignmentMatrix& assignment, const Observations& obs,
                  const Hyperparameters& hyper, const LrConfig& config = {});

}  // namespace aor::lr
