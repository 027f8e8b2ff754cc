#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aor/recovery.hpp"

namespace aor::tuning {

/// One traffic observation set over the shared network, e.g. an hour of day.
struct TrainingSample {
  AssignmentMatrix assignment;
  Observations obs;
  std::string label;
};

struct SgdConfig {
  double learning_rate = 0.01;
  int epochs = 100;
  std::uint64_t seed = 0;
  double hyper_floor = 1e-8;
  CgOptions cg;

  void validate() const;
};

enum class Hyper { w_x = 0, w_q = 1, w_sx = 2, w_sq = 3 };

inline constexpr std::array<Hyper, 4> kAllHypers = {Hyper::w_x, Hyper::w_q, Hyper::w_sx,
                                                    Hyper::w_sq};

/// Loss value with its gradient in (w_x, w_q, w_sx, w_sq) order.
struct LossReport {
  double value = 0.0;
  std::array<double, 4> gradient{};
  bool converged = true;
};

/// Mean squared deviation on the observed rows, normalized by the total
/// count of observed (link, bin) entries. Throws when nothing is observed.
double loss(std::span<const double> x, const Observations& obs);

/// d loss / d x, dense; zero on unobserved rows.
std::vector<double> loss_gradient_x(std::span<const double> x, const Observations& obs);

struct Sensitivity {
  std::vector<double> dE;  // d[x;q]/dw
  bool converged = true;
  std::int64_t cg_iterations = 0;
};

/// dE/dw for a solved system M E = V: one extra CG solve with right-hand
/// side dV/dw - (dM/dw) E.
Sensitivity solution_sensitivity(const BlockSystem& system, std::span<const double> e_solution,
                                 Hyper which, const CgOptions& options = {});

/// Loss and its four hyperparameter gradients at a solved system, composed
/// through the chain rule from the solution sensitivities.
LossReport evaluate_loss_and_gradient(const BlockSystem& system, const RecoveryResult& solution,
                                      const CgOptions& options = {});

struct TrajectoryPoint {
  int epoch = 0;
  Hyperparameters hyper;  // after this epoch's update
  double loss = 0.0;      // at this epoch's sample, before the update
  int sample_index = -1;
  bool skipped = false;
};

struct SgdResult {
  Hyperparameters hyper;
  std::vector<TrajectoryPoint> trajectory;
  int skipped_epochs = 0;
};

/// One uniformly random sample per epoch (seeded); all four hyperparameters
/// updated simultaneously and floored at hyper_floor. Epochs whose solve
/// fails are recorded as skipped and not repeated.
SgdResult sgd_tune(std::span<const TrainingSample> samples, const SgdConfig& config,
                   const Hyperparameters& init);

/// Log-uniform initialization over [1e-3, 1e1], seeded.
Hyperparameters random_init(std::uint64_t seed);

}  // namespace aor::tuning
