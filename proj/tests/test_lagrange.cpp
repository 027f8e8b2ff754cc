#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "aor/common.hpp"
#include "aor/lagrange.hpp"
#include "aor/recovery.hpp"
#include "oracles.hpp"

using namespace aor;

namespace {

/// n_x = 1, n_q = 2, A = [1 1]: the demand prior on q_1 overshoots the flow
/// observation, so the unconstrained q_2 goes negative. The constrained
/// optimum pins q_2 = 0 with the (x, q_1) pair from the inner 2x2 system.
struct BindingInstance {
  AssignmentMatrix assignment;
  Observations obs;
  Hyperparameters hyper{0.1, 0.1, 1.0, 1.0};
  double x_star;
  double q1_star;

  explicit BindingInstance(double q_prior = 20.0) {
    SparseMatrix a(1, 2);
    a.add(0, 0, 1.0);
    a.add(0, 1, 1.0);
    a.finalize();
    assignment.A = std::move(a);
    obs.observed_link_rows = {0};
    obs.x0 = {10.0};
    obs.observed_od_cols = {0};
    obs.q0 = {q_prior};
    const double det = 2.1 * 2.1 - 1.0;
    x_star = (2.1 * 10.0 + q_prior) / det;
    q1_star = (10.0 + 2.1 * q_prior) / det;
  }
};

}  // namespace

TEST_CASE("relaxed_objective: zero multipliers reduce to the plain objective") {
  const auto inst = oracles::random_instance(31);
  Rng rng(1);
  std::vector<double> x(static_cast<std::size_t>(inst.assignment.A.rows()));
  std::vector<double> q(static_cast<std::size_t>(inst.assignment.A.cols()));
  for (double& v : x) v = rng.uniform(-5.0, 5.0);
  for (double& v : q) v = rng.uniform(-5.0, 5.0);
  const auto zero = Multipliers::zeros(inst.assignment.A.rows(), inst.assignment.A.cols());
  CHECK(lr::relaxed_objective(x, q, zero, inst.assignment, inst.obs, inst.hyper) ==
        doctest::Approx(lr::objective(x, q, inst.assignment, inst.obs, inst.hyper)));
}

TEST_CASE("relaxed_objective: all-zero data evaluates to zero") {
  SparseMatrix a(2, 1);
  a.add(0, 0, 1.0);
  a.finalize();
  const AssignmentMatrix am{std::move(a), 0, 0};
  const std::vector<double> x{0.0, 0.0};
  const std::vector<double> q{0.0};
  CHECK(lr::relaxed_objective(x, q, Multipliers::zeros(2, 1), am, Observations{},
                              {0.1, 0.1, 1.0, 1.0}) == 0.0);
}

TEST_CASE("relaxed_objective: scalar hand evaluation of all terms") {
  // A=[1], x=2, q=1, x0=3 observed, q0=4 observed, lambda_x=0.5, lambda_q=0.25
  // fit (2-1)^2 = 1; w_x*4 = 0.4; w_q*1 = 0.2; w_sx*(2-3)^2 = 2;
  // w_sq*(1-4)^2 = 4.5; minus 0.5*2 minus 0.25*1 -> 6.85
  SparseMatrix a(1, 1);
  a.add(0, 0, 1.0);
  a.finalize();
  const AssignmentMatrix am{std::move(a), 0, 0};
  Observations obs;
  obs.observed_link_rows = {0};
  obs.x0 = {3.0};
  obs.observed_od_cols = {0};
  obs.q0 = {4.0};
  Multipliers lambda = Multipliers::zeros(1, 1);
  lambda.lambda_x[0] = 0.5;
  lambda.lambda_q[0] = 0.25;
  const std::vector<double> x{2.0};
  const std::vector<double> q{1.0};
  CHECK(lr::relaxed_objective(x, q, lambda, am, obs, {0.1, 0.2, 2.0, 0.5}) ==
        doctest::Approx(1.0 + 0.4 + 0.2 + 2.0 + 4.5 - 1.0 - 0.25));
}

TEST_CASE("feasible_projection: clamps and is idempotent") {
  const std::vector<double> x{-1.0, 2.0};
  const std::vector<double> q{0.0, -3.5, 4.0};
  auto [xf, qf] = lr::feasible_projection(x, q);
  CHECK(xf == std::vector<double>{0.0, 2.0});
  CHECK(qf == std::vector<double>{0.0, 0.0, 4.0});
  auto [xff, qff] = lr::feasible_projection(xf, qf);
  CHECK(xff == xf);
  CHECK(qff == qf);

  const std::vector<double> pos{1.0, 2.0};
  auto [px, pq] = lr::feasible_projection(pos, pos);
  CHECK(px == pos);
  CHECK(pq == pos);
}

TEST_CASE("feasible_objective: value at zero vectors and negative rejection") {
  SparseMatrix a(2, 1);
  a.add(0, 0, 1.0);
  a.finalize();
  const AssignmentMatrix am{std::move(a), 0, 0};
  Observations obs;
  obs.observed_link_rows = {0, 1};
  obs.x0 = {3.0, 4.0};
  const Hyperparameters hyper{0.1, 0.1, 2.0, 0.0};
  const std::vector<double> x{0.0, 0.0};
  const std::vector<double> q{0.0};
  // w_sx * ||x0||^2 = 2 * 25
  CHECK(lr::feasible_objective(x, q, am, obs, hyper) == doctest::Approx(50.0));

  const std::vector<double> neg{-0.1, 0.0};
  CHECK_THROWS_AS(lr::feasible_objective(neg, q, am, obs, hyper), ValidationError);
}

TEST_CASE("feasible points upper-bound the constrained minimum") {
  const BindingInstance inst;
  const double z_star = lr::objective(std::vector<double>{inst.x_star},
                                      std::vector<double>{inst.q1_star, 0.0}, inst.assignment,
                                      inst.obs, inst.hyper);
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> x{rng.uniform(0.0, 30.0)};
    const std::vector<double> q{rng.uniform(0.0, 30.0), rng.uniform(0.0, 30.0)};
    CHECK(lr::feasible_objective(x, q, inst.assignment, inst.obs, inst.hyper) >=
          z_star - 1e-9);
  }
}

TEST_CASE("step_size: arithmetic and degenerate denominator") {
  const std::vector<double> x{400.0};
  const std::vector<double> q{300.0, 300.0};
  CHECK(lr::step_size(1e5, 50.0, 50.0, x, q) == 0.0);
  CHECK(lr::step_size(1e5, -50.0, 50.0, x, q) == doctest::Approx(1e5 * -100.0 / 1e6));
  CHECK(lr::step_size(2e5, -50.0, 50.0, x, q) == doctest::Approx(2.0 * 1e5 * -100.0 / 1e6));

  const std::vector<double> tiny{1e-13};
  const std::vector<double> none{};
  CHECK(lr::step_size(1e5, -50.0, 50.0, tiny, none) == 0.0);
}

TEST_CASE("update_multipliers: clamped subgradient step") {
  Multipliers lambda = Multipliers::zeros(2, 1);
  const std::vector<double> x{5.0, -3.0};
  const std::vector<double> q{2.0};

  const Multipliers same = lr::update_multipliers(lambda, 0.0, x, q);
  CHECK(same.lambda_x == lambda.lambda_x);

  // negative step: violators (negative entries) gain positive multipliers
  const Multipliers up = lr::update_multipliers(lambda, -0.01, x, q);
  CHECK(up.lambda_x[0] == 0.0);
  CHECK(up.lambda_x[1] == doctest::Approx(0.03));
  CHECK(up.lambda_q[0] == 0.0);

  Multipliers seeded = Multipliers::zeros(2, 1);
  seeded.lambda_x = {1.0, 1.0};
  seeded.lambda_q = {1.0};
  const Multipliers big = lr::update_multipliers(seeded, -10.0, x, q);
  for (double v : big.lambda_x) CHECK(v >= 0.0);
  for (double v : big.lambda_q) CHECK(v >= 0.0);
}

TEST_CASE("lr_solve: non-binding instance agrees with the plain recovery") {
  // x0 consistent with a positive solution: unconstrained optimum feasible
  SparseMatrix a(2, 1);
  a.add(0, 0, 1.0);
  a.add(1, 0, 1.0);
  a.finalize();
  AssignmentMatrix am{std::move(a), 0, 0};
  Observations obs;
  obs.observed_link_rows = {0, 1};
  obs.x0 = {10.0, 12.0};
  const Hyperparameters hyper{0.1, 0.1, 1.0, 0.0};

  const RecoveryResult plain = recover(am, obs, hyper, {1e-12, 0, false});
  REQUIRE(plain.negative_x_count == 0);
  REQUIRE(plain.negative_q_count == 0);

  lr::LrConfig cfg;
  cfg.cg.tol = 1e-12;
  const lr::LrResult lr_res = lr::lr_solve(am, obs, hyper, cfg);
  CHECK(lr_res.early_stopped);
  CHECK(lr_res.trajectory.size() < 10);
  CHECK(std::abs(lr_res.trajectory.back().gap) <= 1e-6 * std::abs(lr_res.best_feasible_objective));
  for (std::size_t i = 0; i < plain.x.size(); ++i)
    CHECK(std::abs(lr_res.best.x[i] - plain.x[i]) <= 1e-6);
  for (std::size_t i = 0; i < plain.q.size(); ++i)
    CHECK(std::abs(lr_res.best.q[i] - plain.q[i]) <= 1e-6);
  for (double v : lr_res.multipliers.lambda_x) CHECK(v == 0.0);
  for (double v : lr_res.multipliers.lambda_q) CHECK(v == 0.0);
}

TEST_CASE("lr_solve: binding instance matches the 1-D grid-search oracle") {
  const BindingInstance inst;

  // grid-search oracle over the binding coordinate q2 with exact inner
  // solves of the remaining 2x2 stationarity system
  double best_obj = std::numeric_limits<double>::infinity();
  double best_x = 0.0, best_q1 = 0.0, best_q2 = 0.0;
  const double det = 2.1 * 2.1 - 1.0;
  for (int i = 0; i <= 50000; ++i) {
    const double q2 = i * 1e-4;
    const double x = (2.1 * (10.0 + q2) + (20.0 - q2)) / det;
    const double q1 = ((10.0 + q2) + 2.1 * (20.0 - q2)) / det;
    if (x < 0.0 || q1 < 0.0) continue;
    const double z = lr::objective(std::vector<double>{x}, std::vector<double>{q1, q2},
                                   inst.assignment, inst.obs, inst.hyper);
    if (z < best_obj) {
      best_obj = z;
      best_x = x;
      best_q1 = q1;
      best_q2 = q2;
    }
  }
  CHECK(best_q2 == 0.0);  // the constraint binds
  CHECK(best_x == doctest::Approx(inst.x_star).epsilon(1e-12));
  CHECK(best_q1 == doctest::Approx(inst.q1_star).epsilon(1e-12));

  // unconstrained optimum violates q2 >= 0
  const RecoveryResult unconstrained = recover(inst.assignment, inst.obs, inst.hyper,
                                               {1e-14, 0, false});
  CHECK(unconstrained.q[1] < 0.0);
  CHECK(unconstrained.negative_q_count == 1);

  // the gap threshold scales with the objective: 500 is calibrated to
  // city-scale objectives, so a toy instance uses a proportionally tiny one
  lr::LrConfig cfg;
  cfg.mu0 = 3.0;
  cfg.gap_threshold = 1e-10;
  cfg.iterations = 300000;
  cfg.cg.tol = 1e-14;
  const lr::LrResult res = lr::lr_solve(inst.assignment, inst.obs, inst.hyper, cfg);

  CHECK(res.best.q[1] == 0.0);
  CHECK(std::abs(res.best.x[0] - best_x) <= 1e-4);
  CHECK(std::abs(res.best.q[0] - best_q1) <= 1e-4);
}

TEST_CASE("lr_solve: trajectory contracts the gap and tracks the best feasible") {
  const BindingInstance inst;
  lr::LrConfig cfg;
  cfg.mu0 = 3.0;
  cfg.gap_threshold = 1e-10;
  cfg.iterations = 1000;
  cfg.cg.tol = 1e-12;
  const lr::LrResult res = lr::lr_solve(inst.assignment, inst.obs, inst.hyper, cfg);
  REQUIRE(res.trajectory.size() == 1000);
  CHECK(std::abs(res.trajectory.back().gap) <= std::abs(res.trajectory.front().gap));

  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : res.trajectory) best = std::min(best, rec.z_feasible);
  CHECK(res.best_feasible_objective == doctest::Approx(best));
  for (double v : res.best.x) CHECK(v >= 0.0);
  for (double v : res.best.q) CHECK(v >= 0.0);
  for (double v : res.multipliers.lambda_x) CHECK(v >= 0.0);
  for (double v : res.multipliers.lambda_q) CHECK(v >= 0.0);
}

TEST_CASE("lr_solve: mu halves exactly on sub-threshold gap changes") {
  const BindingInstance inst;
  lr::LrConfig cfg;
  cfg.mu0 = 1e5;
  cfg.gap_threshold = 500.0;
  cfg.iterations = 60;
  cfg.cg.tol = 1e-12;
  const lr::LrResult res = lr::lr_solve(inst.assignment, inst.obs, inst.hyper, cfg);
  REQUIRE(res.trajectory.size() >= 2);
  CHECK(res.trajectory.front().mu == 1e5);
  for (std::size_t i = 1; i < res.trajectory.size(); ++i) {
    const double prev_mu = res.trajectory[i - 1].mu;
    const double want = std::abs(res.trajectory[i].gap - res.trajectory[i - 1].gap) < 500.0
                            ? prev_mu / 2.0
                            : prev_mu;
    CHECK(res.trajectory[i].mu == want);
  }
  // mu is non-increasing throughout
  for (std::size_t i = 1; i < res.trajectory.size(); ++i)
    CHECK(res.trajectory[i].mu <= res.trajectory[i - 1].mu);
}

TEST_CASE("weak duality at an exact relaxed minimizer") {
  // assembling with multipliers m solves the lambda = 2m relaxation, so
  // evaluating Z_R with 2m gives the exact relaxed minimum
  const BindingInstance inst;
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Multipliers half = Multipliers::zeros(1, 2);
    half.lambda_x[0] = rng.uniform(0.0, 2.0);
    half.lambda_q[0] = rng.uniform(0.0, 2.0);
    half.lambda_q[1] = rng.uniform(0.0, 2.0);
    const BlockSystem sys = assemble_system(inst.assignment, inst.obs, inst.hyper, half);
    const RecoveryResult sol = solve_cg(sys, {1e-13, 0, false});
    REQUIRE(sol.converged);
    Multipliers full = half;
    for (double& v : full.lambda_x) v *= 2.0;
    for (double& v : full.lambda_q) v *= 2.0;
    const double z_r =
        lr::relaxed_objective(sol.x, sol.q, full, inst.assignment, inst.obs, inst.hyper);
    auto [xf, qf] = lr::feasible_projection(sol.x, sol.q);
    const double z_f = lr::feasible_objective(xf, qf, inst.assignment, inst.obs, inst.hyper);
    CHECK(z_r <= z_f + 1e-9);
  }
}

TEST_CASE("lr_solve: inner solver failure terminates with the failure flagged") {
  const BindingInstance inst;
  lr::LrConfig cfg;
  cfg.cg.max_iter = 1;
  cfg.cg.tol = 1e-16;
  const lr::LrResult res = lr::lr_solve(inst.assignment, inst.obs, inst.hyper, cfg);
  CHECK(res.solver_failure);
  CHECK(res.trajectory.empty());
}

TEST_CASE("lr config validation") {
  lr::LrConfig bad;
  bad.mu0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  lr::LrConfig bad2;
  bad2.iterations = 0;
  CHECK_THROWS_AS(bad2.validate(), ValidationError);
}
