#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "aor/common.hpp"
#include "aor/tuning.hpp"
#include "oracles.hpp"

using namespace aor;
using namespace aor::tuning;

namespace {

Hyperparameters with_hyper(const Hyperparameters& base, tuning::Hyper which, double value) {
  Hyperparameters h = base;
  switch (which) {
    case Hyper::w_x: h.w_x = value; break;
    case Hyper::w_q: h.w_q = value; break;
    case Hyper::w_sx: h.w_sx = value; break;
    case Hyper::w_sq: h.w_sq = value; break;
  }
  return h;
}

double hyper_value(const Hyperparameters& h, tuning::Hyper which) {
  switch (which) {
    case Hyper::w_x: return h.w_x;
    case Hyper::w_q: return h.w_q;
    case Hyper::w_sx: return h.w_sx;
    case Hyper::w_sq: return h.w_sq;
  }
  return 0.0;
}

/// Central finite difference of the full solution vector through dense
/// direct solves, independent of the CG path.
std::vector<double> fd_solution(const oracles::RandomInstance& inst, tuning::Hyper which,
                                double h) {
  const double w0 = hyper_value(inst.hyper, which);
  const auto lambda =
      Multipliers::zeros(inst.assignment.A.rows(), inst.assignment.A.cols());
  const auto hi =
      oracles::dense_recover(inst.assignment.A, with_hyper(inst.hyper, which, w0 + h), inst.obs,
                             lambda);
  const auto lo =
      oracles::dense_recover(inst.assignment.A, with_hyper(inst.hyper, which, w0 - h), inst.obs,
                             lambda);
  std::vector<double> out(hi.size());
  for (std::size_t i = 0; i < hi.size(); ++i) out[i] = (hi[i] - lo[i]) / (2.0 * h);
  return out;
}

double fd_loss(const oracles::RandomInstance& inst, tuning::Hyper which, double h) {
  const double w0 = hyper_value(inst.hyper, which);
  const auto lambda =
      Multipliers::zeros(inst.assignment.A.rows(), inst.assignment.A.cols());
  auto loss_at = [&](double w) {
    const auto e = oracles::dense_recover(inst.assignment.A, with_hyper(inst.hyper, which, w),
                                          inst.obs, lambda);
    const std::span<const double> x(e.data(), static_cast<std::size_t>(inst.assignment.A.rows()));
    return loss(x, inst.obs);
  };
  return (loss_at(w0 + h) - loss_at(w0 - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("loss: matching estimates give zero") {
  Observations obs;
  obs.observed_link_rows = {0, 2};
  obs.x0 = {5.0, 7.0};
  const std::vector<double> x{5.0, 99.0, 7.0};
  CHECK(loss(x, obs) == doctest::Approx(0.0));
}

TEST_CASE("loss: single observed row normalizes by the observed count") {
  Observations obs;
  obs.observed_link_rows = {0};
  obs.x0 = {10.0};
  const std::vector<double> x{12.0};
  CHECK(loss(x, obs) == doctest::Approx(4.0));
}

TEST_CASE("loss: quadratic homogeneity") {
  Observations obs;
  obs.observed_link_rows = {0, 1};
  obs.x0 = {10.0, 4.0};
  const std::vector<double> x1{12.0, 5.0};
  const std::vector<double> x2{14.0, 6.0};  // doubled residuals
  CHECK(loss(x2, obs) == doctest::Approx(4.0 * loss(x1, obs)));
}

TEST_CASE("loss: undefined without observations") {
  const std::vector<double> x{1.0};
  CHECK_THROWS_AS(loss(x, Observations{}), ValidationError);
}

TEST_CASE("loss_gradient_x: formula and support") {
  Observations obs;
  obs.observed_link_rows = {1};
  obs.x0 = {3.0};
  const std::vector<double> x{9.0, 5.0, 9.0};
  const auto g = loss_gradient_x(x, obs);
  CHECK(g[0] == 0.0);  // unobserved rows stay zero
  CHECK(g[1] == doctest::Approx(4.0));
  CHECK(g[2] == 0.0);

  const std::vector<double> exact{9.0, 3.0, 9.0};
  for (double v : loss_gradient_x(exact, obs)) CHECK(v == 0.0);
}

TEST_CASE("solution_sensitivity: scalar w_sx matches finite differences to 1e-6") {
  oracles::RandomInstance inst;
  SparseMatrix a(1, 1);
  a.add(0, 0, 1.0);
  a.finalize();
  inst.assignment.A = std::move(a);
  inst.obs.observed_link_rows = {0};
  inst.obs.x0 = {10.0};
  inst.hyper = {0.1, 0.1, 1.0, 0.0};

  const auto sol = recover(inst.assignment, inst.obs, inst.hyper, {1e-14, 0, false});
  const BlockSystem sys =
      assemble_system(inst.assignment, inst.obs, inst.hyper, Multipliers::zeros(1, 1));
  std::vector<double> e(sol.x);
  e.insert(e.end(), sol.q.begin(), sol.q.end());
  const auto sens = solution_sensitivity(sys, e, Hyper::w_sx, {1e-14, 0, false});
  const auto fd = fd_solution(inst, Hyper::w_sx, 1e-6);
  for (std::size_t i = 0; i < fd.size(); ++i)
    CHECK(std::abs(sens.dE[i] - fd[i]) / std::max(1e-12, std::abs(fd[i])) <= 1e-6);
}

TEST_CASE("solution_sensitivity: vanishing derivative blocks give zero sensitivity") {
  // no OD observations: dM/dw_sq = 0 and dV/dw_sq = 0
  const auto inst = oracles::random_instance(17);
  REQUIRE(inst.obs.observed_od_cols.empty());
  const auto sol = recover(inst.assignment, inst.obs, inst.hyper, {1e-12, 0, false});
  const BlockSystem sys = assemble_system(
      inst.assignment, inst.obs, inst.hyper,
      Multipliers::zeros(inst.assignment.A.rows(), inst.assignment.A.cols()));
  std::vector<double> e(sol.x);
  e.insert(e.end(), sol.q.begin(), sol.q.end());
  const auto sens = solution_sensitivity(sys, e, Hyper::w_sq);
  for (double v : sens.dE) CHECK(v == 0.0);
  CHECK(sens.cg_iterations == 0);
}

TEST_CASE("solution_sensitivity: all four match finite differences on random instances") {
  int with_q_obs = 0;
  for (std::uint64_t seed = 500; seed < 510; ++seed) {
    const auto inst = oracles::random_instance(seed, 20, 12);
    const auto sol = recover(inst.assignment, inst.obs, inst.hyper, {1e-13, 0, false});
    REQUIRE(sol.converged);
    const BlockSystem sys = assemble_system(
        inst.assignment, inst.obs, inst.hyper,
        Multipliers::zeros(inst.assignment.A.rows(), inst.assignment.A.cols()));
    std::vector<double> e(sol.x);
    e.insert(e.end(), sol.q.begin(), sol.q.end());
    if (!inst.obs.observed_od_cols.empty()) ++with_q_obs;
    for (Hyper which : kAllHypers) {
      if (which == Hyper::w_sq && inst.obs.observed_od_cols.empty()) continue;
      const auto sens = solution_sensitivity(sys, e, which, {1e-13, 0, false});
      const auto fd = fd_solution(inst, which, 1e-5);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < fd.size(); ++i) {
        num += (sens.dE[i] - fd[i]) * (sens.dE[i] - fd[i]);
        den += fd[i] * fd[i];
      }
      CHECK(std::sqrt(num) <= 1e-4 * std::max(1e-8, std::sqrt(den)));
    }
  }
  CHECK(with_q_obs > 0);  // the sweep must exercise the w_sq branch
}

TEST_CASE("chain rule: dL/dw equals the x-block inner product identity") {
  const auto inst = oracles::random_instance(321, 20, 12);
  const auto sol = recover(inst.assignment, inst.obs, inst.hyper, {1e-13, 0, false});
  const BlockSystem sys = assemble_system(
      inst.assignment, inst.obs, inst.hyper,
      Multipliers::zeros(inst.assignment.A.rows(), inst.assignment.A.cols()));
  const LossReport report = evaluate_loss_and_gradient(sys, sol, {1e-13, 0, false});

  const auto dl_dx = loss_gradient_x(sol.x, inst.obs);
  std::vector<double> e(sol.x);
  e.insert(e.end(), sol.q.begin(), sol.q.end());
  for (std::size_t h = 0; h < kAllHypers.size(); ++h) {
    const auto sens = solution_sensitivity(sys, e, kAllHypers[h], {1e-13, 0, false});
    double inner = 0.0;
    for (int i = 0; i < sys.n_x(); ++i) inner += dl_dx[i] * sens.dE[i];
    CHECK(std::abs(report.gradient[h] - inner) <= 1e-12 * std::max(1.0, std::abs(inner)));
  }
}

TEST_CASE("loss gradients match finite differences of the loss itself") {
  for (std::uint64_t seed = 600; seed < 606; ++seed) {
    const auto inst = oracles::random_instance(seed, 16, 10);
    const auto sol = recover(inst.assignment, inst.obs, inst.hyper, {1e-13, 0, false});
    const BlockSystem sys = assemble_system(
        inst.assignment, inst.obs, inst.hyper,
        Multipliers::zeros(inst.assignment.A.rows(), inst.assignment.A.cols()));
    const LossReport report = evaluate_loss_and_gradient(sys, sol, {1e-13, 0, false});
    for (std::size_t h = 0; h < kAllHypers.size(); ++h) {
      const double fd = fd_loss(inst, kAllHypers[h], 1e-5);
      CHECK(std::abs(report.gradient[h] - fd) <=
            std::max(1e-4 * std::abs(fd), 1e-8));
    }
  }
}

namespace {

TrainingSample scalar_sample(double x0, const char* label) {
  TrainingSample s;
  SparseMatrix a(1, 1);
  a.add(0, 0, 1.0);
  a.finalize();
  s.assignment.A = std::move(a);
  s.obs.observed_link_rows = {0};
  s.obs.x0 = {x0};
  s.label = label;
  return s;
}

}  // namespace

TEST_CASE("sgd_tune: zero gradient is a fixed point") {
  // x0 = 0 makes the solution, the loss, and the gradient identically zero
  std::vector<TrainingSample> samples{scalar_sample(0.0, "zero")};
  SgdConfig config;
  config.epochs = 20;
  config.seed = 1;
  const Hyperparameters init{0.5, 0.5, 0.5, 0.5};
  const SgdResult result = sgd_tune(samples, config, init);
  CHECK(result.hyper.w_x == init.w_x);
  CHECK(result.hyper.w_q == init.w_q);
  CHECK(result.hyper.w_sx == init.w_sx);
  CHECK(result.hyper.w_sq == init.w_sq);
  for (const auto& p : result.trajectory) CHECK(p.loss == 0.0);
}

TEST_CASE("sgd_tune: loss after 100 epochs does not exceed the initial loss") {
  std::vector<TrainingSample> samples{scalar_sample(10.0, "s")};
  SgdConfig config;
  config.epochs = 100;
  config.seed = 7;
  config.cg.tol = 1e-12;
  const Hyperparameters init{0.5, 0.5, 0.5, 0.5};
  const SgdResult result = sgd_tune(samples, config, init);
  REQUIRE(result.trajectory.size() == 100);
  CHECK(result.trajectory.back().loss <= result.trajectory.front().loss);
}

TEST_CASE("sgd_tune: seeded runs are bit-identical") {
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 4; ++i)
    samples.push_back(scalar_sample(5.0 + i, ("s" + std::to_string(i)).c_str()));
  SgdConfig config;
  config.epochs = 30;
  config.seed = 99;
  const Hyperparameters init = random_init(4);
  const SgdResult a = sgd_tune(samples, config, init);
  const SgdResult b = sgd_tune(samples, config, init);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].sample_index == b.trajectory[i].sample_index);
    CHECK(a.trajectory[i].loss == b.trajectory[i].loss);
    CHECK(a.trajectory[i].hyper.w_x == b.trajectory[i].hyper.w_x);
    CHECK(a.trajectory[i].hyper.w_q == b.trajectory[i].hyper.w_q);
    CHECK(a.trajectory[i].hyper.w_sx == b.trajectory[i].hyper.w_sx);
    CHECK(a.trajectory[i].hyper.w_sq == b.trajectory[i].hyper.w_sq);
  }
}

TEST_CASE("sgd_tune: hyperparameters never fall below the floor") {
  std::vector<TrainingSample> samples{scalar_sample(50.0, "big")};
  SgdConfig config;
  config.epochs = 50;
  config.seed = 3;
  config.learning_rate = 10.0;  // deliberately unstable steps
  const SgdResult result = sgd_tune(samples, config, {1.0, 1.0, 1.0, 1.0});
  for (const auto& p : result.trajectory) {
    CHECK(p.hyper.w_x >= config.hyper_floor);
    CHECK(p.hyper.w_q >= config.hyper_floor);
    CHECK(p.hyper.w_sx >= config.hyper_floor);
    CHECK(p.hyper.w_sq >= config.hyper_floor);
  }
}

TEST_CASE("sgd_tune: failed solves are skipped without repeating the epoch") {
  std::vector<TrainingSample> samples{scalar_sample(10.0, "s")};
  SgdConfig config;
  config.epochs = 5;
  config.seed = 2;
  config.cg.max_iter = 1;
  config.cg.tol = 1e-16;  // unreachable: every epoch fails and is skipped
  const SgdResult result = sgd_tune(samples, config, {0.5, 0.5, 0.5, 0.5});
  CHECK(result.trajectory.size() == 5);
  CHECK(result.skipped_epochs == 5);
  CHECK(result.hyper.w_x == 0.5);
}

TEST_CASE("sgd_tune: validation of config and inputs") {
  std::vector<TrainingSample> samples{scalar_sample(1.0, "s")};
  SgdConfig bad;
  bad.epochs = 0;
  const Hyperparameters init{0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(sgd_tune(samples, bad, init), ValidationError);
  SgdConfig ok;
  CHECK_THROWS_AS(sgd_tune({}, ok, init), ValidationError);
}

TEST_CASE("random_init spans the expected range and is seeded") {
  const Hyperparameters a = random_init(11);
  const Hyperparameters b = random_init(11);
  CHECK(a.w_x == b.w_x);
  for (double v : {a.w_x, a.w_q, a.w_sx, a.w_sq}) {
    CHECK(v >= 1e-3);
    CHECK(v <= 10.0);
  }
}
