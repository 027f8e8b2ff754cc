#include "aor/recovery.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "aor/common.hpp"

namespace aor {

namespace {

void check_index_list(const std::vector<int>& idx, const std::vector<double>& vals, int bound,
                      const char* what) {
  if (idx.size() != vals.size())
    throw ValidationError(std::string(what) + ": index/value length mismatch");
  std::vector<char> seen(static_cast<std::size_t>(bound), 0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= bound)
      throw ValidationError(std::string(what) + ": index " + std::to_string(idx[i]) +
                            " out of range");
    if (seen[idx[i]]) throw ValidationError(std::string(what) + ": duplicate index");
    seen[idx[i]] = 1;
    if (!(vals[i] >= 0.0) || !std::isfinite(vals[i]))
      throw ValidationError(std::string(what) + ": values must be non-negative and finite");
  }
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

void Observations::validate(int n_x, int n_q) const {
  check_index_list(observed_link_rows, x0, n_x, "observed link flows");
  check_index_list(observed_od_cols, q0, n_q, "observed OD demands");
}

std::vector<double> Observations::scatter_x0(int n_x) const {
  std::vector<double> out(static_cast<std::size_t>(n_x), 0.0);
  for (std::size_t i = 0; i < observed_link_rows.size(); ++i) out[observed_link_rows[i]] = x0[i];
  return out;
}

std::vector<double> Observations::scatter_q0(int n_q) const {
  std::vector<double> out(static_cast<std::size_t>(n_q), 0.0);
  for (std::size_t i = 0; i < observed_od_cols.size(); ++i) out[observed_od_cols[i]] = q0[i];
  return out;
}

void Hyperparameters::validate() const {
  if (!(w_x > 0.0) || !(w_q > 0.0))
    throw ValidationError("hyperparameters: w_x and w_q must be strictly positive");
  if (w_sx < 0.0 || w_sq < 0.0)
    throw ValidationError("hyperparameters: w_sx and w_sq must be non-negative");
  for (double w : {w_x, w_q, w_sx, w_sq})
    if (!std::isfinite(w)) throw ValidationError("hyperparameters: non-finite weight");
}

Multipliers Multipliers::zeros(int n_x, int n_q) {
  Multipliers m;
  m.lambda_x.assign(static_cast<std::size_t>(n_x), 0.0);
  m.lambda_q.assign(static_cast<std::size_t>(n_q), 0.0);
  return m;
}

BlockSystem::BlockSystem(const AssignmentMatrix& assignment, Observations obs,
                         Hyperparameters hyper, Multipliers multipliers)
    : A_(&assignment.A),
      obs_(std::move(obs)),
      hyper_(hyper),
      n_x_(assignment.A.rows()),
      n_q_(assignment.A.cols()) {
  obs_.validate(n_x_, n_q_);
  if (multipliers.lambda_x.size() != static_cast<std::size_t>(n_x_) ||
      multipliers.lambda_q.size() != static_cast<std::size_t>(n_q_))
    throw ValidationError("BlockSystem: multiplier dimensions do not match the assignment matrix");

  x_mask_.assign(static_cast<std::size_t>(n_x_), 0);
  for (int r : obs_.observed_link_rows) x_mask_[r] = 1;
  q_mask_.assign(static_cast<std::size_t>(n_q_), 0);
  for (int c : obs_.observed_od_cols) q_mask_[c] = 1;

  rhs_.assign(static_cast<std::size_t>(dim()), 0.0);
  for (std::size_t i = 0; i < obs_.observed_link_rows.size(); ++i)
    rhs_[obs_.observed_link_rows[i]] = hyper_.w_sx * obs_.x0[i];
  for (std::size_t i = 0; i < obs_.observed_od_cols.size(); ++i)
    rhs_[n_x_ + obs_.observed_od_cols[i]] = hyper_.w_sq * obs_.q0[i];
  for (int i = 0; i < n_x_; ++i) rhs_[i] += multipliers.lambda_x[i];
  for (int j = 0; j < n_q_; ++j) rhs_[n_x_ + j] += multipliers.lambda_q[j];
}

void BlockSystem::apply(std::span<const double> v, std::span<double> out) const {
  if (static_cast<int>(v.size()) != dim() || static_cast<int>(out.size()) != dim())
    throw ValidationError("BlockSystem::apply: dimension mismatch");
  const auto v_x = v.subspan(0, n_x_);
  const auto v_q = v.subspan(n_x_, n_q_);
  auto out_x = out.subspan(0, n_x_);
  auto out_q = out.subspan(n_x_, n_q_);

  // per-thread workspace so concurrent solves can share one system
  thread_local std::vector<double> scratch;
  scratch.assign(static_cast<std::size_t>(n_x_), 0.0);
  std::span<double> Avq(scratch.data(), static_cast<std::size_t>(n_x_));

  // top block: (1 + w_x) v_x + w_sx Mx^T Mx v_x - A v_q
  A_->multiply_vector(v_q, Avq);
  for (int i = 0; i < n_x_; ++i) {
    double r = (1.0 + hyper_.w_x) * v_x[i] - Avq[i];
    if (x_mask_[i]) r += hyper_.w_sx * v_x[i];
    out_x[i] = r;
  }

  // bottom block: -A^T v_x + A^T (A v_q) + w_q v_q + w_sq Mq^T Mq v_q,
  // folded into one transposed pass over A^T (A v_q - v_x)
  for (int i = 0; i < n_x_; ++i) Avq[i] -= v_x[i];
  A_->multiply_transposed(Avq, out_q);
  for (int j = 0; j < n_q_; ++j) {
    out_q[j] += hyper_.w_q * v_q[j];
    if (q_mask_[j]) out_q[j] += hyper_.w_sq * v_q[j];
  }
}

std::vector<double> BlockSystem::diagonal() const {
  std::vector<double> d(static_cast<std::size_t>(dim()), 0.0);
  for (int i = 0; i < n_x_; ++i) d[i] = 1.0 + hyper_.w_x + (x_mask_[i] ? hyper_.w_sx : 0.0);
  const std::vector<double> gram = A_->gram_diagonal();
  for (int j = 0; j < n_q_; ++j)
    d[n_x_ + j] = gram[j] + hyper_.w_q + (q_mask_[j] ? hyper_.w_sq : 0.0);
  return d;
}

BlockSystem assemble_system(const AssignmentMatrix& assignment, const Observations& obs,
                            const Hyperparameters& hyper, const Multipliers& multipliers) {
  return BlockSystem(assignment, obs, hyper, multipliers);
}

RecoveryResult solve_cg(const BlockSystem& system, const CgOptions& options) {
  if (!(options.tol > 0.0)) throw ValidationError("solve_cg: tol must be positive");
  const int n = system.dim();
  const std::int64_t max_iter =
      options.max_iter > 0 ? options.max_iter : static_cast<std::int64_t>(10) * n;

  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  std::vector<double> r(system.rhs().begin(), system.rhs().end());  // r = V - M*0
  const double rhs_norm = norm2(r);

  RecoveryResult result;
  auto finish = [&](std::int64_t iters, bool converged) {
    // report the true residual at exit
    std::vector<double> me(static_cast<std::size_t>(n));
    system.apply(e, me);
    for (int i = 0; i < n; ++i) me[i] -= system.rhs()[i];
    result.residual_norm = norm2(me);
    result.cg_iterations = iters;
    result.converged = converged;
    result.x.assign(e.begin(), e.begin() + system.n_x());
    result.q.assign(e.begin() + system.n_x(), e.end());
    for (double v : result.x)
      if (v < 0.0) ++result.negative_x_count;
    for (double v : result.q)
      if (v < 0.0) ++result.negative_q_count;
    return result;
  };

  if (rhs_norm == 0.0) return finish(0, true);

  std::vector<double> precond;
  if (options.jacobi) precond = system.diagonal();
  auto apply_precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (options.jacobi) {
      for (int i = 0; i < n; ++i) out[i] = in[i] / precond[i];
    } else {
      out = in;
    }
  };

  std::vector<double> z(static_cast<std::size_t>(n));
  apply_precond(r, z);
  std::vector<double> p = z;
  std::vector<double> mp(static_cast<std::size_t>(n));
  double rz = dot(r, z);

  for (std::int64_t it = 1; it <= max_iter; ++it) {
    system.apply(p, mp);
    const double pmp = dot(p, mp);
    if (pmp <= 0.0) return finish(it - 1, false);  // loss of positive definiteness
    const double alpha = rz / pmp;
    for (int i = 0; i < n; ++i) {
      e[i] += alpha * p[i];
      r[i] -= alpha * mp[i];
    }
    if (norm2(r) <= options.tol * rhs_norm) return finish(it, true);
    apply_precond(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return finish(max_iter, false);
}

RecoveryResult recover(const AssignmentMatrix& assignment, const Observations& obs,
                       const Hyperparameters& hyper, const CgOptions& options) {
  hyper.validate();
  const BlockSystem system =
      assemble_system(assignment, obs, hyper,
                      Multipliers::zeros(assignment.A.rows(), assignment.A.cols()));
  return solve_cg(system, options);
}

}  // namespace aor
