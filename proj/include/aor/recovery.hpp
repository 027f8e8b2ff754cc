#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aor/assignment.hpp"
#include "aor/sparse.hpp"

namespace aor {

/// Sparse flow observations and demand priors. Rows/columns are flat
/// (link, bin) / (od, bin) indices; the selector matrices are implicit.
struct Observations {
  std::vector<int> observed_link_rows;  // defines M_x
  std::vector<double> x0;
  std::vector<int> observed_od_cols;  // defines M_q
  std::vector<double> q0;

  void validate(int n_x, int n_q) const;

  /// M_x^T x0 scattered into a dense n_x vector (same for the q side).
  std::vector<double> scatter_x0(int n_x) const;
  std::vector<double> scatter_q0(int n_q) const;
};

struct Hyperparameters {
  double w_x = 0.0;
  double w_q = 0.0;
  double w_sx = 0.0;
  double w_sq = 0.0;

  /// w_x, w_q strictly positive keep the block system positive definite.
  void validate() const;
};

/// Non-negativity multipliers; enter the right-hand side of the system.
struct Multipliers {
  std::vector<double> lambda_x;
  std::vector<double> lambda_q;

  static Multipliers zeros(int n_x, int n_q);
};

/// The symmetric block operator
///   M = [ (1+w_x)I + w_sx Mx^T Mx        -A                          ]
///       [ -A^T                            A^T A + w_q I + w_sq Mq^T Mq ]
/// applied matrix-free (A^T A is never materialized), with right-hand side
///   V = [ w_sx Mx^T x0 + lambda_x ; w_sq Mq^T q0 + lambda_q ].
/// Immutable once assembled; safe for concurrent solves.
class BlockSystem {
 public:
  BlockSystem(const AssignmentMatrix& assignment, Observations obs, Hyperparameters hyper,
              Multipliers multipliers);

  int n_x() const { return n_x_; }
  int n_q() const { return n_q_; }
  int dim() const { return n_x_ + n_q_; }

  const Hyperparameters& hyper() const { return hyper_; }
  const Observations& observations() const { return obs_; }
  const SparseMatrix& assignment() const { return *A_; }

  std::span<const double> rhs() const { return rhs_; }

  /// out = M v.
  void apply(std::span<const double> v, std::span<double> out) const;

  /// diag(M), for the optional Jacobi preconditioner.
  std::vector<double> diagonal() const;

  /// 1 where the flat index is observed, else 0.
  std::span<const char> x_observed_mask() const { return x_mask_; }
  std::span<const char> q_observed_mask() const { return q_mask_; }

 private:
  const SparseMatrix* A_;
  Observations obs_;
  Hyperparameters hyper_;
  int n_x_;
  int n_q_;
  std::vector<char> x_mask_;
  std::vector<char> q_mask_;
  std::vector<double> rhs_;
};

BlockSystem assemble_system(const AssignmentMatrix& assignment, const Observations& obs,
                            const Hyperparameters& hyper, const Multipliers& multipliers);

struct CgOptions {
  double tol = 1e-8;
  std::int64_t max_iter = 0;  // 0: defaults to 10 * (n_x + n_q)
  bool jacobi = false;
};

struct RecoveryResult {
  std::vector<double> x;
  std::vector<double> q;
  std::int64_t cg_iterations = 0;
  double residual_norm = 0.0;  // ||M E - V||_2 at exit
  bool converged = false;
  int negative_x_count = 0;  // negatives observed before any projection
  int negative_q_count = 0;
};

/// Conjugate gradient on the block system from a zero start. Non-convergence
/// after max_iter is reported through the flag, never thrown.
RecoveryResult solve_cg(const BlockSystem& system, const CgOptions& options = {});

/// Unconstrained analytical recovery: assemble with zero multipliers and
/// solve. Negative entries are counted, not altered.
RecoveryResult recover(const AssignmentMatrix& assignment, const Observations& obs,
                       const Hyperparameters& hyper, const CgOptions& options = {});

}  // namespace aor
