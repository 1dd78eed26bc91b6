#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <vector>

namespace spiralis {

enum class SolveStatus { OK, MAX_ITER, FAILED };

/// Large sparse problem in matrix-free form, as consumed by solve_auglag:
///   min f(z)  s.t.  c_eq(z) = 0,  c_ineq(z) <= 0,  lb <= z <= ub.
/// Jacobians are only ever needed as transpose products, which keeps the
/// transcription at its natural size.
class AugLagProblem {
 public:
  virtual ~AugLagProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;

  /// Fills elementwise bounds; use +-infinity for absent ones. Equal lower
  /// and upper bounds freeze a variable.
  virtual void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const = 0;

  virtual double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const = 0;

  virtual void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& ceq,
                           Eigen::VectorXd& cineq) const = 0;

  /// out += Jeq(z)^T * yeq + Jineq(z)^T * yineq.
  virtual void add_constraint_gradients(const Eigen::VectorXd& z,
                                        const Eigen::VectorXd& yeq,
                                        const Eigen::VectorXd& yineq,
                                        Eigen::VectorXd& out) const = 0;
};

struct AugLagOptions {
  double tol_feas = 1e-8;
  double tol_opt = 1e-6;   // projected-gradient norm of the Lagrangian
  int max_outer = 60;
  int max_inner = 4000;    // inner iterations per outer round
  double penalty0 = 10.0;
  double penalty_mult = 10.0;   // applied when feasibility stalls
  double feas_drop = 4.0;       // required per-round feasibility reduction
  double penalty_max = 1e12;
  int lbfgs_memory = 10;
  std::ostream* log = nullptr;  // CSV iteration log (iter,obj,feas,opt)
};

struct AugLagResult {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda_eq;   // equality multipliers (L = f + y^T c)
  Eigen::VectorXd mu_ineq;     // inequality multipliers, >= 0
  double objective = 0.0;
  double feasibility = 0.0;    // max constraint violation
  double stationarity = 0.0;   // projected gradient norm of the Lagrangian
  double complementarity = 0.0;
  int outer_iters = 0;
  int inner_iters = 0;
  SolveStatus status = SolveStatus::FAILED;
};

/// Augmented-Lagrangian solver. Equalities use the classical quadratic term;
/// inequalities use the squared-hinge form, so no slack variables are added.
/// The inner bound-constrained subproblems are minimized by projected
/// limited-memory BFGS with an Armijo backtracking search along the
/// projected direction. Deterministic: identical inputs produce identical
/// iterate sequences.
AugLagResult solve_auglag(const AugLagProblem& p, const Eigen::VectorXd& start,
                          const AugLagOptions& opts = {});

/// Small dense equality-constrained problem, as consumed by solve_sqp:
///   min f(z)  s.t.  c(z) = 0   (m <= n), with optional simple bounds kept
/// strictly feasible by a fraction-to-boundary step cap.
class DenseNlp {
 public:
  virtual ~DenseNlp() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;

  virtual double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const = 0;

  /// Constraint values and dense Jacobian (m x n).
  virtual void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                           Eigen::MatrixXd& J) const = 0;

  /// Hessian of L = f(z) + y^T c(z). The default dense FD fallback is absent
  /// on purpose: callers supply exact second derivatives.
  virtual void lagrangian_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                                  Eigen::MatrixXd& H) const = 0;

  /// Optional open-box bounds (default unbounded).
  virtual void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const;
};

struct SqpOptions {
  double tol_kkt = 1e-12;   // stationarity
  double tol_feas = 1e-10;  // constraint violation; the propagated residuals
                            // bottom out above 1e-12 in double precision
  int max_iter = 200;
  double levenberg0 = 1e-8;    // first regularization shift on a singular KKT
  double levenberg_max = 1e+4;
  std::ostream* log = nullptr;
};

struct SqpResult {
  Eigen::VectorXd z;
  Eigen::VectorXd y;           // equality multipliers (L = f + y^T c)
  double objective = 0.0;
  double feasibility = 0.0;    // max |c|
  double stationarity = 0.0;   // ||grad f + J^T y||_inf
  int iters = 0;
  SolveStatus status = SolveStatus::FAILED;
};

/// Full-Newton iteration on the KKT system with an l1 exact-penalty merit
/// line search. When m = n the problem carries no degrees of freedom and the
/// iteration degenerates to Newton root-finding on the constraints alone
/// (detected automatically). A singular KKT matrix is retried with growing
/// Levenberg shifts before giving up.
SqpResult solve_sqp(const DenseNlp& p, const Eigen::VectorXd& start,
                    const SqpOptions& opts = {});

}  // namespace spiralis
