#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "spiralis/problem.hpp"
#include "spiralis/structure.hpp"

namespace spiralis {

enum class Scheme { EULER, GL6 };

struct IntegratorConfig {
  Scheme scheme = Scheme::GL6;
  int steps = 400;             // per horizon (or per arc for arc stepping)
  double stage_tol = 1e-14;    // implicit stage residual target
  int stage_max_iter = 50;
};

/// One explicit Euler step: s + h * f(s, u).
State euler_step(const State& s, double u, double h);

/// One step of the 3-stage Gauss-Legendre collocation scheme (order 6).
/// Stages are solved by Newton iteration on the 12x12 stage system with the
/// analytic stage Jacobian; a damped fixed-point sweep is the fallback if
/// that Jacobian ever fails to factor. Throws std::runtime_error when the
/// stage iteration does not reach cfg.stage_tol.
State gl6_step(const State& s, double u, double h, const IntegratorConfig& cfg = {});

/// Propagates the state through an arc of length xi under constant control,
/// using cfg.steps implicit steps.
State gl6_arc(const State& s, double u, double xi, const IntegratorConfig& cfg = {});

/// Integrates a whole arc sequence: arc k has constant control
/// control_value(kinds[k], b) and length xi[k]. Node samples of every arc are
/// concatenated (junction nodes shared), so the result has sum(steps_k) + 1
/// samples. steps_per_arc <= 0 picks cfg.steps split evenly per arc.
Trajectory simulate(const State& s0, const std::vector<ArcKind>& kinds,
                    const std::vector<double>& xi, double b,
                    const IntegratorConfig& cfg = {}, int steps_per_arc = 0);

/// First- and second-order sensitivities of the state with respect to a
/// parameter vector p, propagated exactly through the implicit GL6 stages by
/// differentiating the stage equations (no finite differences).
///
/// Conventions: S(:, q) = d s / d p_q (4 x P), and T[q](:, r) = d S(:, q) /
/// d p_r, symmetric in (q, r). Per step both the step size h and the control
/// u may depend linearly on p through the supplied gradients dh, du (their
/// second derivatives are zero, which is the case for arc-length and
/// bound-proportional parametrizations).
class Gl6Jets {
 public:
  Gl6Jets(int num_params, bool second_order);

  int num_params() const { return P_; }
  bool second_order() const { return second_; }

  /// Advances (y, S, T) through one implicit step. The stage linear systems
  /// for the sensitivities reuse the LU factorization of the converged
  /// Newton matrix.
  void step(State& y, Eigen::Matrix<double, 4, Eigen::Dynamic>& S,
            std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>>& T, double u,
            const Eigen::VectorXd& du, double h, const Eigen::VectorXd& dh,
            const IntegratorConfig& cfg = {}) const;

  /// Zero-initialized sensitivity containers of the right shape.
  Eigen::Matrix<double, 4, Eigen::Dynamic> make_S() const;
  std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>> make_T() const;

 private:
  int P_;
  bool second_;
};

/// One GL6 step for a linear, possibly time-varying ODE
///   y' = M(t) y + g(t),
/// solved exactly (one linear solve for the stacked stage system). Used for
/// adjoint propagation, where the coefficients depend on the already-known
/// state trajectory.
Eigen::VectorXd gl6_linear_step(
    const Eigen::VectorXd& y, double t, double h,
    const std::function<Eigen::MatrixXd(double)>& M,
    const std::function<Eigen::VectorXd(double)>& g);

}  // namespace spiralis
