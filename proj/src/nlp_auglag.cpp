#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "spiralis/nlp.hpp"

namespace spiralis {

namespace {

using Eigen::VectorXd;

VectorXd clamp(const VectorXd& z, const VectorXd& lb, const VectorXd& ub) {
  return z.cwiseMax(lb).cwiseMin(ub);
}

struct LbfgsHistory {
  std::deque<std::pair<VectorXd, VectorXd>> pairs;  // (s, y)
  int memory;

  explicit LbfgsHistory(int m) : memory(m) {}

  void clear() { pairs.clear(); }

  void push(const VectorXd& s, const VectorXd& y) {
    const double sy = s.dot(y);
    if (sy <= 1e-10 * s.norm() * y.norm()) return;  // curvature safeguard
    pairs.emplace_back(s, y);
    if (static_cast<int>(pairs.size()) > memory) pairs.pop_front();
  }

  // Two-loop recursion started from the diagonal metric dinv ~ diag(H)^-1;
  // returns an approximation of -H^-1 * g. The diagonal start matters here:
  // penalty curvature differs by orders of magnitude between variable
  // classes, and a scalar initial scaling leaves the recursion grinding on
  // that imbalance instead of the genuine coupling.
  VectorXd direction(const VectorXd& g, const VectorXd& dinv) const {
    VectorXd q = g;
    std::vector<double> alpha(pairs.size());
    for (std::size_t i = pairs.size(); i-- > 0;) {
      const auto& [s, y] = pairs[i];
      alpha[i] = s.dot(q) / s.dot(y);
      q -= alpha[i] * y;
    }
    q = dinv.cwiseProduct(q);
    if (!pairs.empty()) {
      const auto& [s, y] = pairs.back();
      q *= s.dot(y) / y.dot(dinv.cwiseProduct(y));
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& [s, y] = pairs[i];
      const double beta = y.dot(q) / s.dot(y);
      q += (alpha[i] - beta) * s;
    }
    return -q;
  }
};

struct Evaluator {
  const AugLagProblem& p;
  VectorXd lambda, mu;
  double rho;

  // Augmented objective; the inequality part is the squared-hinge form, so
  // the function stays C1 without slack variables.
  double value(const VectorXd& z, VectorXd* grad) const {
    VectorXd gradf(z.size());
    const double f = p.objective(z, gradf);
    VectorXd ceq(p.num_eq()), cin(p.num_ineq());
    p.constraints(z, ceq, cin);
    double val = f + lambda.dot(ceq) + 0.5 * rho * ceq.squaredNorm();
    VectorXd hinge = (mu + rho * cin).cwiseMax(0.0);
    if (cin.size() > 0) val += (hinge.squaredNorm() - mu.squaredNorm()) / (2.0 * rho);
    if (grad) {
      *grad = gradf;
      VectorXd weq = lambda + rho * ceq;
      p.add_constraint_gradients(z, weq, hinge, *grad);
    }
    if (!std::isfinite(val)) throw std::runtime_error("auglag: non-finite objective");
    return val;
  }

  // Forward-difference estimate of the augmented Hessian diagonal, used as
  // the inner solver's initial metric. Deterministic coordinate probes keep
  // runs bitwise reproducible; negative or vanishing entries (nonconvex or
  // flat directions) are floored to the dominant scale so the metric stays
  // positive.
  VectorXd hessian_diagonal(const VectorXd& z, const VectorXd& g0) const {
    const int n = static_cast<int>(z.size());
    VectorXd diag(n), gp(n);
    VectorXd zp = z;
    for (int i = 0; i < n; ++i) {
      const double delta = 1e-6 * std::max(1.0, std::abs(z[i]));
      const double saved = zp[i];
      zp[i] = saved + delta;
      value(zp, &gp);
      zp[i] = saved;
      diag[i] = (gp[i] - g0[i]) / delta;
    }
    const double dmax = diag.maxCoeff();
    const double floor = std::max(1e-8 * std::max(dmax, 0.0), 1e-12);
    return diag.cwiseMax(floor);
  }
};

}  // namespace

AugLagResult solve_auglag(const AugLagProblem& p, const Eigen::VectorXd& start,
                          const AugLagOptions& opts) {
  const int n = p.num_vars();
  if (start.size() != n) throw std::invalid_argument("auglag: start size mismatch");
  VectorXd lb(n), ub(n);
  p.bounds(lb, ub);

  AugLagResult res;
  VectorXd z = clamp(start, lb, ub);
  Evaluator ev{p, VectorXd::Zero(p.num_eq()), VectorXd::Zero(p.num_ineq()), opts.penalty0};

  auto violation = [&](const VectorXd& zz, VectorXd& ceq, VectorXd& cin) {
    p.constraints(zz, ceq, cin);
    double v = ceq.size() ? ceq.cwiseAbs().maxCoeff() : 0.0;
    if (cin.size()) v = std::max(v, cin.maxCoeff());
    return std::max(v, 0.0);
  };

  // Projected-gradient norm of the true Lagrangian with the current
  // multiplier estimates; this is the optimality measure reported outside.
  auto stationarity = [&](const VectorXd& zz) {
    VectorXd g(n);
    p.objective(zz, g);
    p.add_constraint_gradients(zz, ev.lambda, ev.mu, g);
    return (zz - clamp(zz - g, lb, ub)).cwiseAbs().maxCoeff();
  };

  VectorXd ceq(p.num_eq()), cin(p.num_ineq());
  double viol = violation(z, ceq, cin);
  double best_score = std::numeric_limits<double>::infinity();
  VectorXd best_z = z;

  // The multipliers are updated only while the violation keeps up with the
  // gate eta; updating them unconditionally lets a stalled violation pump
  // them by rho * c every round until the subproblems become unsolvable.
  // The penalty reacts to the violation trend instead (grow on a stall).
  double omega = std::min(1e-1, 1.0 / ev.rho);          // inner target
  double eta = std::min(1e-1, std::pow(ev.rho, -0.1));  // update gate
  int total_inner = 0;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    res.outer_iters = outer + 1;

    // ---- inner: projected L-BFGS on the augmented Lagrangian ----
    LbfgsHistory hist(opts.lbfgs_memory);
    VectorXd grad(n);
    double phi = ev.value(z, &grad);
    VectorXd dinv = ev.hessian_diagonal(z, grad).cwiseInverse();
    const double omega_k = std::max(omega, opts.tol_opt);
    for (int it = 0; it < opts.max_inner; ++it) {
      const VectorXd pg = z - clamp(z - grad, lb, ub);
      if (pg.cwiseAbs().maxCoeff() <= omega_k) break;
      ++total_inner;

      VectorXd d = hist.direction(grad, dinv);
      if (d.dot(grad) > -1e-12 * d.norm() * grad.norm())
        d = -dinv.cwiseProduct(grad);

      // Backtracking Armijo search along the projected path.
      double alpha = 1.0;
      double phi_new = phi;
      VectorXd z_new;
      bool accepted = false;
      for (int ls = 0; ls < 48; ++ls) {
        z_new = clamp(z + alpha * d, lb, ub);
        const VectorXd step = z_new - z;
        if (step.cwiseAbs().maxCoeff() == 0.0) break;
        phi_new = ev.value(z_new, nullptr);
        if (phi_new <= phi + 1e-4 * grad.dot(step)) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // A failed search along the quasi-Newton direction usually means the
        // stored curvature is stale; drop it and retry along the scaled
        // gradient before handing control back to the outer loop.
        if (hist.pairs.empty()) break;
        hist.clear();
        continue;
      }

      VectorXd grad_new(n);
      const double phi_chk = ev.value(z_new, &grad_new);
      hist.push(z_new - z, grad_new - grad);
      z = z_new;
      phi = phi_chk;
      grad = grad_new;

      if (opts.log) {
        (*opts.log) << outer << ',' << it << ',' << phi << ',' << viol << ','
                    << pg.cwiseAbs().maxCoeff() << '\n';
      }
    }

    // ---- outer: gated multiplier update, trend-driven penalty ----
    const double viol_prev = viol;
    viol = violation(z, ceq, cin);
    if (viol <= std::max(eta, opts.tol_feas)) {
      ev.lambda += ev.rho * ceq;
      ev.mu = (ev.mu + ev.rho * cin).cwiseMax(0.0);
      // After this first-order update the augmented gradient at z equals
      // the Lagrangian gradient at the new multipliers, so the inner target
      // is exactly the stationarity delivered here.
      omega /= ev.rho;
      eta /= std::pow(ev.rho, 0.9);
    }
    if (viol > viol_prev / opts.feas_drop && ev.rho < opts.penalty_max) {
      ev.rho = std::min(ev.rho * opts.penalty_mult, opts.penalty_max);
      omega = std::min(1e-1, 1.0 / ev.rho);
      eta = std::min(1e-1, std::pow(ev.rho, -0.1));
    }

    const double stat = stationarity(z);
    const double score = std::max(viol, stat);
    if (score < best_score) {
      best_score = score;
      best_z = z;
      res.lambda_eq = ev.lambda;
      res.mu_ineq = ev.mu;
    }
    if (viol <= opts.tol_feas && stat <= opts.tol_opt) {
      res.status = SolveStatus::OK;
      break;
    }
  }

  if (res.status != SolveStatus::OK) res.status = SolveStatus::MAX_ITER;
  z = best_z;
  if (res.lambda_eq.size() == 0) res.lambda_eq = ev.lambda;
  if (res.mu_ineq.size() == 0) res.mu_ineq = ev.mu;
  res.z = z;
  res.inner_iters = total_inner;

  VectorXd gradf(n);
  res.objective = p.objective(z, gradf);
  res.feasibility = violation(z, ceq, cin);
  ev.lambda = res.lambda_eq;
  ev.mu = res.mu_ineq;
  res.stationarity = stationarity(z);
  res.complementarity = 0.0;
  for (int i = 0; i < cin.size(); ++i)
    res.complementarity = std::max(res.complementarity, std::abs(res.mu_ineq[i] * cin[i]));
  return res;
}

}  // namespace spiralis
