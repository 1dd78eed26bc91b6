#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "spiralis/nlp.hpp"

namespace spiralis {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Newton directions from a poor start can be arbitrarily long while the
// linearization is only trusted locally; cap every component at half the
// variable's own scale and keep the multiplier step consistent.
double step_cap_factor(const VectorXd& z, const VectorXd& dz) {
  double over = 1.0;
  for (int i = 0; i < z.size(); ++i)
    over = std::max(over, std::abs(dz[i]) / (0.5 * std::max(1.0, std::abs(z[i]))));
  return 1.0 / over;
}

VectorXd clamp(const VectorXd& z, const VectorXd& lb, const VectorXd& ub) {
  return z.cwiseMax(lb).cwiseMin(ub);
}

}  // namespace

void DenseNlp::bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const {
  lb = VectorXd::Constant(num_vars(), -kInf);
  ub = VectorXd::Constant(num_vars(), kInf);
}

SqpResult solve_sqp(const DenseNlp& p, const Eigen::VectorXd& start,
                    const SqpOptions& opts) {
  const int n = p.num_vars();
  const int m = p.num_eq();
  if (m > n) throw std::invalid_argument("sqp: more equalities than unknowns");
  if (start.size() != n) throw std::invalid_argument("sqp: start size mismatch");

  VectorXd lb, ub;
  p.bounds(lb, ub);

  SqpResult res;
  VectorXd z = start.cwiseMax(lb).cwiseMin(ub);
  VectorXd g(n), c(m);
  MatrixXd J(m, n);

  double f = p.objective(z, g);
  p.constraints(z, c, J);

  // Initial multipliers from the least-squares stationarity fit.
  VectorXd y = VectorXd::Zero(m);
  if (m > 0) y = J.transpose().colPivHouseholderQr().solve(-g);

  const bool square = (m == n);
  double penalty = 1.0;   // l1 merit weight, kept above the multiplier scale
  double nu_lm = -1.0;    // adaptive damping of the LM steps, set on first use
  double nu_kkt = 0.0;    // persistent damping of the Newton-KKT steps
  bool restoring = false; // far-from-manifold phase of the non-square path
  int stalls = 0;
  double feas_mark = kInf;  // best feasibility at the last progress checkpoint
  double f_mark = kInf;     // objective there; merit runs may trade the two
  int mark_iter = 0;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    res.iters = iter;
    const double stat = m > 0 ? (g + J.transpose() * y).cwiseAbs().maxCoeff()
                              : g.cwiseAbs().maxCoeff();
    const double feas = m > 0 ? c.cwiseAbs().maxCoeff() : 0.0;
    if (opts.log)
      (*opts.log) << iter << ',' << f << ',' << feas << ',' << stat << ','
                  << nu_lm << ',' << nu_kkt << ',' << (restoring ? 1 : 0) << '\n';
    if (stat <= opts.tol_kkt && feas <= opts.tol_feas) {
      res.status = SolveStatus::OK;
      break;
    }

    // A start outside every basin descends the infeasibility without ever
    // closing it; cut those runs short so multi-seed callers stay cheap.
    if (feas < 0.5 * feas_mark || f < f_mark - 1e-9 * std::max(1.0, std::abs(f_mark))) {
      feas_mark = std::min(feas_mark, feas);
      f_mark = std::min(f_mark, f);
      mark_iter = iter;
    } else if (iter - mark_iter >= 40 && feas > 1e3 * opts.tol_feas) {
      res.status = SolveStatus::FAILED;
      break;
    }

    // ---- step computation ----
    VectorXd dz(n), dy = VectorXd::Zero(m);
    bool accepted = false;
    VectorXd z_new, c_new(m), g_new(n);
    MatrixXd J_new(m, n);
    double f_new = f;
    double alpha = 1.0;

    // Newton-KKT directions computed far from the constraint manifold are
    // unreliable (the merit happily trades feasibility for objective and
    // wedges in a box corner); restore feasibility first, with hysteresis
    // so the two phases do not alternate. A constant objective makes the
    // problem pure feasibility, for which the KKT phase has no curvature to
    // work with and the Gauss-Newton phase is the whole algorithm.
    const bool feas_only = g.cwiseAbs().maxCoeff() == 0.0;
    if (!square && !feas_only) {
      if (feas > 1e-3) restoring = true;
      else if (feas < 1e-5) restoring = false;
    }

    if (square || restoring || feas_only) {
      // Levenberg-Marquardt on c(z) = 0 with a gain-ratio damping update
      // and projection onto the box. One constraint evaluation per
      // attempted step. For m < n the shift also picks the damped
      // minimum-norm direction.
      const MatrixXd JtJ = J.transpose() * J;
      const VectorXd gphi = J.transpose() * c;
      if (nu_lm < 0.0) nu_lm = 1e-3 * std::max(1.0, JtJ.diagonal().maxCoeff());
      if (gphi.cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, feas)) {
        res.status = SolveStatus::FAILED;  // local minimum of the infeasibility
        break;
      }
      const double phi0 = 0.5 * c.squaredNorm();
      while (!accepted) {
        MatrixXd K = JtJ;
        K.diagonal().array() += nu_lm;
        const VectorXd step = K.ldlt().solve(-gphi);
        z_new = clamp(z + step, lb, ub);
        const VectorXd s = z_new - z;
        if (!step.allFinite() ||
            s.cwiseAbs().maxCoeff() <=
                1e-16 * std::max(1.0, z.cwiseAbs().maxCoeff())) {
          break;  // damped to a standstill against the bounds
        }
        f_new = p.objective(z_new, g_new);
        p.constraints(z_new, c_new, J_new);
        const double pred = -gphi.dot(s) - 0.5 * s.dot(JtJ * s);
        const double actual =
            c_new.allFinite() ? phi0 - 0.5 * c_new.squaredNorm() : -kInf;
        if (pred > 0.0 && actual >= 1e-4 * pred) {
          accepted = true;
          nu_lm = std::max(1e-12, nu_lm / 3.0);
        } else {
          // Second-order correction: near a fold of the constraint manifold
          // the damping otherwise equilibrates where curvature eats the
          // whole predicted reduction and progress crawls. Re-solving from
          // the trial point burns off the quadratic part of its residual;
          // only if the corrected pair still fails is the shift raised.
          bool soc_ok = false;
          if (pred > 0.0 && c_new.allFinite()) {
            MatrixXd K2 = J_new.transpose() * J_new;
            K2.diagonal().array() += nu_lm;
            const VectorXd corr =
                K2.ldlt().solve(-(J_new.transpose() * c_new));
            const VectorXd z_soc = clamp(z_new + corr, lb, ub);
            f_new = p.objective(z_soc, g_new);
            p.constraints(z_soc, c_new, J_new);
            const double actual_soc =
                c_new.allFinite() ? phi0 - 0.5 * c_new.squaredNorm() : -kInf;
            if (actual_soc >= 1e-4 * pred) {
              z_new = z_soc;
              accepted = true;
              soc_ok = true;
              nu_lm = std::max(1e-12, nu_lm / 3.0);
            }
          }
          if (!soc_ok) {
            nu_lm *= 4.0;
            if (nu_lm > 1e14) break;
          }
        }
      }
    } else {
      // Newton on the KKT system, damped by a persistent Levenberg shift
      // that acts as a trust region. With far-off multipliers the plain
      // quadratic model emits wildly long steps, and halving alpha along a
      // bad direction merely creeps; re-solving with a larger shift bends
      // the step toward a short tangential descent instead. The shift is
      // scaled by the Hessian's own magnitude, and alpha below 1/16 is
      // accepted only once the shift is exhausted.
      MatrixXd H(n, n);
      p.lagrangian_hessian(z, y, H);
      const double h_unit = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
      const double nu_cap = opts.levenberg_max * h_unit;
      double nu = std::min(nu_kkt, nu_cap);
      while (!accepted) {
        bool have_step = false;
        MatrixXd K = MatrixXd::Zero(n + m, n + m);
        K.topLeftCorner(n, n) = H;
        K.topLeftCorner(n, n).diagonal().array() += nu;
        K.topRightCorner(n, m) = J.transpose();
        K.bottomLeftCorner(m, n) = J;
        VectorXd rhs(n + m);
        rhs.head(n) = -(g + J.transpose() * y);
        rhs.tail(m) = -c;
        Eigen::FullPivLU<MatrixXd> lu(K);
        if (lu.isInvertible()) {
          VectorXd sol = lu.solve(rhs);
          dz = sol.head(n);
          dy = sol.tail(m);
          have_step = sol.allFinite();
        }

        if (have_step) {
          const double cap = step_cap_factor(z, dz);
          dz *= cap;
          dy *= cap;
          alpha = 1.0;
          penalty = std::max(penalty, 2.0 * (y + dy).cwiseAbs().maxCoeff() + 1.0);
          const double phi0 = f + penalty * c.cwiseAbs().sum();
          const double dd = g.dot(dz) - penalty * c.cwiseAbs().sum();
          const double alpha_floor = nu >= nu_cap ? 0.0 : 0.0625;
          for (int ls = 0; ls < 25 && !accepted && alpha >= alpha_floor; ++ls) {
            z_new = clamp(z + alpha * dz, lb, ub);
            f_new = p.objective(z_new, g_new);
            p.constraints(z_new, c_new, J_new);
            const double phi = f_new + penalty * c_new.cwiseAbs().sum();
            if (std::isfinite(phi) && phi <= phi0 + 1e-4 * alpha * std::min(dd, 0.0)) {
              accepted = true;
            } else if (ls == 0 && m > 0 && c_new.allFinite()) {
              // Second-order correction: fold the full step's constraint
              // residual back through the current Jacobian. The propagated
              // endpoint map is strongly curved, and without this the merit
              // accepts only creeping fractions of the Newton step once the
              // iterate sits near the constraint manifold.
              const VectorXd corr =
                  J.transpose() * (J * J.transpose()).ldlt().solve(-c_new);
              const VectorXd z_soc = clamp(z_new + corr, lb, ub);
              VectorXd g_soc(n), c_soc(m);
              MatrixXd J_soc(m, n);
              const double f_soc = p.objective(z_soc, g_soc);
              p.constraints(z_soc, c_soc, J_soc);
              const double phi_soc = f_soc + penalty * c_soc.cwiseAbs().sum();
              if (opts.log)
                (*opts.log) << "  soc phi0=" << phi0 << " phi=" << phi
                            << " phi_soc=" << phi_soc << " dd=" << dd
                            << " pen=" << penalty << " dz0=" << dz[0]
                            << " dzinf=" << dz.cwiseAbs().maxCoeff() << '\n';
              if (std::isfinite(phi_soc) &&
                  phi_soc <= phi0 + 1e-4 * std::min(dd, 0.0)) {
                z_new = z_soc;
                f_new = f_soc;
                g_new = g_soc;
                c_new = c_soc;
                J_new = J_soc;
                accepted = true;
              } else {
                alpha *= 0.5;
              }
            } else {
              alpha *= 0.5;
            }
          }
        }

        if (!accepted) {
          if (nu >= nu_cap) break;
          nu = (nu == 0.0) ? opts.levenberg0 * h_unit : nu * 10.0;
          nu = std::min(nu, nu_cap);
        } else {
          nu_kkt = alpha >= 0.5 ? nu / 3.0 : nu * 4.0;
          if (nu_kkt < opts.levenberg0 * h_unit) nu_kkt = 0.0;
          nu_kkt = std::min(nu_kkt, nu_cap);
        }
      }
    }
    if (!accepted) {
      res.status = SolveStatus::FAILED;
      break;
    }

    const double moved = (z_new - z).cwiseAbs().maxCoeff();
    z = z_new;
    f = f_new;
    g = g_new;
    c = c_new;
    J = J_new;
    y += alpha * dy;
    // The least-squares stationarity fit is the best multiplier estimate at
    // the new iterate; keeping line-search fractions of dy instead poisons
    // the next Hessian and the reported stationarity.
    if (m > 0) y = J.transpose().colPivHouseholderQr().solve(-g);

    // Repeated microscopic accepted steps while infeasible: the iteration
    // has wedged; report failure instead of burning the budget.
    if (moved <= 1e-14 * std::max(1.0, z.cwiseAbs().maxCoeff()) &&
        c.cwiseAbs().maxCoeff() > opts.tol_feas) {
      if (++stalls >= 3) {
        res.status = SolveStatus::FAILED;
        break;
      }
    } else {
      stalls = 0;
    }
  }

  if (res.status == SolveStatus::FAILED && res.iters + 1 >= opts.max_iter)
    res.status = SolveStatus::MAX_ITER;
  if (res.status != SolveStatus::OK && res.status != SolveStatus::FAILED)
    res.status = SolveStatus::MAX_ITER;

  res.z = z;
  res.y = y;
  res.objective = f;
  res.feasibility = m > 0 ? c.cwiseAbs().maxCoeff() : 0.0;
  res.stationarity = m > 0 ? (g + J.transpose() * y).cwiseAbs().maxCoeff()
                           : g.cwiseAbs().maxCoeff();
  return res;
}

}  // namespace spiralis
