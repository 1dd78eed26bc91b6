#include "spiralis/arc_param.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace spiralis {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Feasibility subproblem with the bound frozen at a ladder rung. Hunting
/// with b free lets the solver dive toward small bounds that cheaply shrink
/// the curvature rows while leaving the position rows unmet; freezing b
/// restores the arc lengths (and entry curvature) onto the constraint
/// manifold at the rung, after which the full program slides the bound to
/// its critical value.
class FrozenBoundFeasibility : public DenseNlp {
 public:
  FrozenBoundFeasibility(const PaProblem& full, double b) : full_(full), b_(b) {}

  int num_vars() const override { return full_.num_vars() - 1; }
  int num_eq() const override { return full_.num_eq(); }

  double objective(const Eigen::VectorXd&, Eigen::VectorXd& grad) const override {
    grad = Eigen::VectorXd::Zero(num_vars());
    return 0.0;
  }
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                   Eigen::MatrixXd& J) const override {
    Eigen::VectorXd zf(full_.num_vars());
    zf << b_, z;
    Eigen::MatrixXd Jf;
    full_.constraints(zf, c, Jf);
    J = Jf.rightCols(num_vars());
  }
  void lagrangian_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                          Eigen::MatrixXd& H) const override {
    Eigen::VectorXd zf(full_.num_vars());
    zf << b_, z;
    Eigen::MatrixXd Hf;
    full_.lagrangian_hessian(zf, y, Hf);
    H = Hf.bottomRightCorner(num_vars(), num_vars());
  }
  void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const override {
    Eigen::VectorXd lbf, ubf;
    full_.bounds(lbf, ubf);
    lb = lbf.tail(num_vars());
    ub = ubf.tail(num_vars());
  }

 private:
  const PaProblem& full_;
  double b_;
};

/// Minimizes the bound over the feasible manifold by a trust-region Newton
/// iteration in the tangent space, re-restoring feasibility (at the stepped
/// bound, which the restore keeps frozen) after every tangential move. The
/// full-space KKT iteration is useless in the approach zone: at a minimum
/// of the bound the reduced Jacobian folds, so its quadratic model emits
/// wildly long steps from any distance. The intrinsic problem is benign --
/// the reduced Hessian stays well conditioned -- and every restore is a
/// small, well-damped Gauss-Newton solve.
std::optional<SqpResult> hunt_branch(const PaProblem& hunt, double b0,
                                     const Eigen::VectorXd& z0,
                                     const SqpOptions& hunt_opts) {
  const int n = hunt.num_vars();
  const int m = hunt.num_eq();
  FrozenBoundFeasibility frozen0(hunt, b0);
  SqpResult fr = solve_sqp(frozen0, z0.tail(n - 1), hunt_opts);
  if (fr.status != SolveStatus::OK) return std::nullopt;

  Eigen::VectorXd z(n);
  z << b0, fr.z;
  Eigen::VectorXd lb, ub;
  hunt.bounds(lb, ub);
  Eigen::VectorXd c(m), g(n);
  Eigen::MatrixXd J(m, n), H(n, n);
  double radius = 0.05 * std::max(1.0, b0);
  for (int iter = 0; iter < 80; ++iter) {
    hunt.objective(z, g);
    hunt.constraints(z, c, J);
    const Eigen::VectorXd y = J.transpose().colPivHouseholderQr().solve(-g);
    const double stat = (g + J.transpose() * y).cwiseAbs().maxCoeff();
    if (hunt_opts.log) {
      (*hunt_opts.log) << "tr iter=" << iter << " b=" << z[0]
                       << " stat=" << stat << " radius=" << radius << " z=";
      for (int i = 1; i < n; ++i) (*hunt_opts.log) << z[i] << ' ';
      (*hunt_opts.log) << '\n';
    }
    if (stat <= 1e-7) break;  // hand the endgame to the full KKT polish

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
    const Eigen::MatrixXd Z = svd.matrixV().rightCols(n - m);
    const Eigen::VectorXd gr = Z.transpose() * g;
    hunt.lagrangian_hessian(z, y, H);
    const Eigen::MatrixXd Hr = Z.transpose() * H * Z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Hr);
    const Eigen::VectorXd q = eig.eigenvectors().transpose() * gr;

    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      // Exact trust-region step in the (at most 3-dimensional) eigenbasis:
      // damp until the model is convex and the step fits the radius.
      double tau = std::max(0.0, -1.1 * eig.eigenvalues().minCoeff());
      Eigen::VectorXd p;
      for (;;) {
        p = -(q.array() / (eig.eigenvalues().array() + tau)).matrix();
        if (p.norm() <= radius || tau > 1e16) break;
        tau = std::max(2.0 * tau, 1e-8 * std::max(1.0, Hr.diagonal().maxCoeff()));
      }
      const Eigen::VectorXd dz = Z * (eig.eigenvectors() * p);
      const Eigen::VectorXd z_try = (z + dz).cwiseMax(lb).cwiseMin(ub);

      FrozenBoundFeasibility fz(hunt, z_try[0]);
      SqpOptions ro = hunt_opts;
      ro.max_iter = 50;
      SqpResult rr = solve_sqp(fz, z_try.tail(n - 1), ro);
      // The retraction must both succeed and stay subordinate to the step;
      // a large correction means the tangent flew off the curved manifold
      // (or past the fold, where the slice is empty and the restore fails).
      const double pulled =
          rr.status == SolveStatus::OK
              ? (rr.z - z_try.tail(n - 1)).cwiseAbs().maxCoeff()
              : kInf;
      if (hunt_opts.log)
        (*hunt_opts.log) << "  tr attempt=" << attempt
                         << " lam_min=" << eig.eigenvalues().minCoeff()
                         << " |p|=" << p.norm()
                         << " |dz|=" << dz.cwiseAbs().maxCoeff()
                         << " pulled=" << pulled
                         << " rs=" << static_cast<int>(rr.status) << '\n';
      if (pulled <= 0.5 * dz.cwiseAbs().maxCoeff() + 1e-12) {
        z[0] = z_try[0];
        z.tail(n - 1) = rr.z;
        radius = std::max(radius, 2.5 * p.norm());
        accepted = true;
      } else {
        radius = std::min(radius, p.norm()) / 3.0;
        if (radius < 1e-14 * std::max(1.0, b0)) break;
      }
    }
    if (!accepted) break;
  }

  SqpResult r = solve_sqp(hunt, z, hunt_opts);
  if (r.status != SolveStatus::OK) return std::nullopt;
  return r;
}

}  // namespace

struct PaProblem::Row {
  enum Kind { TERM_X, TERM_Y, TERM_TH, TERM_KA, SUM_XI, ENTRY_KAPPA } kind;
  int arc = 0;
  double target = 0.0;
};

PaProblem::~PaProblem() = default;

PaProblem::PaProblem(const ProblemSpec& spec, const std::vector<ArcKind>& kinds,
                     int total_steps)
    : spec_(spec), kinds_(kinds) {
  auto issues = validate(spec);
  if (!issues.empty()) {
    std::ostringstream os;
    os << "arc refinement: invalid problem:";
    for (const auto& s : issues) os << ' ' << s << ';';
    throw std::invalid_argument(os.str());
  }
  const int na = static_cast<int>(kinds.size());
  if (na < 1) throw std::invalid_argument("arc refinement: empty structure");
  for (int k = 0; k + 1 < na; ++k)
    if (kinds[k] == kinds[k + 1])
      throw std::invalid_argument("arc refinement: adjacent identical arcs");

  const bool bounded = spec.bounded();
  const double a = bounded ? *spec.curvature_bound : 0.0;
  for (auto k : kinds) {
    if ((k == ArcKind::BOUNDARY_PLUS || k == ArcKind::BOUNDARY_MINUS) && !bounded)
      throw std::invalid_argument("arc refinement: boundary arc without a curvature bound");
  }

  // Entry curvature: an explicit datum, a structural consequence, or an
  // unknown (free start on a bang arc).
  const ArcKind first = kinds.front();
  const double tol = 1e-9 * std::max(1.0, bounded ? a : 1.0);
  if (spec.kappa0) {
    fixed_kappa0_ = *spec.kappa0;
    if (first == ArcKind::BOUNDARY_PLUS && std::abs(fixed_kappa0_ - a) > tol)
      throw std::invalid_argument("arc refinement: start curvature off the +bound arc");
    if (first == ArcKind::BOUNDARY_MINUS && std::abs(fixed_kappa0_ + a) > tol)
      throw std::invalid_argument("arc refinement: start curvature off the -bound arc");
  } else if (first == ArcKind::BOUNDARY_PLUS) {
    fixed_kappa0_ = a;
  } else if (first == ArcKind::BOUNDARY_MINUS) {
    fixed_kappa0_ = -a;
  } else if (first == ArcKind::SINGULAR_LINE) {
    fixed_kappa0_ = 0.0;
  } else {
    kappa0_unknown_ = true;
  }

  rows_.push_back({Row::TERM_X, 0, spec.xf});
  rows_.push_back({Row::TERM_Y, 0, spec.yf});
  rows_.push_back({Row::TERM_TH, 0, spec.thetaf});
  const ArcKind last = kinds.back();
  const bool last_boundary =
      (last == ArcKind::BOUNDARY_PLUS || last == ArcKind::BOUNDARY_MINUS);
  if (spec.kappaf) {
    if (last_boundary) {
      // The bound arc already carries the curvature to +-a; a terminal row
      // would be redundant, but the datum must agree.
      const double forced = last == ArcKind::BOUNDARY_PLUS ? a : -a;
      if (std::abs(*spec.kappaf - forced) > tol)
        throw std::invalid_argument("arc refinement: end curvature off the bound arc");
    } else {
      rows_.push_back({Row::TERM_KA, 0, *spec.kappaf});
    }
  }
  rows_.push_back({Row::SUM_XI, 0, spec.total_length});
  for (int k = 1; k < na; ++k) {
    if (kinds[k] == ArcKind::BOUNDARY_PLUS)
      rows_.push_back({Row::ENTRY_KAPPA, k, a});
    else if (kinds[k] == ArcKind::BOUNDARY_MINUS)
      rows_.push_back({Row::ENTRY_KAPPA, k, -a});
  }

  if (num_eq() > num_vars()) {
    std::ostringstream os;
    os << "arc refinement: structure mismatch, " << num_eq() << " equalities for "
       << num_vars() << " unknowns";
    throw std::invalid_argument(os.str());
  }

  steps_per_arc_ = std::max(1, (total_steps + na / 2) / na);
  xi_min_ = 1e-6 * spec.total_length;
}

int PaProblem::num_vars() const {
  return 1 + static_cast<int>(kinds_.size()) + (kappa0_unknown_ ? 1 : 0);
}

int PaProblem::num_eq() const { return static_cast<int>(rows_.size()); }

Eigen::VectorXd PaProblem::pack(double b, const std::vector<double>& xi,
                                std::optional<double> kappa0) const {
  if (static_cast<int>(xi.size()) != static_cast<int>(kinds_.size()))
    throw std::invalid_argument("pack: arc length count mismatch");
  Eigen::VectorXd z(num_vars());
  z[0] = b;
  for (std::size_t k = 0; k < xi.size(); ++k) z[1 + k] = xi[k];
  if (kappa0_unknown_) z[num_vars() - 1] = kappa0.value_or(0.0);
  return z;
}

double PaProblem::objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const {
  grad.setZero(num_vars());
  grad[0] = 1.0;
  return z[0];
}

void PaProblem::bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const {
  lb = Eigen::VectorXd::Constant(num_vars(), -kInf);
  ub = Eigen::VectorXd::Constant(num_vars(), kInf);
  lb[0] = 0.0;
  for (std::size_t k = 0; k < kinds_.size(); ++k) lb[1 + k] = xi_min_;
  if (kappa0_unknown_ && spec_.bounded()) {
    lb[num_vars() - 1] = -*spec_.curvature_bound;
    ub[num_vars() - 1] = *spec_.curvature_bound;
  }
}

void PaProblem::propagate(const Eigen::VectorXd& z, bool second, Eigen::VectorXd& c,
                          Eigen::MatrixXd& J, std::vector<Eigen::MatrixXd>* H_rows) const {
  const int na = static_cast<int>(kinds_.size());
  const int P = num_vars();
  const double b = z[0];
  const double kappa0 = kappa0_unknown_ ? z[P - 1] : fixed_kappa0_;

  Gl6Jets jets(P, second);
  State y{spec_.x0, spec_.y0, spec_.theta0, kappa0};
  auto S = jets.make_S();
  auto T = jets.make_T();
  if (kappa0_unknown_) S(3, P - 1) = 1.0;

  // Entry-curvature snapshots feed the bound-arc rows.
  std::vector<double> entry_kappa(na);
  std::vector<Eigen::RowVectorXd> entry_dkappa(na);
  std::vector<Eigen::MatrixXd> entry_d2kappa;
  if (second) entry_d2kappa.resize(na);

  IntegratorConfig cfg;
  Eigen::VectorXd du = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd dh = Eigen::VectorXd::Zero(P);
  for (int k = 0; k < na; ++k) {
    entry_kappa[k] = y.kappa;
    entry_dkappa[k] = S.row(3);
    if (second) {
      Eigen::MatrixXd E(P, P);
      for (int q = 0; q < P; ++q) E.row(q) = T[q].row(3);
      entry_d2kappa[k] = E;
    }
    const int sgn = control_sign(kinds_[k]);
    const double u = sgn * b;
    const double h = z[1 + k] / steps_per_arc_;
    du.setZero();
    du[0] = sgn;
    dh.setZero();
    dh[1 + k] = 1.0 / steps_per_arc_;
    for (int i = 0; i < steps_per_arc_; ++i) jets.step(y, S, T, u, du, h, dh, cfg);
  }

  const int m = num_eq();
  c.resize(m);
  J.resize(m, P);
  if (second) {
    H_rows->assign(m, Eigen::MatrixXd::Zero(P, P));
  }
  auto fill_terminal = [&](int row, int comp, double target, double value) {
    c[row] = value - target;
    J.row(row) = S.row(comp);
    if (second) {
      auto& H = (*H_rows)[row];
      for (int q = 0; q < P; ++q) H.row(q) = T[q].row(comp);
    }
  };
  for (int r = 0; r < m; ++r) {
    const Row& row = rows_[r];
    switch (row.kind) {
      case Row::TERM_X: fill_terminal(r, 0, row.target, y.x); break;
      case Row::TERM_Y: fill_terminal(r, 1, row.target, y.y); break;
      case Row::TERM_TH: fill_terminal(r, 2, row.target, y.theta); break;
      case Row::TERM_KA: fill_terminal(r, 3, row.target, y.kappa); break;
      case Row::SUM_XI: {
        double sum = 0.0;
        for (int k = 0; k < na; ++k) sum += z[1 + k];
        c[r] = sum - row.target;
        J.row(r).setZero();
        for (int k = 0; k < na; ++k) J(r, 1 + k) = 1.0;
        break;
      }
      case Row::ENTRY_KAPPA: {
        c[r] = entry_kappa[row.arc] - row.target;
        J.row(r) = entry_dkappa[row.arc];
        if (second) (*H_rows)[r] = entry_d2kappa[row.arc];
        break;
      }
    }
  }
}

void PaProblem::constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                            Eigen::MatrixXd& J) const {
  propagate(z, false, c, J, nullptr);
}

void PaProblem::lagrangian_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                                   Eigen::MatrixXd& H) const {
  Eigen::VectorXd c;
  Eigen::MatrixXd J;
  std::vector<Eigen::MatrixXd> H_rows;
  propagate(z, true, c, J, &H_rows);
  H = Eigen::MatrixXd::Zero(num_vars(), num_vars());
  for (int r = 0; r < num_eq(); ++r) H += y[r] * H_rows[r];  // objective is linear
}

std::vector<double> switching_times(const std::vector<double>& xi) {
  std::vector<double> t;
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < xi.size(); ++k) {
    acc += xi[k];
    t.push_back(acc);
  }
  return t;
}

void resample_solution(const ProblemSpec& spec, RefinedSolution& sol, int steps_per_arc) {
  const State s0{spec.x0, spec.y0, spec.theta0, sol.kappa0};
  IntegratorConfig cfg;
  sol.traj = simulate(s0, sol.kinds, sol.xi, sol.b, cfg, steps_per_arc);
  sol.arc_node_begin.clear();
  for (std::size_t k = 0; k < sol.kinds.size(); ++k)
    sol.arc_node_begin.push_back(static_cast<int>(k) * steps_per_arc);
  sol.kappaf = sol.traj.s.back().kappa;
  sol.t_switch = switching_times(sol.xi);
}

RefinedSolution solve_pa(const ProblemSpec& spec, const std::vector<ArcKind>& kinds,
                         const std::vector<double>& xi_guess,
                         std::optional<double> b_guess, const RefineOptions& opts) {
  PaProblem prob(spec, kinds, opts.total_steps);
  const int na = static_cast<int>(kinds.size());

  std::vector<double> xi0;
  if (static_cast<int>(xi_guess.size()) == na) {
    xi0 = xi_guess;
    double sum = 0.0;
    for (auto& x : xi0) {
      x = std::max(x, 2.0 * prob.xi_min());
      sum += x;
    }
    for (auto& x : xi0) x *= spec.total_length / sum;
  } else {
    xi0.assign(na, spec.total_length / na);
  }

  std::vector<double> ladder;
  if (b_guess) {
    ladder = {*b_guess};
  } else {
    ladder = opts.b_ladder;
  }

  // Each rung is tried from the supplied split plus, when the caller gave
  // none, a fixed fan of randomized splits: the Newton basins of the arc
  // program are narrow and the equal split alone misses them regularly.
  std::vector<std::vector<double>> seeds{xi0};
  if (static_cast<int>(xi_guess.size()) != na) {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int s = 0; s < 6; ++s) {
      std::vector<double> xs(na);
      double sum = 0.0;
      for (auto& x : xs) {
        x = unif(rng);
        sum += x;
      }
      for (auto& x : xs) x *= spec.total_length / sum;
      seeds.push_back(xs);
    }
  }

  struct Candidate {
    SqpResult r;
    bool collapsed = false;
  };
  std::optional<Candidate> best;
  std::optional<SqpResult> fallback;

  // Hunt on a coarse grid (the sixth-order steps keep even 10 steps per arc
  // well inside the polish basin), then re-solve the winner at full
  // resolution from its own iterate.
  PaProblem hunt(spec, kinds, 10 * na);
  SqpOptions hunt_opts = opts.sqp;
  hunt_opts.max_iter = std::min(hunt_opts.max_iter, 120);
  const bool can_freeze = hunt.num_eq() < hunt.num_vars();
  for (double bg : ladder) {
    const double b0 = std::max(bg, 1e-3);
    for (const auto& seed : seeds) {
      const Eigen::VectorXd z0 = hunt.pack(b0, seed, 0.0);
      SqpResult r;
      bool solved = false;
      if (can_freeze) {
        auto branch = hunt_branch(hunt, b0, z0, hunt_opts);
        if (branch) {
          r = *branch;
          solved = true;
        }
      }
      if (!solved) r = solve_sqp(hunt, z0, hunt_opts);
      if (!fallback || r.feasibility < fallback->feasibility) fallback = r;
      if (r.status != SolveStatus::OK) continue;
      Candidate cand{r, false};
      for (int k = 0; k < na; ++k)
        if (r.z[1 + k] <= 2.0 * hunt.xi_min()) cand.collapsed = true;
      const bool better =
          !best || (best->collapsed && !cand.collapsed) ||
          (best->collapsed == cand.collapsed && r.z[0] < best->r.z[0] * (1.0 - 1e-12));
      if (better) best = cand;
    }
  }
  if (best) {
    // Near the root Newton contracts quadratically, so asking the polish for
    // more than the user's tolerance is nearly free and keeps identities such
    // as the arc-fraction sum exact to roundoff; if double precision cannot
    // deliver it for a particular spec, fall back to the requested tolerance.
    SqpOptions polish_opts = opts.sqp;
    polish_opts.tol_feas = std::min(polish_opts.tol_feas, 1e-12);
    SqpResult polished = solve_sqp(prob, best->r.z, polish_opts);
    if (polished.status != SolveStatus::OK)
      polished = solve_sqp(prob, best->r.z, opts.sqp);
    if (polished.status == SolveStatus::OK) {
      best->r = polished;
      best->collapsed = false;
      for (int k = 0; k < na; ++k)
        if (polished.z[1 + k] <= 2.0 * prob.xi_min()) best->collapsed = true;
    } else {
      best.reset();  // coarse root did not survive refinement
      if (!fallback || polished.feasibility < fallback->feasibility)
        fallback = polished;
    }
  }

  RefinedSolution sol;
  sol.kinds = kinds;
  const SqpResult& r = best ? best->r : *fallback;
  sol.b = r.z[0];
  sol.xi.assign(na, 0.0);
  for (int k = 0; k < na; ++k) sol.xi[k] = r.z[1 + k];
  sol.kappa0 = prob.kappa0_is_unknown() ? r.z[prob.num_vars() - 1] : prob.fixed_kappa0();
  sol.feasibility = r.feasibility;
  sol.stationarity = r.stationarity;
  sol.status = best ? SolveStatus::OK : r.status;
  if (best && best->collapsed) {
    for (int k = 0; k < na; ++k) {
      if (r.z[1 + k] <= 2.0 * prob.xi_min()) {
        std::ostringstream os;
        os << "degenerate-arc: xi_" << k + 1
           << " collapsed to its lower bound; re-extract the structure without it";
        sol.warnings.push_back(os.str());
      }
    }
  }
  const int sample_steps =
      opts.sample_steps_per_arc > 0 ? opts.sample_steps_per_arc : prob.steps_per_arc();
  resample_solution(spec, sol, sample_steps);
  return sol;
}

}  // namespace spiralis
