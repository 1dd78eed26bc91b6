#include "spiralis/integrate.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace spiralis {

namespace {

// 3-stage Gauss-Legendre collocation tableau (order 6).
const double kS15 = std::sqrt(15.0);
const double kC[3] = {0.5 - kS15 / 10.0, 0.5, 0.5 + kS15 / 10.0};
const double kA[3][3] = {
    {5.0 / 36.0, 2.0 / 9.0 - kS15 / 15.0, 5.0 / 36.0 - kS15 / 30.0},
    {5.0 / 36.0 + kS15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - kS15 / 24.0},
    {5.0 / 36.0 + kS15 / 30.0, 2.0 / 9.0 + kS15 / 15.0, 5.0 / 36.0},
};
const double kW[3] = {5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0};

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec12 = Eigen::Matrix<double, 12, 1>;

Vec4 rhs(const Vec4& s, double u) {
  return {std::cos(s[2]), std::sin(s[2]), s[3], u};
}

// d f / d state; only three entries are nonzero.
Mat4 rhs_jac(const Vec4& s) {
  Mat4 J = Mat4::Zero();
  J(0, 2) = -std::sin(s[2]);
  J(1, 2) = std::cos(s[2]);
  J(2, 3) = 1.0;
  return J;
}

Vec4 to_vec(const State& s) { return {s.x, s.y, s.theta, s.kappa}; }
State to_state(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

struct StageSolve {
  Vec4 Y[3];
  Eigen::PartialPivLU<Mat12> lu;  // factorization of the converged system
};

// Solves the implicit stage equations Y_i = y + h sum_j a_ij f(Y_j, u) by
// Newton iteration; fixed-point sweeps take over if a Newton update ever
// goes non-finite. The curvature/heading components are polynomial in time,
// so convergence is fast for any reasonable h.
StageSolve solve_stages(const Vec4& y, double u, double h, const IntegratorConfig& cfg) {
  StageSolve st;
  for (int i = 0; i < 3; ++i) st.Y[i] = y + kC[i] * h * rhs(y, u);

  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  auto residual = [&](Vec12& R) {
    double rmax = 0.0;
    for (int i = 0; i < 3; ++i) {
      Vec4 acc = st.Y[i] - y;
      for (int j = 0; j < 3; ++j) acc -= h * kA[i][j] * rhs(st.Y[j], u);
      R.segment<4>(4 * i) = acc;
      rmax = std::max(rmax, acc.cwiseAbs().maxCoeff());
    }
    return rmax;
  };

  Vec12 R;
  double rmax = residual(R);
  for (int it = 0; it < cfg.stage_max_iter && rmax > cfg.stage_tol * scale; ++it) {
    Mat12 M = Mat12::Identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        M.block<4, 4>(4 * i, 4 * j) -= h * kA[i][j] * rhs_jac(st.Y[j]);
    st.lu.compute(M);
    Vec12 delta = st.lu.solve(-R);
    if (delta.allFinite()) {
      for (int i = 0; i < 3; ++i) st.Y[i] += delta.segment<4>(4 * i);
    } else {
      // Fixed-point sweep as a fallback for a defective Jacobian.
      for (int i = 0; i < 3; ++i) {
        Vec4 acc = y;
        for (int j = 0; j < 3; ++j) acc += h * kA[i][j] * rhs(st.Y[j], u);
        st.Y[i] = acc;
      }
    }
    rmax = residual(R);
  }
  if (rmax > cfg.stage_tol * scale * 10.0) {
    std::ostringstream os;
    os << "gl6: implicit stages did not converge (residual " << rmax
       << ", h = " << h << ")";
    throw std::runtime_error(os.str());
  }
  // Refresh the factorization at the converged stages; the sensitivity
  // propagation reuses it.
  Mat12 M = Mat12::Identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      M.block<4, 4>(4 * i, 4 * j) -= h * kA[i][j] * rhs_jac(st.Y[j]);
  st.lu.compute(M);
  return st;
}

}  // namespace

State euler_step(const State& s, double u, double h) {
  const State d = dynamics_rhs(s, u);
  return {s.x + h * d.x, s.y + h * d.y, s.theta + h * d.theta, s.kappa + h * d.kappa};
}

State gl6_step(const State& s, double u, double h, const IntegratorConfig& cfg) {
  const Vec4 y = to_vec(s);
  StageSolve st = solve_stages(y, u, h, cfg);
  Vec4 out = y;
  for (int i = 0; i < 3; ++i) out += h * kW[i] * rhs(st.Y[i], u);
  return to_state(out);
}

State gl6_arc(const State& s, double u, double xi, const IntegratorConfig& cfg) {
  const int n = std::max(1, cfg.steps);
  const double h = xi / n;
  State cur = s;
  for (int i = 0; i < n; ++i) cur = gl6_step(cur, u, h, cfg);
  return cur;
}

Trajectory simulate(const State& s0, const std::vector<ArcKind>& kinds,
                    const std::vector<double>& xi, double b,
                    const IntegratorConfig& cfg, int steps_per_arc) {
  if (kinds.size() != xi.size())
    throw std::invalid_argument("simulate: structure/length size mismatch");
  const int na = static_cast<int>(kinds.size());
  const int per_arc =
      steps_per_arc > 0 ? steps_per_arc : std::max(1, (cfg.steps + na - 1) / std::max(1, na));

  Trajectory traj;
  traj.b = b;
  traj.t.push_back(0.0);
  traj.s.push_back(s0);
  double t0 = 0.0;
  State cur = s0;
  for (int k = 0; k < na; ++k) {
    const double u = control_value(kinds[k], b);
    const double h = xi[k] / per_arc;
    for (int i = 0; i < per_arc; ++i) {
      cur = cfg.scheme == Scheme::EULER ? euler_step(cur, u, h) : gl6_step(cur, u, h, cfg);
      traj.t.push_back(t0 + (i + 1) * h);
      traj.s.push_back(cur);
      traj.u.push_back(u);
    }
    t0 += xi[k];
  }
  // The loop stored one control per interval, which is exactly the
  // left-node keying; the final node repeats the last interval's value.
  traj.u.push_back(traj.u.empty() ? 0.0 : traj.u.back());
  return traj;
}

Gl6Jets::Gl6Jets(int num_params, bool second_order)
    : P_(num_params), second_(second_order) {
  if (num_params < 0) throw std::invalid_argument("Gl6Jets: negative parameter count");
}

Eigen::Matrix<double, 4, Eigen::Dynamic> Gl6Jets::make_S() const {
  return Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, P_);
}

std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>> Gl6Jets::make_T() const {
  if (!second_) return {};
  return std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>>(
      P_, Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, P_));
}

void Gl6Jets::step(State& ys, Eigen::Matrix<double, 4, Eigen::Dynamic>& S,
                   std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>>& T, double u,
                   const Eigen::VectorXd& du, double h, const Eigen::VectorXd& dh,
                   const IntegratorConfig& cfg) const {
  const Vec4 y = to_vec(ys);
  StageSolve st = solve_stages(y, u, h, cfg);

  Vec4 F[3];
  Mat4 Fs[3];
  for (int i = 0; i < 3; ++i) {
    F[i] = rhs(st.Y[i], u);
    Fs[i] = rhs_jac(st.Y[i]);
  }
  Vec4 AF[3];        // sum_j a_ij f(Y_j)
  double arow[3];    // sum_j a_ij
  for (int i = 0; i < 3; ++i) {
    AF[i].setZero();
    arow[i] = 0.0;
    for (int j = 0; j < 3; ++j) {
      AF[i] += kA[i][j] * F[j];
      arow[i] += kA[i][j];
    }
  }
  Vec4 WF = Vec4::Zero();  // sum_i w_i f(Y_i)
  for (int i = 0; i < 3; ++i) WF += kW[i] * F[i];

  // First order: differentiate the stage equations with respect to each
  // parameter; all P right-hand sides share the converged factorization.
  Eigen::MatrixXd RHS(12, P_);
  for (int q = 0; q < P_; ++q) {
    for (int i = 0; i < 3; ++i) {
      RHS.block<4, 1>(4 * i, q) =
          S.col(q) + dh[q] * AF[i] + (h * arow[i] * du[q]) * Vec4::Unit(3);
    }
  }
  Eigen::MatrixXd dY = st.lu.solve(RHS);

  // Stage direction images G_i(:,q) = f_s(Y_i) dY_i(:,q) + f_u du_q, shared
  // by the update formula and the second-order right-hand sides.
  std::vector<Eigen::MatrixXd> G(3, Eigen::MatrixXd(4, P_));
  for (int i = 0; i < 3; ++i) {
    G[i] = Fs[i] * dY.middleRows<4>(4 * i);
    G[i].row(3) += du.transpose();
  }

  Eigen::MatrixXd S_next(4, P_);
  for (int q = 0; q < P_; ++q) {
    Vec4 acc = S.col(q) + dh[q] * WF;
    for (int i = 0; i < 3; ++i) acc += h * kW[i] * G[i].col(q);
    S_next.col(q) = acc;
  }

  if (second_) {
    // d f_ss[v, w] only touches the heading component:
    //   (-cos th * v_th * w_th, -sin th * v_th * w_th, 0, 0).
    const int npairs = P_ * (P_ + 1) / 2;
    Eigen::MatrixXd RHS2(12, npairs);
    int col = 0;
    for (int q = 0; q < P_; ++q) {
      for (int r = q; r < P_; ++r, ++col) {
        for (int i = 0; i < 3; ++i) {
          Vec4 acc = T[q].col(r);
          for (int j = 0; j < 3; ++j) {
            acc += dh[q] * kA[i][j] * G[j].col(r) + dh[r] * kA[i][j] * G[j].col(q);
            const double vth = dY(4 * j + 2, q) * dY(4 * j + 2, r);
            acc[0] += h * kA[i][j] * (-std::cos(st.Y[j][2])) * vth;
            acc[1] += h * kA[i][j] * (-std::sin(st.Y[j][2])) * vth;
          }
          RHS2.block<4, 1>(4 * i, col) = acc;
        }
      }
    }
    Eigen::MatrixXd d2Y = st.lu.solve(RHS2);

    col = 0;
    for (int q = 0; q < P_; ++q) {
      for (int r = q; r < P_; ++r, ++col) {
        Vec4 acc = T[q].col(r);
        for (int i = 0; i < 3; ++i) {
          acc += dh[q] * kW[i] * G[i].col(r) + dh[r] * kW[i] * G[i].col(q);
          const double vth = dY(4 * i + 2, q) * dY(4 * i + 2, r);
          acc[0] += h * kW[i] * (-std::cos(st.Y[i][2])) * vth;
          acc[1] += h * kW[i] * (-std::sin(st.Y[i][2])) * vth;
          acc += h * kW[i] * (Fs[i] * d2Y.block<4, 1>(4 * i, col));
        }
        T[q].col(r) = acc;
        if (r != q) T[r].col(q) = acc;
      }
    }
  }

  S = S_next;
  Vec4 out = y;
  for (int i = 0; i < 3; ++i) out += h * kW[i] * F[i];
  ys = to_state(out);
}

Eigen::VectorXd gl6_linear_step(const Eigen::VectorXd& y, double t, double h,
                                const std::function<Eigen::MatrixXd(double)>& M,
                                const std::function<Eigen::VectorXd(double)>& g) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd Mi[3];
  Eigen::VectorXd gi[3];
  for (int i = 0; i < 3; ++i) {
    Mi[i] = M(t + kC[i] * h);
    gi[i] = g(t + kC[i] * h);
  }
  // Stage system (I - h a_ij M_j) Y = repeat(y) + h a_ij g_j; the ODE is
  // linear, so one factorization solves it exactly.
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(3 * n, 3 * n);
  Eigen::VectorXd rhsv(3 * n);
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd acc = y;
    for (int j = 0; j < 3; ++j) {
      K.block(n * i, n * j, n, n) -= h * kA[i][j] * Mi[j];
      acc += h * kA[i][j] * gi[j];
    }
    rhsv.segment(n * i, n) = acc;
  }
  Eigen::VectorXd Y = K.partialPivLu().solve(rhsv);
  Eigen::VectorXd out = y;
  for (int i = 0; i < 3; ++i)
    out += h * kW[i] * (Mi[i] * Y.segment(n * i, n) + gi[i]);
  return out;
}

}  // namespace spiralis
