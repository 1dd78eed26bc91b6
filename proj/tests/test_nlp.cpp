#include <doctest.h>

#include <cmath>
#include <limits>

#include "spiralis/nlp.hpp"

using namespace spiralis;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// min (z-1)^2 + z^2 ... generic helper base with unbounded box.
class Unconstrained : public AugLagProblem {
 public:
  int num_vars() const override { return 2; }
  int num_eq() const override { return 0; }
  int num_ineq() const override { return 0; }
  void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const override {
    lb = Eigen::VectorXd::Constant(2, -kInf);
    ub = Eigen::VectorXd::Constant(2, kInf);
  }
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override {
    grad.resize(2);
    grad[0] = 2 * (z[0] - 3);
    grad[1] = 8 * (z[1] + 2);
    return (z[0] - 3) * (z[0] - 3) + 4 * (z[1] + 2) * (z[1] + 2);
  }
  void constraints(const Eigen::VectorXd&, Eigen::VectorXd& ceq,
                   Eigen::VectorXd& cineq) const override {
    ceq.resize(0);
    cineq.resize(0);
  }
  void add_constraint_gradients(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&, Eigen::VectorXd&) const override {}
};

/// min z^2 s.t. z = 1; the unique multiplier is -2 (grad f + y grad c = 0).
class ScalarEquality : public AugLagProblem {
 public:
  int num_vars() const override { return 1; }
  int num_eq() const override { return 1; }
  int num_ineq() const override { return 0; }
  void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const override {
    lb = Eigen::VectorXd::Constant(1, -kInf);
    ub = Eigen::VectorXd::Constant(1, kInf);
  }
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override {
    grad.resize(1);
    grad[0] = 2 * z[0];
    return z[0] * z[0];
  }
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& ceq,
                   Eigen::VectorXd& cineq) const override {
    ceq.resize(1);
    ceq[0] = z[0] - 1.0;
    cineq.resize(0);
  }
  void add_constraint_gradients(const Eigen::VectorXd&, const Eigen::VectorXd& yeq,
                                const Eigen::VectorXd&, Eigen::VectorXd& out) const override {
    out[0] += yeq[0];
  }
};

/// min z1+z2 s.t. z1^2+z2^2 = 2 in [-2,2]^2; optimum (-1,-1), multiplier 1/2.
class CircleEquality : public AugLagProblem {
 public:
  int num_vars() const override { return 2; }
  int num_eq() const override { return 1; }
  int num_ineq() const override { return 0; }
  void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const override {
    lb = Eigen::VectorXd::Constant(2, -2.0);
    ub = Eigen::VectorXd::Constant(2, 2.0);
  }
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override {
    grad = Eigen::VectorXd::Ones(2);
    return z.sum();
  }
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& ceq,
                   Eigen::VectorXd& cineq) const override {
    ceq.resize(1);
    ceq[0] = z.squaredNorm() - 2.0;
    cineq.resize(0);
  }
  void add_constraint_gradients(const Eigen::VectorXd& z, const Eigen::VectorXd& yeq,
                                const Eigen::VectorXd&, Eigen::VectorXd& out) const override {
    out += yeq[0] * 2.0 * z;
  }
};

/// min (z1-2)^2+(z2-2)^2 s.t. z1+z2 <= limit; for limit=2 the optimum is
/// (1,1) with multiplier 2, for limit=10 the constraint is inactive.
class HalfPlane : public AugLagProblem {
 public:
  explicit HalfPlane(double limit) : limit_(limit) {}
  int num_vars() const override { return 2; }
  int num_eq() const override { return 0; }
  int num_ineq() const override { return 1; }
  void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const override {
    lb = Eigen::VectorXd::Constant(2, -kInf);
    ub = Eigen::VectorXd::Constant(2, kInf);
  }
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override {
    grad.resize(2);
    grad[0] = 2 * (z[0] - 2);
    grad[1] = 2 * (z[1] - 2);
    return (z[0] - 2) * (z[0] - 2) + (z[1] - 2) * (z[1] - 2);
  }
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& ceq,
                   Eigen::VectorXd& cineq) const override {
    ceq.resize(0);
    cineq.resize(1);
    cineq[0] = z[0] + z[1] - limit_;
  }
  void add_constraint_gradients(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd& yineq,
                                Eigen::VectorXd& out) const override {
    out[0] += yineq[0];
    out[1] += yineq[0];
  }

 private:
  double limit_;
};

/// min (z-5)^2 with z <= 3: the box bound is the active constraint.
class BoxOnly : public AugLagProblem {
 public:
  int num_vars() const override { return 1; }
  int num_eq() const override { return 0; }
  int num_ineq() const override { return 0; }
  void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const override {
    lb = Eigen::VectorXd::Constant(1, -kInf);
    ub = Eigen::VectorXd::Constant(1, 3.0);
  }
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override {
    grad.resize(1);
    grad[0] = 2 * (z[0] - 5);
    return (z[0] - 5) * (z[0] - 5);
  }
  void constraints(const Eigen::VectorXd&, Eigen::VectorXd& ceq,
                   Eigen::VectorXd& cineq) const override {
    ceq.resize(0);
    cineq.resize(0);
  }
  void add_constraint_gradients(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&, Eigen::VectorXd&) const override {}
};

/// Dense problem z^2 - 4 = 0 with as many equalities as unknowns; the
/// iteration degenerates to Newton root finding.
class SquareRoot : public DenseNlp {
 public:
  int num_vars() const override { return 1; }
  int num_eq() const override { return 1; }
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override {
    grad = Eigen::VectorXd::Zero(1);
    return z[0];
  }
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                   Eigen::MatrixXd& J) const override {
    c.resize(1);
    c[0] = z[0] * z[0] - 4.0;
    J.resize(1, 1);
    J(0, 0) = 2 * z[0];
  }
  void lagrangian_hessian(const Eigen::VectorXd&, const Eigen::VectorXd& y,
                          Eigen::MatrixXd& H) const override {
    H.resize(1, 1);
    H(0, 0) = 2.0 * y[0];
  }
};

/// min x^2+y^2 s.t. x+y=2 -> (1,1) with multiplier -2.
class ProjectPoint : public DenseNlp {
 public:
  int num_vars() const override { return 2; }
  int num_eq() const override { return 1; }
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override {
    grad = 2.0 * z;
    return z.squaredNorm();
  }
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                   Eigen::MatrixXd& J) const override {
    c.resize(1);
    c[0] = z[0] + z[1] - 2.0;
    J = Eigen::MatrixXd::Ones(1, 2);
  }
  void lagrangian_hessian(const Eigen::VectorXd&, const Eigen::VectorXd&,
                          Eigen::MatrixXd& H) const override {
    H = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  }
};

/// Nonconvex: min -x*y s.t. x^2 + 4*y^2 = 8 -> (+-2, +-1); tests the merit
/// line search away from the starting basin.
class EllipseSaddle : public DenseNlp {
 public:
  int num_vars() const override { return 2; }
  int num_eq() const override { return 1; }
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override {
    grad.resize(2);
    grad[0] = -z[1];
    grad[1] = -z[0];
    return -z[0] * z[1];
  }
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                   Eigen::MatrixXd& J) const override {
    c.resize(1);
    c[0] = z[0] * z[0] + 4 * z[1] * z[1] - 8.0;
    J.resize(1, 2);
    J(0, 0) = 2 * z[0];
    J(0, 1) = 8 * z[1];
  }
  void lagrangian_hessian(const Eigen::VectorXd&, const Eigen::VectorXd& y,
                          Eigen::MatrixXd& H) const override {
    H.resize(2, 2);
    H << 2 * y[0], -1.0, -1.0, 8 * y[0];
  }
};

}  // namespace

TEST_SUITE("nlp") {

TEST_CASE("bound-constrained minimizer handles an unconstrained quadratic") {
  Unconstrained p;
  AugLagResult r = solve_auglag(p, Eigen::VectorXd::Zero(2));
  REQUIRE(r.status == SolveStatus::OK);
  CHECK(r.z[0] == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(r.z[1] == doctest::Approx(-2.0).epsilon(1e-7));
  CHECK(r.stationarity <= 1e-6);
}

TEST_CASE("scalar equality reaches the hand-computed point and multiplier") {
  ScalarEquality p;
  AugLagResult r = solve_auglag(p, Eigen::VectorXd::Constant(1, 8.0));
  REQUIRE(r.status == SolveStatus::OK);
  CHECK(r.z[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.lambda_eq[0] == doctest::Approx(-2.0).epsilon(1e-5));
  CHECK(r.feasibility <= 1e-8);
}

TEST_CASE("circle-constrained linear objective lands on the tangent point") {
  CircleEquality p;
  Eigen::VectorXd z0(2);
  z0 << 0.5, -1.5;
  AugLagResult r = solve_auglag(p, z0);
  REQUIRE(r.status == SolveStatus::OK);
  CHECK(r.z[0] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(r.z[1] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(r.lambda_eq[0] == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("active inequality produces the right point and multiplier") {
  HalfPlane p(2.0);
  AugLagResult r = solve_auglag(p, Eigen::VectorXd::Zero(2));
  REQUIRE(r.status == SolveStatus::OK);
  CHECK(r.z[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.z[1] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.mu_ineq[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(r.complementarity <= 1e-5);
}

TEST_CASE("inactive inequality keeps a zero multiplier") {
  HalfPlane p(10.0);
  AugLagResult r = solve_auglag(p, Eigen::VectorXd::Zero(2));
  REQUIRE(r.status == SolveStatus::OK);
  CHECK(r.z[0] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(r.z[1] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(r.mu_ineq[0] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("box bounds clamp the iterates and the solution") {
  BoxOnly p;
  AugLagResult r = solve_auglag(p, Eigen::VectorXd::Zero(1));
  REQUIRE(r.status == SolveStatus::OK);
  CHECK(r.z[0] == doctest::Approx(3.0).epsilon(1e-10));
  // Projected stationarity at an active bound is zero even though the raw
  // gradient is not.
  CHECK(r.stationarity <= 1e-6);
}

TEST_CASE("iteration budget exhaustion is reported, not hidden") {
  CircleEquality p;
  AugLagOptions opts;
  opts.max_outer = 1;
  opts.max_inner = 2;
  AugLagResult r = solve_auglag(p, Eigen::VectorXd::Constant(2, 1.7), opts);
  CHECK(r.status != SolveStatus::OK);
}

TEST_CASE("dense Newton solves a square constraint system quadratically") {
  SquareRoot p;
  SqpResult r = solve_sqp(p, Eigen::VectorXd::Constant(1, 3.0));
  REQUIRE(r.status == SolveStatus::OK);
  CHECK(r.z[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.feasibility <= 1e-12);
  CHECK(r.iters <= 8);  // Newton from 3: a handful of quadratic steps
}

TEST_CASE("dense KKT iteration projects a point onto a line") {
  ProjectPoint p;
  Eigen::VectorXd z0(2);
  z0 << 5.0, -3.0;
  SqpResult r = solve_sqp(p, z0);
  REQUIRE(r.status == SolveStatus::OK);
  CHECK(r.z[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.z[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.y[0] == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(r.stationarity <= 1e-12);
}

TEST_CASE("dense KKT iteration handles a nonconvex equality") {
  EllipseSaddle p;
  Eigen::VectorXd z0(2);
  z0 << 1.5, 0.5;
  SqpResult r = solve_sqp(p, z0);
  REQUIRE(r.status == SolveStatus::OK);
  CHECK(std::abs(r.z[0]) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(std::abs(r.z[1]) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.feasibility <= 1e-12);
}

}  // TEST_SUITE
