#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cases.hpp"
#include "spiralis/arc_param.hpp"

using namespace spiralis;

namespace {

void check_golden(const RefinedSolution& sol, double b, const std::vector<double>& xi,
                  const std::vector<double>& t_switch, double tol) {
  REQUIRE(sol.status == SolveStatus::OK);
  CHECK(std::abs(sol.b - b) <= tol * std::max(1.0, b));
  REQUIRE(sol.xi.size() == xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k)
    CHECK(std::abs(sol.xi[k] - xi[k]) <= tol);
  REQUIRE(sol.t_switch.size() == t_switch.size());
  for (std::size_t k = 0; k < t_switch.size(); ++k)
    CHECK(std::abs(sol.t_switch[k] - t_switch[k]) <= tol);
}

// kappa_f - kappa_0 = b * sum(sign_k * xi_k): piecewise-linear curvature with
// slope sign*b on bang arcs and zero elsewhere.
void check_curvature_budget(const RefinedSolution& sol, double tol) {
  double signed_len = 0.0;
  for (std::size_t k = 0; k < sol.kinds.size(); ++k)
    signed_len += control_sign(sol.kinds[k]) * sol.xi[k];
  CHECK(std::abs((sol.kappaf - sol.kappa0) - sol.b * signed_len) <= tol);
}

// Independent first-order optimality probe: recompute the Jacobian at the
// solution and measure the least-squares residual of grad f + J^T y = 0.
double stationarity_residual(const ProblemSpec& spec, const RefinedSolution& sol) {
  PaProblem prob(spec, sol.kinds);
  Eigen::VectorXd z = prob.pack(sol.b, sol.xi,
                                prob.kappa0_is_unknown()
                                    ? std::optional<double>(sol.kappa0)
                                    : std::nullopt);
  Eigen::VectorXd c;
  Eigen::MatrixXd J;
  prob.constraints(z, c, J);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(prob.num_vars());
  grad[0] = 1.0;
  Eigen::MatrixXd Jt = J.transpose();
  Eigen::VectorXd y = Jt.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(-grad);
  return (grad + Jt * y).norm();
}

}  // namespace

TEST_SUITE("arc_param") {

TEST_CASE("unknown and equality counts follow the structure") {
  SUBCASE("four bang arcs, both end curvatures fixed") {
    PaProblem p(cases::unbounded_s(), parse_structure("- + - +"));
    CHECK(p.num_vars() == 5);  // b + 4 lengths
    CHECK(p.num_eq() == 5);    // x, y, theta, kappa_f, sum
    CHECK_FALSE(p.kappa0_is_unknown());
  }
  SUBCASE("bang and boundary arcs, end curvatures free") {
    PaProblem p(cases::bounded_s(), parse_structure("+ P - M"));
    CHECK(p.num_vars() == 6);  // b + 4 lengths + kappa0
    CHECK(p.num_eq() == 6);    // x, y, theta, sum, two bound entries
    CHECK(p.kappa0_is_unknown());
  }
  SUBCASE("five bang arcs, both end curvatures fixed") {
    PaProblem p(cases::two_circles(5.0), parse_structure("- + - + -"));
    CHECK(p.num_vars() == 6);
    CHECK(p.num_eq() == 5);
  }
  SUBCASE("seven arcs with a singular line") {
    PaProblem p(cases::two_circles(8.0), parse_structure("- + - 0 - + -"));
    CHECK(p.num_vars() == 8);
    CHECK(p.num_eq() == 5);
  }
}

TEST_CASE("impossible structures are rejected up front") {
  CHECK_THROWS_AS(PaProblem(cases::unbounded_s(), {}), std::invalid_argument);
  CHECK_THROWS_AS(
      PaProblem(cases::unbounded_s(), {ArcKind::PLUS_BANG, ArcKind::PLUS_BANG}),
      std::invalid_argument);
  // Boundary arcs demand a curvature bound.
  CHECK_THROWS_AS(PaProblem(cases::unbounded_s(), parse_structure("+ P -")),
                  std::invalid_argument);
  // More equalities than unknowns: a single arc cannot meet 5 conditions.
  CHECK_THROWS_WITH_AS(PaProblem(cases::unbounded_s(), parse_structure("+")),
                       doctest::Contains("structure mismatch"), std::invalid_argument);
  CHECK_THROWS_AS(PaProblem(cases::unbounded_s(), parse_structure("- + -")),
                  std::invalid_argument);
}

TEST_CASE("fixed end curvature must sit on a terminal bound arc") {
  ProblemSpec s = cases::bounded_s();
  s.kappaf = 3.0;  // bound is 5: off the +a rail
  CHECK_THROWS_WITH_AS(PaProblem(s, parse_structure("+ - P")),
                       doctest::Contains("end curvature"), std::invalid_argument);
  s.kappaf = 5.0;
  PaProblem ok(s, parse_structure("+ - P"));
  CHECK(ok.num_eq() == 5);  // the terminal-curvature row is structural
}

TEST_CASE("fixed start curvature must sit on a leading bound arc") {
  ProblemSpec s = cases::bounded_s();
  s.kappa0 = 3.0;
  CHECK_THROWS_WITH_AS(PaProblem(s, parse_structure("P - +")),
                       doctest::Contains("start curvature"), std::invalid_argument);
  s.kappa0 = 5.0;
  PaProblem ok(s, parse_structure("P - +"));
  CHECK_FALSE(ok.kappa0_is_unknown());
  CHECK(ok.fixed_kappa0() == 5.0);
}

TEST_CASE("pack lays out bound, lengths, and optional start curvature") {
  PaProblem p(cases::bounded_s(), parse_structure("+ P - M"));
  Eigen::VectorXd z = p.pack(19.0, {0.1, 0.2, 0.3, 0.4}, -3.5);
  REQUIRE(z.size() == 6);
  CHECK(z[0] == 19.0);
  CHECK(z[1] == 0.1);
  CHECK(z[4] == 0.4);
  CHECK(z[5] == -3.5);
  CHECK_THROWS_AS(p.pack(1.0, {0.1}, std::nullopt), std::invalid_argument);
}

TEST_CASE("constraint Jacobian agrees with finite differences") {
  PaProblem p(cases::bounded_s(), parse_structure("+ P - M"), 80);
  Eigen::VectorXd z = p.pack(19.0, {0.45, 0.53, 0.53, 0.49}, -3.6);
  Eigen::VectorXd c;
  Eigen::MatrixXd J;
  p.constraints(z, c, J);
  for (int j = 0; j < p.num_vars(); ++j) {
    const double delta = 1e-6 * std::max(1.0, std::abs(z[j]));
    Eigen::VectorXd zp = z, zm = z;
    zp[j] += delta;
    zm[j] -= delta;
    Eigen::VectorXd cp, cm;
    Eigen::MatrixXd Jt;
    p.constraints(zp, cp, Jt);
    p.constraints(zm, cm, Jt);
    Eigen::VectorXd fd = (cp - cm) / (2 * delta);
    for (int r = 0; r < p.num_eq(); ++r)
      CHECK(std::abs(J(r, j) - fd[r]) <= 1e-6 * std::max(1.0, std::abs(fd[r])));
  }
}

TEST_CASE("Lagrangian Hessian agrees with differenced Jacobian products") {
  PaProblem p(cases::unbounded_s(), parse_structure("- + - +"), 40);
  Eigen::VectorXd z = p.pack(15.7, {0.06, 0.55, 0.94, 0.45}, std::nullopt);
  Eigen::VectorXd y(p.num_eq());
  y << 0.3, -1.1, 0.7, 0.2, -0.5;
  Eigen::MatrixXd H;
  p.lagrangian_hessian(z, y, H);
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  for (int j = 0; j < p.num_vars(); ++j) {
    const double delta = 1e-5 * std::max(1.0, std::abs(z[j]));
    Eigen::VectorXd zp = z, zm = z;
    zp[j] += delta;
    zm[j] -= delta;
    Eigen::VectorXd c;
    Eigen::MatrixXd Jp, Jm;
    p.constraints(zp, c, Jp);
    p.constraints(zm, c, Jm);
    Eigen::VectorXd fd = (Jp.transpose() * y - Jm.transpose() * y) / (2 * delta);
    for (int i = 0; i < p.num_vars(); ++i)
      CHECK(std::abs(H(i, j) - fd[i]) <= 1e-5 * std::max(1.0, std::abs(fd[i])));
  }
}

TEST_CASE("switching times are prefix sums of the arc lengths") {
  CHECK(switching_times({0.25, 0.5, 0.25}) == std::vector<double>{0.25, 0.75});
  CHECK(switching_times({2.0}) == std::vector<double>{});
}

TEST_CASE("four-bang refinement reproduces the reference solution") {
  auto sol = solve_pa(cases::unbounded_s(), parse_structure("- + - +"), {}, 16.0);
  check_golden(sol, cases::kUnboundedB, cases::kUnboundedXi, cases::kUnboundedT, 1e-8);
  CHECK(sol.feasibility <= 1e-10);
  double sum = 0.0;
  for (double x : sol.xi) sum += x;
  CHECK(sum == doctest::Approx(2.0).epsilon(1e-12));
  check_curvature_budget(sol, 1e-9);
  // Equal first/last and middle pairs: xi1 - xi2 + xi3 - xi4 = 0 exactly at
  // a solution with equal fixed end curvatures.
  CHECK(std::abs(sol.xi[0] - sol.xi[1] + sol.xi[2] - sol.xi[3]) <= 1e-11);
  CHECK(stationarity_residual(cases::unbounded_s(), sol) <= 1e-9);
}

TEST_CASE("the bound ladder finds the same four-bang solution unseeded") {
  auto sol = solve_pa(cases::unbounded_s(), parse_structure("- + - +"));
  REQUIRE(sol.status == SolveStatus::OK);
  CHECK(sol.b == doctest::Approx(cases::kUnboundedB).epsilon(1e-9));
}

TEST_CASE("bounded refinement rides both curvature rails") {
  auto sol = solve_pa(cases::bounded_s(), parse_structure("+ P - M"), {}, 19.0);
  check_golden(sol, cases::kBoundedB, cases::kBoundedXi, cases::kBoundedT, 1e-8);
  const double a = *cases::bounded_s().curvature_bound;
  // The first bang must carry kappa from the free start onto the +a rail.
  CHECK(sol.kappa0 == doctest::Approx(a - sol.b * sol.xi[0]).epsilon(1e-9));
  // The down bang spans rail to rail: b * xi_3 = 2a.
  CHECK(std::abs(sol.b * sol.xi[2] - 2 * a) <= 1e-8);
  CHECK(sol.kappaf == doctest::Approx(-a).epsilon(1e-9));
  check_curvature_budget(sol, 1e-9);
  CHECK(stationarity_residual(cases::bounded_s(), sol) <= 1e-9);
}

TEST_CASE("five-bang refinement matches the reference circle-to-circle join") {
  auto sol = solve_pa(cases::two_circles(5.0), parse_structure("- + - + -"), {}, 49.0);
  check_golden(sol, cases::kCirclesB, cases::kCirclesXi, cases::kCirclesT, 1e-8);
  check_curvature_budget(sol, 1e-9);
  CHECK(stationarity_residual(cases::two_circles(5.0), sol) <= 1e-9);
}

TEST_CASE("seven-arc refinement with a singular line matches its reference") {
  auto sol = solve_pa(cases::two_circles(8.0), parse_structure("- + - 0 - + -"), {}, 90.0);
  check_golden(sol, cases::kSevenArcB, cases::kSevenArcXi, cases::kSevenArcT, 1e-7);
  check_curvature_budget(sol, 1e-8);
  // Entry curvature of the line arc: the identity below is exact for the
  // piecewise-linear curvature, and the value itself is near zero.
  const double k_entry =
      8.0 + sol.b * (-sol.xi[0] + sol.xi[1] - sol.xi[2]);
  const int n0 = sol.arc_node_begin[3];
  CHECK(sol.traj.s[n0].kappa == doctest::Approx(k_entry).epsilon(1e-10));
  CHECK(std::abs(k_entry) <= 0.01);
}

TEST_CASE("resampling keeps junctions on grid nodes") {
  auto sol = solve_pa(cases::unbounded_s(), parse_structure("- + - +"), {}, 16.0);
  REQUIRE(sol.traj.size() == 401);  // 4 arcs x 100 steps + 1
  for (std::size_t k = 0; k < sol.t_switch.size(); ++k) {
    const int node = sol.arc_node_begin[k + 1];
    CHECK(sol.traj.t[node] == doctest::Approx(sol.t_switch[k]).epsilon(1e-12));
  }
  CHECK(sol.kappaf == sol.traj.s.back().kappa);

  RefineOptions opts;
  opts.sample_steps_per_arc = 25;
  auto coarse = solve_pa(cases::unbounded_s(), parse_structure("- + - +"), {}, 16.0, opts);
  CHECK(coarse.traj.size() == 101);
}

}  // TEST_SUITE
