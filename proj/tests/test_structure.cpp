#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cases.hpp"
#include "spiralis/structure.hpp"

using namespace spiralis;

namespace {

// Synthetic sampled curve: control per interval, curvature integrated from
// kappa0. Positions/headings are irrelevant to classification and left zero.
Trajectory make_traj(int N, double tf, const std::vector<double>& u_int,
                     double kappa0 = 0.0) {
  REQUIRE(static_cast<int>(u_int.size()) == N);
  Trajectory tr;
  tr.t.resize(N + 1);
  tr.s.resize(N + 1);
  tr.u.resize(N + 1);
  const double h = tf / N;
  double ka = kappa0;
  double umax = 0.0;
  for (int i = 0; i <= N; ++i) {
    tr.t[i] = i * h;
    tr.s[i].kappa = ka;
    if (i < N) {
      tr.u[i] = u_int[i];
      umax = std::max(umax, std::abs(u_int[i]));
      ka += h * u_int[i];
    }
  }
  tr.u[N] = u_int[N - 1];
  tr.b = umax;
  return tr;
}

std::vector<double> blocks(const std::vector<std::pair<int, double>>& spans) {
  std::vector<double> u;
  for (const auto& [count, value] : spans) u.insert(u.end(), count, value);
  return u;
}

}  // namespace

TEST_SUITE("structure") {

TEST_CASE("arc kinds map to control values and signs") {
  CHECK(control_value(ArcKind::PLUS_BANG, 3.5) == 3.5);
  CHECK(control_value(ArcKind::MINUS_BANG, 3.5) == -3.5);
  CHECK(control_value(ArcKind::SINGULAR_LINE, 3.5) == 0.0);
  CHECK(control_value(ArcKind::BOUNDARY_PLUS, 3.5) == 0.0);
  CHECK(control_value(ArcKind::BOUNDARY_MINUS, 3.5) == 0.0);
  CHECK(control_sign(ArcKind::PLUS_BANG) == 1);
  CHECK(control_sign(ArcKind::MINUS_BANG) == -1);
  CHECK(control_sign(ArcKind::SINGULAR_LINE) == 0);
  CHECK(control_sign(ArcKind::BOUNDARY_PLUS) == 0);
  CHECK(control_sign(ArcKind::BOUNDARY_MINUS) == 0);
}

TEST_CASE("bang-bang control samples classify into signed arcs") {
  const double b = 2.0;
  auto tr = make_traj(400, 2.0, blocks({{100, b}, {200, -b}, {100, b}}));
  ArcStructure st = classify_controls(tr, b, std::nullopt);
  REQUIRE(st.num_arcs() == 3);
  CHECK(to_string(st.kinds()) == "+ - +");
  CHECK(st.arcs[0].node_begin == 0);
  CHECK(st.arcs[0].node_end == 100);
  CHECK(st.arcs[1].node_end == 300);
  CHECK(st.arcs[2].node_end == 400);
  CHECK(st.xi_guess[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(st.xi_guess[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st.xi_guess[2] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(st.warnings.empty());
  CHECK(st.chatter_windows.empty());
  double sum = 0.0;
  for (double x : st.xi_guess) sum += x;
  CHECK(sum == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("near-zero control on the curvature bound becomes a boundary arc") {
  const double b = 2.0;
  // Curvature ramps to +1 over the first quarter, holds, then ramps down.
  auto tr = make_traj(400, 2.0, blocks({{100, b}, {200, 0.0}, {100, -b}}));
  ArcStructure st = classify_controls(tr, b, 1.0);
  REQUIRE(st.num_arcs() == 3);
  CHECK(to_string(st.kinds()) == "+ P -");
  CHECK(st.arcs[1].kind == ArcKind::BOUNDARY_PLUS);
  CHECK(st.xi_guess[1] == doctest::Approx(1.0).epsilon(1e-12));

  // Mirrored curvature gives the negative boundary.
  auto tr2 = make_traj(400, 2.0, blocks({{100, -b}, {200, 0.0}, {100, b}}));
  ArcStructure st2 = classify_controls(tr2, b, 1.0);
  CHECK(to_string(st2.kinds()) == "- M +");
}

TEST_CASE("near-zero control at near-zero curvature becomes a singular line") {
  const double b = 2.0;
  auto tr = make_traj(400, 2.0,
                      blocks({{100, b}, {100, -b}, {100, 0.0}, {100, b}}));
  ArcStructure st = classify_controls(tr, b, std::nullopt);
  REQUIRE(st.num_arcs() == 4);
  CHECK(to_string(st.kinds()) == "+ - 0 +");
  CHECK_FALSE(st.arcs[2].from_chatter);
  // Unbounded regime: a flat arc between bang arcs cannot be stationary, so
  // the classifier keeps it but warns.
  REQUIRE(!st.warnings.empty());
  CHECK(st.warnings.front().find("singular") != std::string::npos);
}

TEST_CASE("persistent mid-band controls are rejected with their node ranges") {
  const double b = 2.0;
  auto tr = make_traj(400, 2.0, blocks({{150, b}, {60, 0.3 * b}, {190, -b}}));
  CHECK_THROWS_WITH_AS(classify_controls(tr, b, std::nullopt),
                       doctest::Contains("ambiguous"), std::runtime_error);
}

TEST_CASE("runs shorter than the minimum are absorbed by their neighbors") {
  const double b = 2.0;
  auto tr = make_traj(200, 1.0, blocks({{100, b}, {2, -b}, {98, b}}));
  ArcStructure st = classify_controls(tr, b, std::nullopt);
  REQUIRE(st.num_arcs() == 1);
  CHECK(st.arcs[0].kind == ArcKind::PLUS_BANG);
  CHECK(st.arcs[0].node_begin == 0);
  CHECK(st.arcs[0].node_end == 200);
  CHECK(st.xi_guess[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("classification rejects degenerate input") {
  auto tr = make_traj(50, 1.0, std::vector<double>(50, 1.0));
  CHECK_THROWS_AS(classify_controls(tr, 0.0, std::nullopt), std::invalid_argument);
  Trajectory empty;
  empty.t = {0.0};
  empty.s = {State{}};
  empty.u = {0.0};
  CHECK_THROWS_AS(classify_controls(empty, 1.0, std::nullopt), std::invalid_argument);
}

TEST_CASE("structure strings round-trip through parse and format") {
  for (const char* text : {"+ - + -", "+ P - M", "- + - 0 - + -", "+", "0"}) {
    CHECK(to_string(parse_structure(text)) == text);
  }
  CHECK_THROWS_AS(parse_structure("+ +"), std::invalid_argument);
  CHECK_THROWS_AS(parse_structure(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_structure("+ x -"), std::invalid_argument);
  CHECK_THROWS_AS(parse_structure("+-"), std::invalid_argument);
}

TEST_CASE("dense sign flips are detected as a chatter window") {
  const int N = 500;
  const double b = 4.0;
  std::vector<double> u;
  u.insert(u.end(), 200, b);
  for (int i = 0; i < 100; ++i) u.push_back((i % 2 == 0) ? -b : b);
  u.insert(u.end(), 200, -b);
  auto tr = make_traj(N, 1.0, u);

  SUBCASE("flip count alone") {
    auto wins = detect_chatter(tr, b);
    REQUIRE(wins.size() == 1);
    CHECK(wins[0].node_begin >= 150);
    CHECK(wins[0].node_begin <= 200);
    CHECK(wins[0].node_end >= 300);
    CHECK(wins[0].node_end <= 340);
    CHECK(wins[0].sign_flips >= 80);
    CHECK(wins[0].t_begin == doctest::Approx(wins[0].node_begin / 500.0));
    CHECK(std::isnan(wins[0].mean_abs_l4));
  }

  SUBCASE("a vanishing switching function confirms the window") {
    std::vector<double> l4(N + 1, 1.0);
    for (int i = 190; i <= 310; ++i) l4[i] = 1e-4;
    auto wins = detect_chatter(tr, b, &l4);
    REQUIRE(wins.size() == 1);
    CHECK(wins[0].node_begin >= 185);
    CHECK(wins[0].node_end <= 315);
    CHECK(wins[0].mean_abs_l4 <= 0.05);
  }

  SUBCASE("a large switching function vetoes the window") {
    std::vector<double> l4(N + 1, 1.0);
    auto wins = detect_chatter(tr, b, &l4);
    CHECK(wins.empty());
  }

  SUBCASE("classification folds the window into one flagged arc") {
    ArcStructure st = classify_controls(tr, b, std::nullopt);
    REQUIRE(st.num_arcs() == 3);
    CHECK(to_string(st.kinds()) == "+ 0 -");
    CHECK(st.arcs[1].from_chatter);
    CHECK(st.warnings.empty());  // flagged replacements are expected
    REQUIRE(st.chatter_windows.size() == 1);
  }
}

TEST_CASE("chatter workaround replaces windows and rebuilds arc lengths") {
  ArcStructure st;
  st.arcs = {{ArcKind::PLUS_BANG, 0, 200, false},
             {ArcKind::MINUS_BANG, 200, 300, false},
             {ArcKind::PLUS_BANG, 300, 500, false}};
  st.xi_guess = {0.4, 0.2, 0.4};

  SUBCASE("single window spanning the middle arc") {
    ChatterWindow w;
    w.node_begin = 180;
    w.node_end = 320;
    ArcStructure out = apply_chatter_workaround(st, {w});
    REQUIRE(out.num_arcs() == 3);
    CHECK(to_string(out.kinds()) == "+ 0 +");
    CHECK(out.arcs[1].from_chatter);
    CHECK(out.arcs[1].node_begin == 180);
    CHECK(out.arcs[1].node_end == 320);
    CHECK(out.xi_guess[0] == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(out.xi_guess[1] == doctest::Approx(0.28).epsilon(1e-12));
    CHECK(out.xi_guess[2] == doctest::Approx(0.36).epsilon(1e-12));
  }

  SUBCASE("overlapping windows merge into one replacement") {
    ChatterWindow w1, w2;
    w1.node_begin = 180;
    w1.node_end = 250;
    w2.node_begin = 240;
    w2.node_end = 320;
    ArcStructure out = apply_chatter_workaround(st, {w1, w2});
    REQUIRE(out.num_arcs() == 3);
    CHECK(to_string(out.kinds()) == "+ 0 +");
    CHECK(out.arcs[1].node_begin == 180);
    CHECK(out.arcs[1].node_end == 320);
  }

  SUBCASE("no windows leaves the structure untouched") {
    ArcStructure out = apply_chatter_workaround(st, {});
    CHECK(to_string(out.kinds()) == to_string(st.kinds()));
    CHECK(out.xi_guess == st.xi_guess);
  }
}

}  // TEST_SUITE
