// Shared problem instances and frozen reference values used across the test
// suites. The reference numbers were produced independently (high-precision
// quadrature for the clothoid endpoints, published 12-decimal solutions for
// the benchmark instances) and are asserted, never recomputed, here.
#pragma once

#include <numbers>
#include <vector>

#include "spiralis/problem.hpp"

namespace cases {

inline constexpr double kPi = std::numbers::pi_v<double>;

/// S-shaped instance with fixed zero end curvatures and no curvature bound;
/// minimax-spirality solution is four alternating clothoid arcs.
inline spiralis::ProblemSpec unbounded_s() {
  spiralis::ProblemSpec s;
  s.x0 = 0.0;
  s.y0 = 0.0;
  s.theta0 = -kPi / 3.0;
  s.kappa0 = 0.0;
  s.xf = 0.4;
  s.yf = 0.4;
  s.thetaf = -kPi / 6.0;
  s.kappaf = 0.0;
  s.total_length = 2.0;
  return s;
}

/// Same endpoints with |kappa| <= 5 and free end curvatures; the solution
/// alternates clothoids with curvature-bound arcs (structure "+ P - M").
inline spiralis::ProblemSpec bounded_s() {
  spiralis::ProblemSpec s = unbounded_s();
  s.kappa0.reset();
  s.kappaf.reset();
  s.curvature_bound = 5.0;
  return s;
}

/// Short curve joining two circles (radius 1/kappa0 and 1/2), unbounded
/// curvature. kappa0 = 5 gives a five-arc solution; kappa0 = 8 chatters.
inline spiralis::ProblemSpec two_circles(double kappa0) {
  spiralis::ProblemSpec s;
  s.x0 = 0.0;
  s.y0 = 0.0;
  s.theta0 = kPi / 3.0;
  s.kappa0 = kappa0;
  s.xf = 0.4;
  s.yf = 0.4;
  s.thetaf = kPi / 4.0;
  s.kappaf = 2.0;
  s.total_length = 0.6;
  return s;
}

/// Straight-segment degenerate instance (b = 0).
inline spiralis::ProblemSpec straight_line() {
  spiralis::ProblemSpec s;
  s.x0 = 0.0;
  s.y0 = 0.0;
  s.theta0 = 0.0;
  s.kappa0 = 0.0;
  s.xf = 2.0;
  s.yf = 0.0;
  s.thetaf = 0.0;
  s.kappaf = 0.0;
  s.total_length = 2.0;
  return s;
}

/// Half unit circle, counter-clockwise, free end curvatures (b = 0).
inline spiralis::ProblemSpec half_circle() {
  spiralis::ProblemSpec s;
  s.x0 = 1.0;
  s.y0 = 0.0;
  s.theta0 = kPi / 2.0;
  s.xf = -1.0;
  s.yf = 0.0;
  s.thetaf = -kPi / 2.0;
  s.total_length = kPi;
  return s;
}

// ---- published 12-decimal reference solutions -----------------------------

inline constexpr double kUnboundedB = 15.733062270883;
inline const std::vector<double> kUnboundedXi = {0.058051025764, 0.548479899032,
                                                 0.941948974236, 0.451520100968};
inline const std::vector<double> kUnboundedT = {0.058051025764, 0.606530924796,
                                                1.548479899032};
inline const std::vector<double> kUnboundedCriticalB = {
    15.733062270883, 40.016886269449, 49.380682469500, 51.368649667030};

inline constexpr double kBoundedB = 19.012850374851;
inline const std::vector<double> kBoundedXi = {0.454980338573, 0.531189265997,
                                               0.525960064001, 0.487870331429};
inline const std::vector<double> kBoundedT = {0.454980338573, 0.986169604570,
                                              1.512129668571};

inline constexpr double kCirclesB = 48.985303304067;
inline const std::vector<double> kCirclesXi = {0.237659563282, 0.164288710499,
                                               0.043943296148, 0.105089860239,
                                               0.049018569832};
inline const std::vector<double> kCirclesT = {0.237659563282, 0.401948273781,
                                              0.445891569929, 0.550981430168};

inline constexpr double kSevenArcB = 89.945849353595;
inline const std::vector<double> kSevenArcXi = {
    0.190593874793, 0.125757754134, 0.024206619117, 0.139477144951,
    0.013358892816, 0.071150272188, 0.035455442002};
inline const std::vector<double> kSevenArcT = {0.190593874793, 0.316351628926,
                                               0.340558248044, 0.480035392994,
                                               0.493394285810, 0.564544557998};

// ---- frozen clothoid endpoints (30-digit quadrature, independent tool) ----

// From (0,0,0,0) with u = 1 over length 1.
inline constexpr double kUnitClothoidX = 0.9752876882003445;
inline constexpr double kUnitClothoidY = 0.16371404737570059;
// From (0,0,0.3,0.7) with u = 2 over length 1.3.
inline constexpr double kGeneralClothoidX = 0.27447614682293051;
inline constexpr double kGeneralClothoidY = 0.91785607825178432;

}  // namespace cases
