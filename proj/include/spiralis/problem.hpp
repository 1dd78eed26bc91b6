#pragma once

#include <optional>
#include <string>
#include <vector>

namespace spiralis {

/// State of a unit-speed planar curve: position, heading, signed curvature.
/// theta is kept unwrapped (no mod-2pi reduction) so terminal heading
/// conditions are unambiguous.
struct State {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double kappa = 0.0;
};

/// Two-point boundary-value data for the minimax-spirality problem:
/// steer from (x0, y0, theta0, kappa0) to (xf, yf, thetaf, kappaf) with a
/// curve of total arc length `total_length`, minimizing the largest |kappa'|.
///
/// Endpoint curvatures may be left free (nullopt). The curvature bound `a`
/// is optional; when absent the curvature is unconstrained and downstream
/// code branches on that explicitly rather than using a large surrogate.
struct ProblemSpec {
  double x0 = 0.0, y0 = 0.0, theta0 = 0.0;
  std::optional<double> kappa0;
  double xf = 0.0, yf = 0.0, thetaf = 0.0;
  std::optional<double> kappaf;
  std::optional<double> curvature_bound;  // a > 0 when present
  double total_length = 1.0;              // t_f

  bool bounded() const { return curvature_bound.has_value(); }
};

/// Right-hand side of the state ODE: (cos theta, sin theta, kappa, u),
/// where the control u is the curvature rate.
/// Throws std::invalid_argument on non-finite input.
State dynamics_rhs(const State& s, double u);

/// Checks every ProblemSpec invariant. Returns an empty list when the spec
/// is usable, otherwise one message per violated condition:
///   - total_length must strictly exceed the endpoint chord length,
///   - curvature_bound must be positive when given,
///   - fixed endpoint curvatures must respect the bound,
///   - all entries finite.
std::vector<std::string> validate(const ProblemSpec& spec);

enum class TrivialKind { LINE, CIRCLE };

/// Closed-form solution for the degenerate instances where the boundary
/// data is exactly met by a straight segment or a single circular arc;
/// both have zero curvature rate, so the optimal bound is b = 0.
struct TrivialSolution {
  TrivialKind kind;
  double curvature = 0.0;  // signed; 0 for LINE
  double radius = 0.0;     // 1/|curvature| for CIRCLE
  int orientation = 0;     // +1 counter-clockwise, -1 clockwise, 0 line
};

/// Detects the LINE / CIRCLE degeneracies. Headings are compared as tangent
/// directions (mod 2pi): a circular arc may wind, so candidate curvatures
/// (thetaf - theta0 + 2 pi k)/t_f are scanned over a small window of k.
/// LINE takes precedence. Comparison tolerance is 1e-12 relative.
/// Returns nullopt when the instance is not degenerate.
std::optional<TrivialSolution> detect_trivial(const ProblemSpec& spec);

/// Sampled solution curve. u holds the control on the interval starting at
/// each node (the last entry repeats the final interval's control), and b is
/// the curvature-rate bound the samples obey.
struct Trajectory {
  std::vector<double> t;
  std::vector<State> s;
  std::vector<double> u;
  double b = 0.0;

  std::size_t size() const { return t.size(); }
};

}  // namespace spiralis
