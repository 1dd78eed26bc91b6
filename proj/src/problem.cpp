#include "spiralis/problem.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace spiralis {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kRelTol = 1e-12;  // exact-fit decision tolerance

bool finite(double v) { return std::isfinite(v); }

/// Wrapped angular difference in (-pi, pi].
double angle_diff(double a, double b) { return std::remainder(a - b, kTwoPi); }

/// Exact straight-segment configuration: equal tangent directions along the
/// chord, chord length equal to the total length, zero fixed end curvatures.
bool is_exact_line(const ProblemSpec& spec) {
  const double dx = spec.xf - spec.x0;
  const double dy = spec.yf - spec.y0;
  const double chord = std::hypot(dx, dy);
  const double tf = spec.total_length;
  const double pos_tol = kRelTol * std::max({1.0, chord, tf});
  const double ang_tol = kRelTol * std::max(1.0, std::abs(spec.theta0) + std::abs(spec.thetaf));
  const double kap_tol = kRelTol * std::max(1.0, 1.0 / tf);
  return std::abs(angle_diff(spec.thetaf, spec.theta0)) <= ang_tol &&
         std::abs(chord - tf) <= pos_tol &&
         std::abs(angle_diff(std::atan2(dy, dx), spec.theta0)) <= ang_tol &&
         (!spec.kappa0 || std::abs(*spec.kappa0) <= kap_tol) &&
         (!spec.kappaf || std::abs(*spec.kappaf) <= kap_tol);
}

}  // namespace

State dynamics_rhs(const State& s, double u) {
  if (!finite(s.x) || !finite(s.y) || !finite(s.theta) || !finite(s.kappa) || !finite(u)) {
    throw std::invalid_argument("dynamics_rhs: non-finite state or control");
  }
  return {std::cos(s.theta), std::sin(s.theta), s.kappa, u};
}

std::vector<std::string> validate(const ProblemSpec& spec) {
  std::vector<std::string> issues;

  auto check_finite = [&](double v, const char* name) {
    if (!finite(v)) issues.push_back(std::string("non-finite field: ") + name);
  };
  check_finite(spec.x0, "x0");
  check_finite(spec.y0, "y0");
  check_finite(spec.theta0, "theta0");
  check_finite(spec.xf, "xf");
  check_finite(spec.yf, "yf");
  check_finite(spec.thetaf, "thetaf");
  check_finite(spec.total_length, "total_length");
  if (spec.kappa0) check_finite(*spec.kappa0, "kappa0");
  if (spec.kappaf) check_finite(*spec.kappaf, "kappaf");
  if (spec.curvature_bound) check_finite(*spec.curvature_bound, "curvature_bound");
  if (!issues.empty()) return issues;

  // A curve of length t_f between the endpoints needs t_f > chord; equality
  // is only feasible for the exact straight-segment configuration, which is
  // a legitimate degenerate instance (b = 0).
  const double chord = std::hypot(spec.xf - spec.x0, spec.yf - spec.y0);
  if (!(spec.total_length > 0.0)) {
    issues.push_back("total_length must be positive");
  } else if (!(spec.total_length > chord) && !is_exact_line(spec)) {
    std::ostringstream os;
    os << "infeasible-length: total_length " << spec.total_length
       << " must strictly exceed the endpoint chord " << chord;
    issues.push_back(os.str());
  }
  if (spec.curvature_bound) {
    const double a = *spec.curvature_bound;
    if (!(a > 0.0)) {
      issues.push_back("curvature_bound must be positive");
    } else {
      if (spec.kappa0 && std::abs(*spec.kappa0) > a)
        issues.push_back("bound-violation: |kappa0| exceeds curvature_bound");
      if (spec.kappaf && std::abs(*spec.kappaf) > a)
        issues.push_back("bound-violation: |kappaf| exceeds curvature_bound");
    }
  }
  return issues;
}

std::optional<TrivialSolution> detect_trivial(const ProblemSpec& spec) {
  const double dx = spec.xf - spec.x0;
  const double dy = spec.yf - spec.y0;
  const double chord = std::hypot(dx, dy);
  const double tf = spec.total_length;
  const double pos_tol = kRelTol * std::max({1.0, chord, tf});
  const double kap_tol = kRelTol * std::max(1.0, 1.0 / tf);

  if (is_exact_line(spec)) {
    TrivialSolution sol;
    sol.kind = TrivialKind::LINE;
    return sol;
  }

  // Circular arc: headings may differ by whole turns, so scan winding
  // numbers near zero and keep the least-wound candidate that closes the
  // position gap. The curvature is constant, so
  //   x(tf) = x0 + (sin(theta0 + kc tf) - sin theta0)/kc, analogously for y.
  const double dtheta = spec.thetaf - spec.theta0;
  for (int wind = 0; wind <= 8; ++wind) {
    for (int sgn : {+1, -1}) {
      if (wind == 0 && sgn < 0) continue;
      const int k = wind * sgn;
      const double kc = (dtheta + kTwoPi * k) / tf;
      if (std::abs(kc) * tf < 1e-9) continue;  // that would be the line case
      if (spec.curvature_bound &&
          std::abs(kc) > *spec.curvature_bound * (1.0 + kRelTol)) {
        continue;
      }
      const double th_end = spec.theta0 + kc * tf;
      const double xe = spec.x0 + (std::sin(th_end) - std::sin(spec.theta0)) / kc;
      const double ye = spec.y0 - (std::cos(th_end) - std::cos(spec.theta0)) / kc;
      if (std::abs(xe - spec.xf) > pos_tol || std::abs(ye - spec.yf) > pos_tol) continue;
      if (spec.kappa0 && std::abs(*spec.kappa0 - kc) > kap_tol * std::max(1.0, std::abs(kc)))
        continue;
      if (spec.kappaf && std::abs(*spec.kappaf - kc) > kap_tol * std::max(1.0, std::abs(kc)))
        continue;
      TrivialSolution sol;
      sol.kind = TrivialKind::CIRCLE;
      sol.curvature = kc;
      sol.radius = 1.0 / std::abs(kc);
      sol.orientation = kc > 0.0 ? +1 : -1;
      return sol;
    }
  }
  return std::nullopt;
}

}  // namespace spiralis
