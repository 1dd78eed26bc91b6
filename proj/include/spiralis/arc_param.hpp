#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spiralis/integrate.hpp"
#include "spiralis/nlp.hpp"
#include "spiralis/problem.hpp"
#include "spiralis/structure.hpp"

namespace spiralis {

/// High-precision solution of the arc-length parametrization: the curve is a
/// fixed sequence of constant-control arcs and the unknowns are the bound b,
/// the arc lengths xi_k, and a free initial curvature when the data leaves
/// it open.
struct RefinedSolution {
  double b = 0.0;
  std::vector<ArcKind> kinds;
  std::vector<double> xi;
  std::vector<double> t_switch;     // interior junction times (prefix sums)
  double kappa0 = 0.0;              // value actually used at t = 0
  double kappaf = 0.0;              // resulting terminal curvature
  Trajectory traj;                  // dense resample, junction-aligned grid
  std::vector<int> arc_node_begin;  // first node index of each arc in traj
  double feasibility = 0.0;
  double stationarity = 0.0;
  SolveStatus status = SolveStatus::FAILED;
  std::vector<std::string> warnings;
};

/// Equality-constrained program over z = (b, xi_1..xi_na [, kappa0]):
///   min b  s.t.  terminal x, y, theta (+ kappa when fixed),
///                sum xi = t_f,
///                curvature at entry of each interior boundary arc = +-a.
/// Derivatives are exact, propagated through the GL6 steps (Gl6Jets).
class PaProblem : public DenseNlp {
 public:
  PaProblem(const ProblemSpec& spec, const std::vector<ArcKind>& kinds,
            int total_steps = 400);
  ~PaProblem() override;  // Row is only complete inside the implementation

  int num_vars() const override;
  int num_eq() const override;
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override;
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& c,
                   Eigen::MatrixXd& J) const override;
  void lagrangian_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                          Eigen::MatrixXd& H) const override;
  void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const override;

  bool kappa0_is_unknown() const { return kappa0_unknown_; }
  int steps_per_arc() const { return steps_per_arc_; }
  double xi_min() const { return xi_min_; }
  const std::vector<ArcKind>& kinds() const { return kinds_; }

  /// Entry curvature forced by the structure when kappa0 is free but the
  /// first arc rides a bound (then kappa0 is not an unknown).
  double fixed_kappa0() const { return fixed_kappa0_; }

  Eigen::VectorXd pack(double b, const std::vector<double>& xi,
                       std::optional<double> kappa0) const;

 private:
  struct Row;  // constraint descriptor
  void propagate(const Eigen::VectorXd& z, bool second,
                 Eigen::VectorXd& c, Eigen::MatrixXd& J,
                 std::vector<Eigen::MatrixXd>* H_rows) const;

  ProblemSpec spec_;
  std::vector<ArcKind> kinds_;
  std::vector<Row> rows_;
  int steps_per_arc_ = 0;
  bool kappa0_unknown_ = false;
  double fixed_kappa0_ = 0.0;
  double xi_min_ = 0.0;
};

struct RefineOptions {
  int total_steps = 400;      // rounded up to a multiple of the arc count
  SqpOptions sqp;
  /// Bound guesses tried in order when no b seed is given; each is solved
  /// independently and the best feasible stationary point (smallest b with
  /// no collapsed arc) wins.
  std::vector<double> b_ladder = {1, 2, 5, 10, 20, 40, 80, 160, 320};
  int sample_steps_per_arc = 0;  // trajectory resampling; 0 keeps NLP grid
};

/// Builds and solves the arc-length program for one structure. xi_guess may
/// be empty (equal split); b_guess absent triggers the ladder. Throws
/// std::invalid_argument when the structure cannot fit the data
/// (more independent equalities than unknowns, or bound arcs without a
/// curvature bound).
RefinedSolution solve_pa(const ProblemSpec& spec, const std::vector<ArcKind>& kinds,
                         const std::vector<double>& xi_guess = {},
                         std::optional<double> b_guess = std::nullopt,
                         const RefineOptions& opts = {});

/// Interior junction times from arc lengths.
std::vector<double> switching_times(const std::vector<double>& xi);

/// Re-integrates the solution on a junction-aligned grid and fills traj /
/// arc_node_begin / kappaf of a RefinedSolution (used internally and by the
/// trivial-solution path).
void resample_solution(const ProblemSpec& spec, RefinedSolution& sol,
                       int steps_per_arc);

}  // namespace spiralis
