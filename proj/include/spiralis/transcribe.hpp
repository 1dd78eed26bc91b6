#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "spiralis/nlp.hpp"
#include "spiralis/problem.hpp"

namespace spiralis {

/// Index bookkeeping for the flat variable vector of the direct phase:
/// z = (s_0 .. s_N, u_0 .. u_{N-1}, b) on a regular grid of N steps.
struct TranscriptionGrid {
  int N = 0;
  double h = 0.0;
  double tf = 0.0;

  int num_vars() const { return 5 * N + 5; }
  int state_index(int i, int c) const { return 4 * i + c; }
  int control_index(int i) const { return 4 * (N + 1) + i; }
  int b_index() const { return 5 * N + 4; }
};

/// Multipliers of the discrete problem mapped onto the costate convention:
/// one (l1..l4) column per dynamics defect row, and curvature-bound
/// multipliers per node rescaled by 1/h so they estimate their continuous
/// counterparts. mu1 belongs to kappa <= +a, mu2 to -kappa <= a.
struct DiscreteAdjoints {
  Eigen::MatrixXd lambda;  // 4 x N
  Eigen::VectorXd mu1;     // N+1 (zero when unbounded)
  Eigen::VectorXd mu2;     // N+1
  double lambda0 = 1.0;
};

/// Explicit-Euler direct transcription:
///   min b  over (states, controls, b)
///   s.t.  s_{i+1} - s_i - h f(s_i, u_i) = 0          (4N defect rows)
///         terminal position/heading (+ curvature when fixed)
///         u_i - b <= 0, -u_i - b <= 0                (2N rows)
///         kappa_i - a <= 0, -kappa_i - a <= 0        (when bounded, 2(N+1))
///         b >= 0; initial states frozen through equal bounds.
class EulerTranscription : public AugLagProblem {
 public:
  EulerTranscription(const ProblemSpec& spec, int N);

  const TranscriptionGrid& grid() const { return grid_; }
  const ProblemSpec& spec() const { return spec_; }

  int num_vars() const override;
  int num_eq() const override;
  int num_ineq() const override;
  void bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const override;
  double objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override;
  void constraints(const Eigen::VectorXd& z, Eigen::VectorXd& ceq,
                   Eigen::VectorXd& cineq) const override;
  void add_constraint_gradients(const Eigen::VectorXd& z, const Eigen::VectorXd& yeq,
                                const Eigen::VectorXd& yineq,
                                Eigen::VectorXd& out) const override;

  Trajectory extract_trajectory(const Eigen::VectorXd& z) const;

  /// Maps NLP multipliers to the costate sign convention. The defect rows
  /// are written s_{i+1} - s_i - h f, so with L = f_obj + y^T c the row
  /// multipliers are the negated costates; the flip happens here.
  DiscreteAdjoints extract_adjoints(const AugLagResult& r) const;

 private:
  ProblemSpec spec_;
  TranscriptionGrid grid_;
  double kappa0_value() const;  // start value used for the frozen node
};

/// Deterministic multi-start seeds: index 0 is the straight interpolation of
/// the boundary data with u = 0 and b = 1; later indices add uniform control
/// noise of amplitude growing with the index.
std::vector<Eigen::VectorXd> make_starts(const EulerTranscription& p, int count,
                                         std::uint64_t seed);

struct DirectSolution {
  Trajectory traj;
  DiscreteAdjoints adjoints;
  double b = 0.0;
  AugLagResult nlp;
  int start_index = 0;
};

struct DirectOptions {
  int starts = 20;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: SPIRALIS_THREADS env var, else hardware concurrency
  AugLagOptions auglag;
  double dedupe_rel = 1e-4;  // merge solutions with matching b
};

/// Runs solve_auglag from every seeded start, drops failed runs, removes
/// duplicate critical values (b within dedupe_rel relative), and returns the
/// survivors sorted by b ascending. Throws std::runtime_error when every
/// start fails.
std::vector<DirectSolution> solve_ph(const ProblemSpec& spec, int N,
                                     const DirectOptions& opts = {});

}  // namespace spiralis
