#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spiralis/problem.hpp"

namespace spiralis {

/// Qualitative label of one solution arc. The control on an arc is constant:
/// +b / -b on the bang arcs, 0 on the others. SINGULAR_LINE arcs carry zero
/// control in the interior of the curvature range; BOUNDARY arcs ride a
/// curvature bound kappa = +a or -a.
enum class ArcKind { PLUS_BANG, MINUS_BANG, SINGULAR_LINE, BOUNDARY_PLUS, BOUNDARY_MINUS };

/// Control value of an arc given the current bound b.
double control_value(ArcKind kind, double b);

/// Control sign sigma in {-1, 0, +1}.
int control_sign(ArcKind kind);

struct Arc {
  ArcKind kind;
  int node_begin = 0;  // node span [node_begin, node_end] on the source grid
  int node_end = 0;
  bool from_chatter = false;  // produced by replacing a chattering window
};

/// Window of dense control sign flips with a near-vanishing switching
/// function; the discrete signature of an accumulation of switchings.
struct ChatterWindow {
  int node_begin = 0;
  int node_end = 0;
  double t_begin = 0.0;
  double t_end = 0.0;
  int sign_flips = 0;
  double mean_abs_l4 = 0.0;  // NaN when no switching-function samples given
};

/// Ordered arc sequence extracted from a discrete solution, with arc-length
/// guesses for the refinement phase taken from the detected switch nodes.
struct ArcStructure {
  std::vector<Arc> arcs;
  std::vector<double> xi_guess;
  std::vector<ChatterWindow> chatter_windows;
  std::vector<std::string> warnings;

  int num_arcs() const { return static_cast<int>(arcs.size()); }
  std::vector<ArcKind> kinds() const;
};

struct ClassifyOptions {
  double bang_fraction = 0.5;       // |u| >= bang_fraction*b   -> bang node
  double near_zero_fraction = 0.1;  // |u| <= near_zero_fraction*b -> off node
  double boundary_tol = 0.02;       // |kappa -+ a| <= boundary_tol*a
  double singular_fraction = 0.02;  // |kappa| <= singular_fraction*max(|kappa|,1)
  int min_arc_nodes = 3;            // shorter runs are absorbed
};

struct ChatterOptions {
  int min_window_nodes = 20;        // window width = max(this, N/50)
  int min_sign_flips = 5;
  double l4_mean_fraction = 0.05;   // mean|l4| <= fraction * global max|l4|
};

/// Scans the control samples for windows of rapid sign flips. When the
/// switching function lambda4 is supplied (one value per node), a window
/// additionally requires its mean magnitude to sit near zero relative to
/// the global maximum; without lambda4 the flip count alone decides.
std::vector<ChatterWindow> detect_chatter(const Trajectory& traj, double b,
                                          const std::vector<double>* lambda4 = nullptr,
                                          const ChatterOptions& opts = {});

/// Labels every control interval as bang/boundary/singular, merges runs into
/// arcs, absorbs arcs shorter than min_arc_nodes, and folds detected chatter
/// windows into single flagged SINGULAR_LINE arcs (they are exempt from
/// absorption).
///
/// Throws std::runtime_error when a persistent run of controls sits in the
/// unclassifiable band between near_zero_fraction*b and bang_fraction*b;
/// the message lists the node ranges.
ArcStructure classify_controls(const Trajectory& traj, double b,
                               std::optional<double> curvature_bound,
                               const ClassifyOptions& opts = {},
                               const std::vector<double>* lambda4 = nullptr);

/// Replaces each chatter window with one SINGULAR_LINE arc, merging
/// overlapping windows first. Arcs untouched by any window are preserved.
ArcStructure apply_chatter_workaround(const ArcStructure& st,
                                      const std::vector<ChatterWindow>& windows);

/// Compact form, e.g. "+ - + -" or "+ P - M":
///   '+' PLUS_BANG, '-' MINUS_BANG, '0' SINGULAR_LINE,
///   'P' BOUNDARY_PLUS, 'M' BOUNDARY_MINUS.
std::string to_string(const std::vector<ArcKind>& kinds);

/// Inverse of to_string. Throws std::invalid_argument on unknown symbols or
/// adjacent identical arcs (those would be a single arc).
std::vector<ArcKind> parse_structure(const std::string& text);

}  // namespace spiralis
