#include "spiralis/structure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace spiralis {

double control_value(ArcKind kind, double b) {
  switch (kind) {
    case ArcKind::PLUS_BANG: return b;
    case ArcKind::MINUS_BANG: return -b;
    default: return 0.0;
  }
}

int control_sign(ArcKind kind) {
  switch (kind) {
    case ArcKind::PLUS_BANG: return 1;
    case ArcKind::MINUS_BANG: return -1;
    default: return 0;
  }
}

std::vector<ArcKind> ArcStructure::kinds() const {
  std::vector<ArcKind> out;
  out.reserve(arcs.size());
  for (const auto& a : arcs) out.push_back(a.kind);
  return out;
}

std::vector<ChatterWindow> detect_chatter(const Trajectory& traj, double /*b*/,
                                          const std::vector<double>* lambda4,
                                          const ChatterOptions& opts) {
  const int n_int = static_cast<int>(traj.u.size()) - 1;  // control intervals
  std::vector<ChatterWindow> windows;
  if (n_int < 2) return windows;

  const int width = std::max(opts.min_window_nodes, n_int / 50);
  if (width > n_int) return windows;

  // Prefix sums of control sign flips between adjacent intervals.
  std::vector<int> flips(n_int, 0);
  for (int i = 0; i + 1 < n_int; ++i)
    flips[i] = (traj.u[i] * traj.u[i + 1] < 0.0) ? 1 : 0;
  std::vector<int> flip_psum(n_int + 1, 0);
  for (int i = 0; i < n_int; ++i) flip_psum[i + 1] = flip_psum[i] + flips[i];

  double l4_max = 0.0;
  std::vector<double> l4_psum;
  if (lambda4 && !lambda4->empty()) {
    for (double v : *lambda4) l4_max = std::max(l4_max, std::abs(v));
    l4_psum.assign(lambda4->size() + 1, 0.0);
    for (std::size_t i = 0; i < lambda4->size(); ++i)
      l4_psum[i + 1] = l4_psum[i] + std::abs((*lambda4)[i]);
  }

  std::vector<bool> in_chatter(n_int, false);
  for (int w = 0; w + width <= n_int; ++w) {
    const int count = flip_psum[w + width] - flip_psum[w];
    if (count < opts.min_sign_flips) continue;
    if (lambda4 && !lambda4->empty() && l4_max > 0.0) {
      const int hi = std::min<int>(w + width + 1, static_cast<int>(lambda4->size()));
      const double mean = (l4_psum[hi] - l4_psum[w]) / std::max(1, hi - w);
      if (mean > opts.l4_mean_fraction * l4_max) continue;
    }
    for (int i = w; i < w + width; ++i) in_chatter[i] = true;
  }

  for (int i = 0; i < n_int;) {
    if (!in_chatter[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j < n_int && in_chatter[j]) ++j;
    ChatterWindow win;
    win.node_begin = i;
    win.node_end = j;  // windows cover intervals [i, j), i.e. nodes [i, j]
    win.t_begin = traj.t[i];
    win.t_end = traj.t[j];
    win.sign_flips = flip_psum[j] - flip_psum[i];
    if (lambda4 && !lambda4->empty() && l4_max > 0.0) {
      const int hi = std::min<int>(j + 1, static_cast<int>(lambda4->size()));
      win.mean_abs_l4 = (l4_psum[hi] - l4_psum[i]) / std::max(1, hi - i);
    } else {
      win.mean_abs_l4 = std::numeric_limits<double>::quiet_NaN();
    }
    windows.push_back(win);
    i = j;
  }
  return windows;
}

namespace {

// Interval labels before run merging; CHATTER and AMBIG are transient.
enum class Label { PLUS, MINUS, BPLUS, BMINUS, SING, AMBIG, CHATTER };

ArcKind to_kind(Label l) {
  switch (l) {
    case Label::PLUS: return ArcKind::PLUS_BANG;
    case Label::MINUS: return ArcKind::MINUS_BANG;
    case Label::BPLUS: return ArcKind::BOUNDARY_PLUS;
    case Label::BMINUS: return ArcKind::BOUNDARY_MINUS;
    default: return ArcKind::SINGULAR_LINE;
  }
}

struct Run {
  Label label;
  int begin;  // interval span [begin, end)
  int end;
};

std::vector<Run> merge_runs(const std::vector<Label>& labels) {
  std::vector<Run> runs;
  for (int i = 0; i < static_cast<int>(labels.size());) {
    int j = i;
    while (j < static_cast<int>(labels.size()) && labels[j] == labels[i]) ++j;
    runs.push_back({labels[i], i, j});
    i = j;
  }
  return runs;
}

ArcStructure runs_to_structure(std::vector<Run> runs, const Trajectory& traj,
                               int min_arc_nodes) {
  // Absorb short runs into their longer neighbor, then re-merge; chatter
  // runs are protected (they are short on purpose after replacement).
  bool changed = true;
  while (changed && runs.size() > 1) {
    changed = false;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      if (runs[k].label == Label::CHATTER) continue;
      if (runs[k].end - runs[k].begin >= min_arc_nodes) continue;
      const bool has_prev = k > 0;
      const bool has_next = k + 1 < runs.size();
      std::size_t into;
      if (has_prev && has_next) {
        into = (runs[k - 1].end - runs[k - 1].begin >= runs[k + 1].end - runs[k + 1].begin)
                   ? k - 1
                   : k + 1;
      } else if (has_prev) {
        into = k - 1;
      } else if (has_next) {
        into = k + 1;
      } else {
        break;  // single run; keep it
      }
      if (into < k) {
        runs[into].end = runs[k].end;
      } else {
        runs[into].begin = runs[k].begin;
      }
      runs.erase(runs.begin() + k);
      // Merge equal-label neighbors created by the removal.
      for (std::size_t m = 0; m + 1 < runs.size();) {
        if (runs[m].label == runs[m + 1].label && runs[m].label != Label::CHATTER) {
          runs[m].end = runs[m + 1].end;
          runs.erase(runs.begin() + m + 1);
        } else {
          ++m;
        }
      }
      changed = true;
      break;
    }
  }

  ArcStructure st;
  for (const auto& r : runs) {
    Arc arc;
    arc.kind = to_kind(r.label);
    arc.node_begin = r.begin;
    arc.node_end = r.end;  // node span [begin, end]
    arc.from_chatter = (r.label == Label::CHATTER);
    st.arcs.push_back(arc);
    st.xi_guess.push_back(traj.t[r.end] - traj.t[r.begin]);
  }
  return st;
}

}  // namespace

ArcStructure classify_controls(const Trajectory& traj, double b,
                               std::optional<double> curvature_bound,
                               const ClassifyOptions& opts,
                               const std::vector<double>* lambda4) {
  if (!(b > 0.0)) throw std::invalid_argument("classify_controls: b must be positive");
  const int n_int = static_cast<int>(traj.u.size()) - 1;
  if (n_int < 1) throw std::invalid_argument("classify_controls: empty trajectory");

  double kappa_max = 0.0;
  for (const auto& s : traj.s) kappa_max = std::max(kappa_max, std::abs(s.kappa));
  const double sing_tol = opts.singular_fraction * std::max(kappa_max, 1.0);

  std::vector<Label> labels(n_int);
  for (int i = 0; i < n_int; ++i) {
    const double u = traj.u[i];
    const double ka = traj.s[i].kappa;
    if (u >= opts.bang_fraction * b) {
      labels[i] = Label::PLUS;
    } else if (u <= -opts.bang_fraction * b) {
      labels[i] = Label::MINUS;
    } else if (std::abs(u) <= opts.near_zero_fraction * b) {
      if (curvature_bound && std::abs(ka - *curvature_bound) <= opts.boundary_tol * *curvature_bound) {
        labels[i] = Label::BPLUS;
      } else if (curvature_bound &&
                 std::abs(ka + *curvature_bound) <= opts.boundary_tol * *curvature_bound) {
        labels[i] = Label::BMINUS;
      } else if (std::abs(ka) <= sing_tol) {
        labels[i] = Label::SING;
      } else {
        labels[i] = Label::AMBIG;
      }
    } else {
      labels[i] = Label::AMBIG;
    }
  }

  const auto windows = detect_chatter(traj, b, lambda4);
  for (const auto& w : windows)
    for (int i = w.node_begin; i < w.node_end; ++i) labels[i] = Label::CHATTER;

  // Persistent mid-band controls mean the bang/off dichotomy failed.
  {
    std::ostringstream bad;
    int nbad = 0;
    auto runs = merge_runs(labels);
    for (const auto& r : runs) {
      if (r.label == Label::AMBIG && r.end - r.begin >= opts.min_arc_nodes) {
        bad << " [" << r.begin << ',' << r.end << ')';
        ++nbad;
      }
    }
    if (nbad > 0) {
      throw std::runtime_error("classify_controls: ambiguous control ranges:" + bad.str());
    }
    // Short ambiguous runs: reuse the absorption below by relabeling them
    // after their left neighbor (or right at the front).
    for (auto& r : runs) {
      if (r.label != Label::AMBIG) continue;
      if (r.begin == 0 && r.end == n_int)
        throw std::runtime_error("classify_controls: all controls ambiguous");
      const Label fill = (r.begin > 0) ? labels[r.begin - 1] : labels[r.end];
      for (int i = r.begin; i < r.end; ++i) labels[i] = fill;
    }
  }

  ArcStructure st = runs_to_structure(merge_runs(labels), traj, opts.min_arc_nodes);
  st.chatter_windows = windows;

  // In the unbounded regime a flat arc coexisting with bang arcs (outside a
  // chatter replacement) cannot be stationary unless the whole curve is one
  // line; keep it, but say so.
  if (!curvature_bound && st.arcs.size() > 1) {
    for (const auto& a : st.arcs) {
      if (a.kind == ArcKind::SINGULAR_LINE && !a.from_chatter) {
        st.warnings.push_back(
            "singular line arc among bang arcs without a chatter window; "
            "structure is not stationary unless the curve is one line");
      }
    }
  }
  return st;
}

ArcStructure apply_chatter_workaround(const ArcStructure& st,
                                      const std::vector<ChatterWindow>& windows) {
  if (windows.empty()) return st;
  if (st.arcs.empty()) return st;
  const int n_int = st.arcs.back().node_end;

  // Back to per-interval labels, then stamp the (merged) windows on top.
  std::vector<Label> labels(n_int, Label::SING);
  for (const auto& a : st.arcs) {
    Label l;
    switch (a.kind) {
      case ArcKind::PLUS_BANG: l = Label::PLUS; break;
      case ArcKind::MINUS_BANG: l = Label::MINUS; break;
      case ArcKind::BOUNDARY_PLUS: l = Label::BPLUS; break;
      case ArcKind::BOUNDARY_MINUS: l = Label::BMINUS; break;
      default: l = a.from_chatter ? Label::CHATTER : Label::SING; break;
    }
    for (int i = a.node_begin; i < a.node_end && i < n_int; ++i) labels[i] = l;
  }
  for (const auto& w : windows)
    for (int i = std::max(0, w.node_begin); i < std::min(n_int, w.node_end); ++i)
      labels[i] = Label::CHATTER;

  // Arc lengths are rebuilt from interval counts; the source grids are
  // uniform, so intervals * unit spacing is exact.
  double total_xi = 0.0;
  for (double x : st.xi_guess) total_xi += x;
  const double unit = n_int > 0 ? total_xi / n_int : 0.0;

  auto runs = merge_runs(labels);
  ArcStructure out;
  out.chatter_windows = windows;
  out.warnings = st.warnings;
  for (const auto& r : runs) {
    Arc arc;
    arc.kind = to_kind(r.label);
    arc.node_begin = r.begin;
    arc.node_end = r.end;
    arc.from_chatter = (r.label == Label::CHATTER);
    // A replacement arc adjacent to an equal-kind neighbor is kept distinct
    // only when flagged; plain duplicates merge.
    if (!out.arcs.empty() && out.arcs.back().kind == arc.kind &&
        !out.arcs.back().from_chatter && !arc.from_chatter) {
      out.arcs.back().node_end = arc.node_end;
      out.xi_guess.back() += (r.end - r.begin) * unit;
    } else {
      out.arcs.push_back(arc);
      out.xi_guess.push_back((r.end - r.begin) * unit);
    }
  }
  return out;
}

std::string to_string(const std::vector<ArcKind>& kinds) {
  std::string out;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i) out += ' ';
    switch (kinds[i]) {
      case ArcKind::PLUS_BANG: out += '+'; break;
      case ArcKind::MINUS_BANG: out += '-'; break;
      case ArcKind::SINGULAR_LINE: out += '0'; break;
      case ArcKind::BOUNDARY_PLUS: out += 'P'; break;
      case ArcKind::BOUNDARY_MINUS: out += 'M'; break;
    }
  }
  return out;
}

std::vector<ArcKind> parse_structure(const std::string& text) {
  std::vector<ArcKind> kinds;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    if (tok.size() != 1)
      throw std::invalid_argument("structure: unknown arc symbol '" + tok + "'");
    ArcKind k;
    switch (tok[0]) {
      case '+': k = ArcKind::PLUS_BANG; break;
      case '-': k = ArcKind::MINUS_BANG; break;
      case '0': k = ArcKind::SINGULAR_LINE; break;
      case 'P': k = ArcKind::BOUNDARY_PLUS; break;
      case 'M': k = ArcKind::BOUNDARY_MINUS; break;
      default:
        throw std::invalid_argument("structure: unknown arc symbol '" + tok + "'");
    }
    if (!kinds.empty() && kinds.back() == k)
      throw std::invalid_argument(
          "structure: adjacent identical arcs would be a single arc ('" + text + "')");
    kinds.push_back(k);
  }
  if (kinds.empty()) throw std::invalid_argument("structure: empty string");
  return kinds;
}

}  // namespace spiralis
