#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spiralis/pmp.hpp"
#include "spiralis/problem.hpp"

#include <nlohmann/json_fwd.hpp>

namespace spiralis {

/// Everything a run needs, read from one JSON config document (angles in
/// radians, lengths dimensionless). Omitted / null endpoint curvature means
/// free; omitted / null curvature_bound means unbounded.
struct RunConfig {
  ProblemSpec spec;
  std::optional<std::string> structure;  // for the refine phase
  int n = 2000;
  int starts = 20;
  std::uint64_t seed = 1;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& file);

/// On-disk solution document; carries enough to re-integrate the curve
/// exactly (structure, xi, b, entry curvature), so the CSV/SVG artifacts can
/// always be regenerated from it.
struct SolutionDoc {
  ProblemSpec spec;
  std::optional<TrivialSolution> trivial;
  RefinedSolution refined;                  // also used for trivial curves
  std::vector<double> direct_critical_b;    // deduped direct-phase values
  std::string phase = "refined";            // "trivial" | "refined"
};

nlohmann::json to_json(const SolutionDoc& doc);
SolutionDoc solution_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PmpReport& report);

/// CSV with the exact column set
///   t,x,y,theta,kappa,u,lambda1,...,lambda5,mu1,mu2
/// printed at 17 significant digits. Adjoint columns are zero when adj is
/// null.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const AdjointTrack* adj);
/// Inverse of write_trajectory_csv (used for round-trip checks and plots).
/// Returns the trajectory plus the adjoint columns.
std::pair<Trajectory, AdjointTrack> read_trajectory_csv(std::istream& is);

/// Static curve plot: x-y polyline with junction dots.
std::string render_curve_svg(const Trajectory& traj,
                             const std::vector<double>& t_switch);
/// Time-series plot of one sampled quantity.
std::string render_series_svg(const std::string& label,
                              const std::vector<double>& t,
                              const std::vector<double>& values);

/// Writes content to a temp file next to `path`, then renames: readers never
/// observe a half-written artifact. Throws std::runtime_error on I/O errors.
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace spiralis
