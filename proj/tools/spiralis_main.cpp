// Command-line front end: solve / refine / verify / plot.
//
// solve   runs the full pipeline: direct multi-start solve on a coarse grid,
//         structure extraction, arc-length refinement, optimality checks.
// refine  skips the direct phase and refines a user-provided structure.
// verify  re-derives the adjoints of a stored solution and re-runs checks.
// plot    regenerates CSV/SVG artifacts from a stored solution.
//
// Exit codes: 0 solved and verified, 2 solved but a check failed, 1 error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI/CLI.hpp>
#include <nlohmann/json.hpp>

#include "spiralis/arc_param.hpp"
#include "spiralis/io.hpp"
#include "spiralis/pmp.hpp"
#include "spiralis/problem.hpp"
#include "spiralis/structure.hpp"
#include "spiralis/transcribe.hpp"

namespace fs = std::filesystem;
using namespace spiralis;

namespace {

struct CommonArgs {
  std::string config_file;
  std::string solution_file;
  std::string structure;
  int n = 0;          // 0: keep config value
  int starts = 0;     // 0: keep config value
  long long seed = -1;  // <0: keep config value
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonArgs& a, bool wants_config, bool wants_solution) {
  if (wants_config)
    cmd->add_option("--config", a.config_file, "run configuration (JSON)")->required();
  if (wants_solution)
    cmd->add_option("--solution", a.solution_file, "solution document (JSON)")->required();
  cmd->add_option("--structure", a.structure, "arc structure, e.g. \"+ - + -\"");
  cmd->add_option("--n", a.n, "direct-phase grid steps");
  cmd->add_option("--starts", a.starts, "direct-phase multi-start count");
  cmd->add_option("--seed", a.seed, "multi-start seed");
  cmd->add_option("--out", a.out_dir, "output directory (default: .)");
}

RunConfig effective_config(const CommonArgs& a) {
  RunConfig cfg = load_config(a.config_file);
  if (!a.structure.empty()) cfg.structure = a.structure;
  if (a.n > 0) cfg.n = a.n;
  if (a.starts > 0) cfg.starts = a.starts;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  const auto issues = validate(cfg.spec);
  if (!issues.empty()) {
    std::ostringstream os;
    os << "invalid problem:";
    for (const auto& m : issues) os << "\n  - " << m;
    throw std::runtime_error(os.str());
  }
  return cfg;
}

void write_artifacts(const fs::path& out, const SolutionDoc& doc,
                     const PmpReport* rep, const AdjointTrack* adj) {
  fs::create_directories(out);
  atomic_write(out / "solution.json", to_json(doc).dump(2) + "\n");
  if (rep) {
    atomic_write(out / "report.json", to_json(*rep).dump(2) + "\n");
    atomic_write(out / "report.txt", format_report(*rep));
  }
  const Trajectory& traj = doc.refined.traj;
  std::ostringstream csv;
  write_trajectory_csv(csv, traj, adj);
  atomic_write(out / "trajectory.csv", csv.str());
  atomic_write(out / "curve.svg", render_curve_svg(traj, doc.refined.t_switch));

  std::vector<double> kappa(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) kappa[i] = traj.s[i].kappa;
  atomic_write(out / "u.svg", render_series_svg("u(t)", traj.t, traj.u));
  atomic_write(out / "kappa.svg", render_series_svg("kappa(t)", traj.t, kappa));
  if (adj) {
    atomic_write(out / "lambda4.svg", render_series_svg("lambda4(t)", traj.t, adj->l4));
    atomic_write(out / "mu1.svg", render_series_svg("mu1(t)", traj.t, adj->mu1));
    atomic_write(out / "mu2.svg", render_series_svg("mu2(t)", traj.t, adj->mu2));
  }
}

void print_summary(const SolutionDoc& doc, const PmpReport& rep) {
  const RefinedSolution& r = doc.refined;
  std::cout << "phase:      " << doc.phase << '\n';
  std::cout << "structure:  " << to_string(r.kinds) << '\n';
  std::cout.precision(15);
  std::cout << "b:          " << r.b << '\n';
  std::cout << "xi:        ";
  for (double x : r.xi) std::cout << ' ' << x;
  std::cout << '\n';
  if (!r.t_switch.empty()) {
    std::cout << "t_switch:  ";
    for (double t : r.t_switch) std::cout << ' ' << t;
    std::cout << '\n';
  }
  std::cout << "kappa0:     " << r.kappa0 << '\n';
  std::cout << "kappaf:     " << r.kappaf << '\n';
  std::cout << "status:     "
            << (r.status == SolveStatus::OK
                    ? "ok"
                    : (r.status == SolveStatus::MAX_ITER ? "max_iter" : "failed"))
            << '\n';
  for (const auto& w : r.warnings) std::cout << "warning:    " << w << '\n';
  std::cout << '\n' << format_report(rep);
}

int exit_code(const RefinedSolution& r, const PmpReport& rep) {
  if (r.status != SolveStatus::OK) return 1;
  return rep.verdict ? 0 : 2;
}

SolutionDoc make_trivial_doc(const ProblemSpec& spec, const TrivialSolution& triv) {
  SolutionDoc doc;
  doc.spec = spec;
  doc.trivial = triv;
  doc.phase = "trivial";
  RefinedSolution& r = doc.refined;
  r.b = 0.0;
  r.kinds = {ArcKind::SINGULAR_LINE};
  r.xi = {spec.total_length};
  r.kappa0 = triv.curvature;
  r.status = SolveStatus::OK;
  resample_solution(spec, r, 400);
  return doc;
}

int finish(const CommonArgs& args, SolutionDoc& doc) {
  auto [adj, consts] = reconstruct_adjoints(doc.spec, doc.refined);
  PmpReport rep = verify_solution(doc.spec, doc.refined.traj, adj, consts,
                                  refined_arcs(doc.refined), VerifyPhase::REFINED);
  write_artifacts(args.out_dir, doc, &rep, &adj);
  print_summary(doc, rep);
  return exit_code(doc.refined, rep);
}

int cmd_solve(const CommonArgs& args) {
  RunConfig cfg = effective_config(args);

  if (auto triv = detect_trivial(cfg.spec)) {
    std::cout << "degenerate problem: exact "
              << (triv->kind == TrivialKind::LINE ? "line" : "circle")
              << " solution with b = 0\n";
    SolutionDoc doc = make_trivial_doc(cfg.spec, *triv);
    return finish(args, doc);
  }

  DirectOptions dopts;
  dopts.starts = cfg.starts;
  dopts.seed = cfg.seed;
  std::cout << "direct phase: N = " << cfg.n << ", " << cfg.starts
            << " starts...\n";
  auto sols = solve_ph(cfg.spec, cfg.n, dopts);
  std::cout << "direct phase: " << sols.size() << " distinct critical value(s):";
  std::cout.precision(12);
  for (const auto& s : sols) std::cout << ' ' << s.b;
  std::cout << '\n';
  const DirectSolution& best = sols.front();

  // Switching-function samples sharpen both chatter detection and the
  // bang/off labeling of the control plateaus.
  std::vector<double> l4(best.traj.size());
  for (std::size_t i = 0; i + 1 < best.traj.size(); ++i)
    l4[i] = best.adjoints.lambda(3, static_cast<int>(i));
  l4[best.traj.size() - 1] = l4[best.traj.size() - 2];

  ArcStructure st =
      classify_controls(best.traj, best.b, cfg.spec.curvature_bound, {}, &l4);
  std::cout << "structure:  " << to_string(st.kinds()) << '\n';
  for (const auto& w : st.warnings) std::cout << "warning:    " << w << '\n';

  RefineOptions ropts;
  RefinedSolution refined =
      solve_pa(cfg.spec, st.kinds(), st.xi_guess, best.b, ropts);
  refined.warnings.insert(refined.warnings.begin(), st.warnings.begin(),
                          st.warnings.end());

  SolutionDoc doc;
  doc.spec = cfg.spec;
  doc.refined = std::move(refined);
  for (const auto& s : sols) doc.direct_critical_b.push_back(s.b);
  return finish(args, doc);
}

int cmd_refine(const CommonArgs& args) {
  RunConfig cfg = effective_config(args);
  if (!cfg.structure)
    throw std::runtime_error("refine needs a structure (--structure or config key)");
  const auto kinds = parse_structure(*cfg.structure);

  if (auto triv = detect_trivial(cfg.spec)) {
    std::cout << "degenerate problem: exact "
              << (triv->kind == TrivialKind::LINE ? "line" : "circle")
              << " solution with b = 0\n";
    SolutionDoc doc = make_trivial_doc(cfg.spec, *triv);
    return finish(args, doc);
  }

  RefinedSolution refined = solve_pa(cfg.spec, kinds);
  SolutionDoc doc;
  doc.spec = cfg.spec;
  doc.refined = std::move(refined);
  return finish(args, doc);
}

SolutionDoc load_solution(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open solution file " + file);
  nlohmann::json j;
  is >> j;
  return solution_from_json(j);
}

int cmd_verify(const CommonArgs& args) {
  SolutionDoc doc = load_solution(args.solution_file);
  auto [adj, consts] = reconstruct_adjoints(doc.spec, doc.refined);
  PmpReport rep = verify_solution(doc.spec, doc.refined.traj, adj, consts,
                                  refined_arcs(doc.refined), VerifyPhase::REFINED);
  fs::create_directories(args.out_dir);
  atomic_write(fs::path(args.out_dir) / "report.json", to_json(rep).dump(2) + "\n");
  atomic_write(fs::path(args.out_dir) / "report.txt", format_report(rep));
  std::cout << format_report(rep);
  return exit_code(doc.refined, rep);
}

int cmd_plot(const CommonArgs& args) {
  SolutionDoc doc = load_solution(args.solution_file);
  if (doc.refined.traj.size() == 0)
    throw std::runtime_error("solution has an empty trajectory");
  auto [adj, consts] = reconstruct_adjoints(doc.spec, doc.refined);
  (void)consts;
  write_artifacts(args.out_dir, doc, nullptr, &adj);
  std::cout << "artifacts written to " << args.out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spiralis: minimax-spirality planar curves between oriented endpoints"};
  app.require_subcommand(1);

  CommonArgs a_solve, a_refine, a_verify, a_plot;
  CLI::App* c_solve = app.add_subcommand("solve", "full pipeline: direct + refine + verify");
  add_common(c_solve, a_solve, true, false);
  CLI::App* c_refine = app.add_subcommand("refine", "refine a known arc structure");
  add_common(c_refine, a_refine, true, false);
  CLI::App* c_verify = app.add_subcommand("verify", "re-check a stored solution");
  add_common(c_verify, a_verify, false, true);
  CLI::App* c_plot = app.add_subcommand("plot", "regenerate CSV/SVG artifacts");
  add_common(c_plot, a_plot, false, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_solve->parsed()) return cmd_solve(a_solve);
    if (c_refine->parsed()) return cmd_refine(a_refine);
    if (c_verify->parsed()) return cmd_verify(a_verify);
    if (c_plot->parsed()) return cmd_plot(a_plot);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
