#include "spiralis/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "spiralis/arc_param.hpp"
#include "spiralis/integrate.hpp"

namespace spiralis {

using nlohmann::json;

namespace {

std::optional<double> opt_number(const json& j, const std::string& key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

json endpoint_json(double x, double y, double theta, const std::optional<double>& kappa) {
  json e{{"x", x}, {"y", y}, {"theta", theta}};
  if (kappa) e["kappa"] = *kappa;
  return e;
}

json problem_to_json(const ProblemSpec& s) {
  json j;
  j["start"] = endpoint_json(s.x0, s.y0, s.theta0, s.kappa0);
  j["end"] = endpoint_json(s.xf, s.yf, s.thetaf, s.kappaf);
  j["length"] = s.total_length;
  if (s.curvature_bound) j["curvature_bound"] = *s.curvature_bound;
  return j;
}

ProblemSpec problem_from_json(const json& j) {
  for (const char* key : {"start", "end", "length"})
    if (!j.contains(key))
      throw std::runtime_error(std::string("problem config missing key '") + key + "'");
  const json& a = j["start"];
  const json& b = j["end"];
  for (const char* key : {"x", "y", "theta"}) {
    if (!a.contains(key))
      throw std::runtime_error(std::string("problem start missing key '") + key + "'");
    if (!b.contains(key))
      throw std::runtime_error(std::string("problem end missing key '") + key + "'");
  }
  ProblemSpec s;
  s.x0 = a["x"].get<double>();
  s.y0 = a["y"].get<double>();
  s.theta0 = a["theta"].get<double>();
  s.kappa0 = opt_number(a, "kappa");
  s.xf = b["x"].get<double>();
  s.yf = b["y"].get<double>();
  s.thetaf = b["theta"].get<double>();
  s.kappaf = opt_number(b, "kappa");
  s.total_length = j["length"].get<double>();
  s.curvature_bound = opt_number(j, "curvature_bound");
  return s;
}

std::string status_name(SolveStatus st) {
  switch (st) {
    case SolveStatus::OK: return "ok";
    case SolveStatus::MAX_ITER: return "max_iter";
    default: return "failed";
  }
}

SolveStatus status_from_name(const std::string& name) {
  if (name == "ok") return SolveStatus::OK;
  if (name == "max_iter") return SolveStatus::MAX_ITER;
  if (name == "failed") return SolveStatus::FAILED;
  throw std::runtime_error("unknown solver status '" + name + "'");
}

std::vector<double> column(const json& j, const std::string& key) {
  std::vector<double> v;
  for (const auto& x : j.at(key)) v.push_back(x.get<double>());
  return v;
}

}  // namespace

RunConfig parse_config(const json& j) {
  if (!j.contains("problem") || !j["problem"].is_object())
    throw std::runtime_error("config missing inline 'problem' object");
  RunConfig cfg;
  cfg.spec = problem_from_json(j["problem"]);
  if (j.contains("structure") && !j["structure"].is_null())
    cfg.structure = j["structure"].get<std::string>();
  cfg.n = j.value("n", 2000);
  cfg.starts = j.value("starts", 20);
  cfg.seed = j.value("seed", std::uint64_t{1});
  if (cfg.n < 10) throw std::runtime_error("config: n must be at least 10");
  if (cfg.starts < 1) throw std::runtime_error("config: starts must be positive");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open config file " + file.string());
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + file.string() + ": " + e.what());
  }
  // The problem block may be a path to a separate JSON file, resolved
  // relative to the config's directory.
  if (j.contains("problem") && j["problem"].is_string()) {
    std::filesystem::path ref = j["problem"].get<std::string>();
    if (ref.is_relative()) ref = file.parent_path() / ref;
    std::ifstream ps(ref);
    if (!ps) throw std::runtime_error("cannot open problem file " + ref.string());
    json pj;
    try {
      ps >> pj;
    } catch (const json::parse_error& e) {
      throw std::runtime_error("problem " + ref.string() + ": " + e.what());
    }
    j["problem"] = pj;
  }
  return parse_config(j);
}

json to_json(const SolutionDoc& doc) {
  json j;
  j["format"] = "spiralis-solution";
  j["version"] = 1;
  j["phase"] = doc.phase;
  j["problem"] = problem_to_json(doc.spec);
  if (doc.trivial) {
    json t;
    t["kind"] = doc.trivial->kind == TrivialKind::LINE ? "line" : "circle";
    t["curvature"] = doc.trivial->curvature;
    t["radius"] = doc.trivial->radius;
    t["orientation"] = doc.trivial->orientation;
    j["trivial"] = t;
  }
  const RefinedSolution& r = doc.refined;
  json s;
  s["b"] = r.b;
  s["structure"] = to_string(r.kinds);
  s["xi"] = r.xi;
  s["t_switch"] = r.t_switch;
  s["kappa0"] = r.kappa0;
  s["kappaf"] = r.kappaf;
  const int na = static_cast<int>(r.kinds.size());
  s["steps_per_arc"] = na > 0 ? (static_cast<int>(r.traj.size()) - 1) / na : 0;
  s["feasibility"] = r.feasibility;
  s["stationarity"] = r.stationarity;
  s["status"] = status_name(r.status);
  s["warnings"] = r.warnings;
  j["solution"] = s;
  j["direct_critical_b"] = doc.direct_critical_b;
  return j;
}

SolutionDoc solution_from_json(const json& j) {
  if (j.value("format", "") != "spiralis-solution")
    throw std::runtime_error("not a solution document");
  SolutionDoc doc;
  doc.phase = j.at("phase").get<std::string>();
  doc.spec = problem_from_json(j.at("problem"));
  if (j.contains("trivial")) {
    const json& t = j["trivial"];
    TrivialSolution tr;
    tr.kind = t.at("kind").get<std::string>() == "line" ? TrivialKind::LINE
                                                        : TrivialKind::CIRCLE;
    tr.curvature = t.at("curvature").get<double>();
    tr.radius = t.at("radius").get<double>();
    tr.orientation = t.at("orientation").get<int>();
    doc.trivial = tr;
  }
  const json& s = j.at("solution");
  RefinedSolution& r = doc.refined;
  r.b = s.at("b").get<double>();
  r.kinds = parse_structure(s.at("structure").get<std::string>());
  r.xi = column(s, "xi");
  r.t_switch = column(s, "t_switch");
  r.kappa0 = s.at("kappa0").get<double>();
  r.kappaf = s.at("kappaf").get<double>();
  r.feasibility = s.value("feasibility", 0.0);
  r.stationarity = s.value("stationarity", 0.0);
  r.status = status_from_name(s.value("status", "ok"));
  if (s.contains("warnings"))
    for (const auto& w : s["warnings"]) r.warnings.push_back(w.get<std::string>());
  const int per = s.at("steps_per_arc").get<int>();
  if (r.kinds.size() != r.xi.size())
    throw std::runtime_error("solution document: xi count does not match structure");
  // Re-integrate the samples; the implicit scheme is deterministic, so the
  // rebuilt trajectory is bit-identical to the one behind the document.
  State s0{doc.spec.x0, doc.spec.y0, doc.spec.theta0, r.kappa0};
  IntegratorConfig icfg;
  r.traj = simulate(s0, r.kinds, r.xi, r.b, icfg, per);
  r.arc_node_begin.clear();
  for (std::size_t k = 0; k < r.kinds.size(); ++k)
    r.arc_node_begin.push_back(static_cast<int>(k) * per);
  doc.direct_critical_b.clear();
  if (j.contains("direct_critical_b"))
    for (const auto& v : j["direct_critical_b"]) doc.direct_critical_b.push_back(v.get<double>());
  return doc;
}

json to_json(const PmpReport& rep) {
  json j;
  json kc;
  kc["lambda1bar"] = rep.constants.lambda1bar;
  kc["lambda2bar"] = rep.constants.lambda2bar;
  kc["rho"] = rep.constants.rho;
  kc["phi"] = rep.constants.phi;
  kc["h"] = rep.constants.h;
  kc["lambda0"] = rep.constants.lambda0;
  kc["rho_degenerate"] = rep.constants.rho_degenerate;
  j["constants"] = kc;
  j["checks"] = json::array();
  for (const auto& c : rep.checks) {
    json cj;
    cj["name"] = c.name;
    cj["residual"] = c.residual;
    cj["tol"] = c.tol;
    cj["enabled"] = c.enabled;
    cj["pass"] = c.pass;
    if (!c.note.empty()) cj["note"] = c.note;
    j["checks"].push_back(cj);
  }
  j["control_agreement"] = rep.control_agreement;
  j["hamiltonian_dev"] = rep.hamiltonian_dev;
  j["max_complementarity"] = rep.max_complementarity;
  j["inactive_residual"] = rep.inactive_residual;
  j["transversality"] = {rep.transversality0, rep.transversality_f};
  j["lambda5_end"] = rep.lambda5_end;
  j["affine_intercepts"] = rep.affine_intercepts;
  j["affine_max_dev"] = rep.affine_max_dev;
  j["switching_ode_residual"] = rep.switching_ode_residual;
  j["totally_singular"] = rep.totally_singular;
  j["verdict"] = rep.verdict;
  return j;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const AdjointTrack* adj) {
  os << "t,x,y,theta,kappa,u,lambda1,lambda2,lambda3,lambda4,lambda5,mu1,mu2\n";
  os << std::setprecision(17);
  const std::size_t n = traj.size();
  if (adj && (adj->l4.size() != n || adj->mu1.size() != n))
    throw std::invalid_argument("write_trajectory_csv: adjoint grid mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    os << traj.t[i] << ',' << traj.s[i].x << ',' << traj.s[i].y << ','
       << traj.s[i].theta << ',' << traj.s[i].kappa << ',' << traj.u[i];
    if (adj) {
      os << ',' << adj->l1[i] << ',' << adj->l2[i] << ',' << adj->l3[i] << ','
         << adj->l4[i] << ',' << adj->l5[i] << ',' << adj->mu1[i] << ','
         << adj->mu2[i];
    } else {
      os << ",0,0,0,0,0,0,0";
    }
    os << '\n';
  }
}

std::pair<Trajectory, AdjointTrack> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,", 0) != 0)
    throw std::runtime_error("trajectory CSV: missing header row");
  Trajectory traj;
  AdjointTrack adj;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<double, 13> v{};
    std::size_t pos = 0;
    for (int c = 0; c < 13; ++c) {
      const std::size_t next = line.find(',', pos);
      if (c < 12 && next == std::string::npos)
        throw std::runtime_error("trajectory CSV: short row");
      v[c] = std::stod(line.substr(pos, next - pos));
      pos = next + 1;
    }
    traj.t.push_back(v[0]);
    traj.s.push_back(State{v[1], v[2], v[3], v[4]});
    traj.u.push_back(v[5]);
    adj.l1.push_back(v[6]);
    adj.l2.push_back(v[7]);
    adj.l3.push_back(v[8]);
    adj.l4.push_back(v[9]);
    adj.l5.push_back(v[10]);
    adj.mu1.push_back(v[11]);
    adj.mu2.push_back(v[12]);
  }
  for (double u : traj.u) traj.b = std::max(traj.b, std::abs(u));
  return {std::move(traj), std::move(adj)};
}

std::string render_curve_svg(const Trajectory& traj,
                             const std::vector<double>& t_switch) {
  if (traj.size() == 0) throw std::invalid_argument("render_curve_svg: empty trajectory");
  const double W = 800, H = 600, margin = 40;
  double xmin = traj.s[0].x, xmax = xmin, ymin = traj.s[0].y, ymax = ymin;
  for (const auto& s : traj.s) {
    xmin = std::min(xmin, s.x);
    xmax = std::max(xmax, s.x);
    ymin = std::min(ymin, s.y);
    ymax = std::max(ymax, s.y);
  }
  const double dx = std::max(xmax - xmin, 1e-9), dy = std::max(ymax - ymin, 1e-9);
  const double scale = std::min((W - 2 * margin) / dx, (H - 2 * margin) / dy);
  auto X = [&](double x) { return margin + (x - xmin) * scale + 0.5 * (W - 2 * margin - dx * scale); };
  auto Y = [&](double y) { return H - margin - (y - ymin) * scale - 0.5 * (H - 2 * margin - dy * scale); };

  std::ostringstream os;
  os << std::setprecision(8);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
     << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f3a93\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < traj.size(); ++i)
    os << X(traj.s[i].x) << ',' << Y(traj.s[i].y) << ' ';
  os << "\"/>\n";
  for (double ts : t_switch) {
    const auto it = std::lower_bound(traj.t.begin(), traj.t.end(), ts);
    std::size_t i = static_cast<std::size_t>(it - traj.t.begin());
    if (i >= traj.size()) i = traj.size() - 1;
    if (i > 0 && std::abs(traj.t[i - 1] - ts) < std::abs(traj.t[i] - ts)) --i;
    os << "<circle class=\"junction\" cx=\"" << X(traj.s[i].x) << "\" cy=\""
       << Y(traj.s[i].y) << "\" r=\"4\" fill=\"#c0392b\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_series_svg(const std::string& label, const std::vector<double>& t,
                              const std::vector<double>& values) {
  if (t.empty() || t.size() != values.size())
    throw std::invalid_argument("render_series_svg: bad sample arrays");
  const double W = 800, H = 300, margin = 50;
  double vmin = values[0], vmax = values[0];
  for (double v : values) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  if (vmax - vmin < 1e-12) {
    vmax += 0.5;
    vmin -= 0.5;
  }
  const double t0 = t.front(), t1 = std::max(t.back(), t0 + 1e-12);
  auto X = [&](double x) { return margin + (x - t0) / (t1 - t0) * (W - 2 * margin); };
  auto Y = [&](double v) { return H - margin - (v - vmin) / (vmax - vmin) * (H - 2 * margin); };

  std::ostringstream os;
  os << std::setprecision(8);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
     << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << H - margin << "\" x2=\"" << W - margin
     << "\" y2=\"" << H - margin << "\" stroke=\"#888\"/>\n";
  if (vmin < 0.0 && vmax > 0.0)
    os << "<line x1=\"" << margin << "\" y1=\"" << Y(0.0) << "\" x2=\"" << W - margin
       << "\" y2=\"" << Y(0.0) << "\" stroke=\"#ccc\" stroke-dasharray=\"4 4\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f3a93\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < t.size(); ++i) os << X(t[i]) << ',' << Y(values[i]) << ' ';
  os << "\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"" << margin - 20
     << "\" font-family=\"sans-serif\" font-size=\"16\">" << label << "</text>\n";
  os << std::setprecision(6);
  os << "<text x=\"4\" y=\"" << Y(vmax) + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
     << vmax << "</text>\n";
  os << "<text x=\"4\" y=\"" << Y(vmin) + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
     << vmin << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("atomic rename to " + path.string() + " failed: " + ec.message());
  }
}

}  // namespace spiralis
