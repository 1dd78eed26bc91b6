#include "spiralis/transcribe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace spiralis {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

EulerTranscription::EulerTranscription(const ProblemSpec& spec, int N) : spec_(spec) {
  auto issues = validate(spec);
  if (!issues.empty()) {
    std::ostringstream os;
    os << "transcription: invalid problem:";
    for (const auto& s : issues) os << ' ' << s << ';';
    throw std::invalid_argument(os.str());
  }
  if (N < 10) throw std::invalid_argument("transcription: N must be at least 10");
  grid_.N = N;
  grid_.tf = spec.total_length;
  grid_.h = spec.total_length / N;
}

double EulerTranscription::kappa0_value() const { return spec_.kappa0.value_or(0.0); }

int EulerTranscription::num_vars() const { return grid_.num_vars(); }

int EulerTranscription::num_eq() const {
  return 4 * grid_.N + 3 + (spec_.kappaf ? 1 : 0);
}

int EulerTranscription::num_ineq() const {
  return 2 * grid_.N + (spec_.bounded() ? 2 * (grid_.N + 1) : 0);
}

void EulerTranscription::bounds(Eigen::VectorXd& lb, Eigen::VectorXd& ub) const {
  lb = Eigen::VectorXd::Constant(num_vars(), -kInf);
  ub = Eigen::VectorXd::Constant(num_vars(), kInf);
  // The initial state is data, not decision: freeze it (a free initial
  // curvature stays a variable).
  auto freeze = [&](int idx, double v) { lb[idx] = ub[idx] = v; };
  freeze(grid_.state_index(0, 0), spec_.x0);
  freeze(grid_.state_index(0, 1), spec_.y0);
  freeze(grid_.state_index(0, 2), spec_.theta0);
  if (spec_.kappa0) freeze(grid_.state_index(0, 3), *spec_.kappa0);
  lb[grid_.b_index()] = 0.0;
}

double EulerTranscription::objective(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const {
  grad.setZero(num_vars());
  grad[grid_.b_index()] = 1.0;
  return z[grid_.b_index()];
}

void EulerTranscription::constraints(const Eigen::VectorXd& z, Eigen::VectorXd& ceq,
                                     Eigen::VectorXd& cineq) const {
  const int N = grid_.N;
  const double h = grid_.h;
  ceq.resize(num_eq());
  cineq.resize(num_ineq());

  for (int i = 0; i < N; ++i) {
    const int si = grid_.state_index(i, 0);
    const int sn = grid_.state_index(i + 1, 0);
    const double th = z[si + 2], ka = z[si + 3], u = z[grid_.control_index(i)];
    ceq[4 * i + 0] = z[sn + 0] - z[si + 0] - h * std::cos(th);
    ceq[4 * i + 1] = z[sn + 1] - z[si + 1] - h * std::sin(th);
    ceq[4 * i + 2] = z[sn + 2] - z[si + 2] - h * ka;
    ceq[4 * i + 3] = z[sn + 3] - z[si + 3] - h * u;
  }
  const int sN = grid_.state_index(N, 0);
  int row = 4 * N;
  ceq[row++] = z[sN + 0] - spec_.xf;
  ceq[row++] = z[sN + 1] - spec_.yf;
  ceq[row++] = z[sN + 2] - spec_.thetaf;
  if (spec_.kappaf) ceq[row++] = z[sN + 3] - *spec_.kappaf;

  const double b = z[grid_.b_index()];
  for (int i = 0; i < N; ++i) {
    const double u = z[grid_.control_index(i)];
    cineq[2 * i + 0] = u - b;
    cineq[2 * i + 1] = -u - b;
  }
  if (spec_.bounded()) {
    const double a = *spec_.curvature_bound;
    const int base = 2 * N;
    for (int i = 0; i <= N; ++i) {
      const double ka = z[grid_.state_index(i, 3)];
      cineq[base + 2 * i + 0] = ka - a;
      cineq[base + 2 * i + 1] = -ka - a;
    }
  }
}

void EulerTranscription::add_constraint_gradients(const Eigen::VectorXd& z,
                                                  const Eigen::VectorXd& yeq,
                                                  const Eigen::VectorXd& yineq,
                                                  Eigen::VectorXd& out) const {
  const int N = grid_.N;
  const double h = grid_.h;

  for (int i = 0; i < N; ++i) {
    const int si = grid_.state_index(i, 0);
    const int sn = grid_.state_index(i + 1, 0);
    const double th = z[si + 2];
    const double y0 = yeq[4 * i + 0], y1 = yeq[4 * i + 1];
    const double y2 = yeq[4 * i + 2], y3 = yeq[4 * i + 3];
    out[sn + 0] += y0;
    out[sn + 1] += y1;
    out[sn + 2] += y2;
    out[sn + 3] += y3;
    out[si + 0] -= y0;
    out[si + 1] -= y1;
    // d(-h f)/d theta and /d kappa transpose contributions.
    out[si + 2] += -y2 - h * (-std::sin(th) * y0 + std::cos(th) * y1);
    out[si + 3] += -y3 - h * y2;
    out[grid_.control_index(i)] += -h * y3;
  }
  const int sN = grid_.state_index(N, 0);
  int row = 4 * N;
  out[sN + 0] += yeq[row++];
  out[sN + 1] += yeq[row++];
  out[sN + 2] += yeq[row++];
  if (spec_.kappaf) out[sN + 3] += yeq[row++];

  for (int i = 0; i < N; ++i) {
    const double yp = yineq[2 * i + 0], ym = yineq[2 * i + 1];
    out[grid_.control_index(i)] += yp - ym;
    out[grid_.b_index()] += -yp - ym;
  }
  if (spec_.bounded()) {
    const int base = 2 * N;
    for (int i = 0; i <= N; ++i) {
      out[grid_.state_index(i, 3)] += yineq[base + 2 * i] - yineq[base + 2 * i + 1];
    }
  }
}

Trajectory EulerTranscription::extract_trajectory(const Eigen::VectorXd& z) const {
  const int N = grid_.N;
  Trajectory traj;
  traj.b = z[grid_.b_index()];
  traj.t.resize(N + 1);
  traj.s.resize(N + 1);
  traj.u.resize(N + 1);
  for (int i = 0; i <= N; ++i) {
    traj.t[i] = i * grid_.h;
    const int si = grid_.state_index(i, 0);
    traj.s[i] = {z[si], z[si + 1], z[si + 2], z[si + 3]};
    traj.u[i] = z[grid_.control_index(std::min(i, N - 1))];
  }
  return traj;
}

DiscreteAdjoints EulerTranscription::extract_adjoints(const AugLagResult& r) const {
  const int N = grid_.N;
  DiscreteAdjoints adj;
  adj.lambda.resize(4, N);
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < 4; ++c) adj.lambda(c, i) = -r.lambda_eq[4 * i + c];
  adj.mu1 = Eigen::VectorXd::Zero(N + 1);
  adj.mu2 = Eigen::VectorXd::Zero(N + 1);
  if (spec_.bounded()) {
    const int base = 2 * N;
    for (int i = 0; i <= N; ++i) {
      adj.mu1[i] = r.mu_ineq[base + 2 * i] / grid_.h;
      adj.mu2[i] = r.mu_ineq[base + 2 * i + 1] / grid_.h;
    }
  }
  return adj;
}

std::vector<Eigen::VectorXd> make_starts(const EulerTranscription& p, int count,
                                         std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("make_starts: count must be positive");
  const auto& spec = p.spec();
  const auto& grid = p.grid();
  const int N = grid.N;

  Eigen::VectorXd base = Eigen::VectorXd::Zero(p.num_vars());
  const double k0 = spec.kappa0.value_or(0.0);
  const double kf = spec.kappaf.value_or(k0);
  for (int i = 0; i <= N; ++i) {
    const double w = static_cast<double>(i) / N;
    base[grid.state_index(i, 0)] = (1 - w) * spec.x0 + w * spec.xf;
    base[grid.state_index(i, 1)] = (1 - w) * spec.y0 + w * spec.yf;
    base[grid.state_index(i, 2)] = (1 - w) * spec.theta0 + w * spec.thetaf;
    base[grid.state_index(i, 3)] = (1 - w) * k0 + w * kf;
  }
  base[grid.b_index()] = 1.0;

  std::vector<Eigen::VectorXd> starts;
  starts.reserve(count);
  starts.push_back(base);
  for (int j = 1; j < count; ++j) {
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(j)));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::VectorXd z = base;
    const double amp = 2.0 * j;  // explore wider with every start
    for (int i = 0; i < N; ++i) z[grid.control_index(i)] += amp * unif(rng);
    starts.push_back(std::move(z));
  }
  return starts;
}

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SPIRALIS_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

std::vector<DirectSolution> solve_ph(const ProblemSpec& spec, int N,
                                     const DirectOptions& opts) {
  EulerTranscription p(spec, N);
  const auto starts = make_starts(p, opts.starts, opts.seed);
  const int threads = std::min<int>(resolve_threads(opts.threads),
                                    static_cast<int>(starts.size()));

  std::vector<AugLagResult> results(starts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= starts.size()) return;
      try {
        results[j] = solve_auglag(p, starts[j], opts.auglag);
      } catch (const std::exception&) {
        results[j].status = SolveStatus::FAILED;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<DirectSolution> sols;
  for (std::size_t j = 0; j < results.size(); ++j) {
    if (results[j].status != SolveStatus::OK) continue;
    DirectSolution d;
    d.traj = p.extract_trajectory(results[j].z);
    d.adjoints = p.extract_adjoints(results[j]);
    d.b = d.traj.b;
    d.nlp = std::move(results[j]);
    d.start_index = static_cast<int>(j);
    sols.push_back(std::move(d));
  }
  if (sols.empty()) throw std::runtime_error("solve_ph: no start converged");

  std::sort(sols.begin(), sols.end(),
            [](const DirectSolution& a, const DirectSolution& b) { return a.b < b.b; });
  std::vector<DirectSolution> unique;
  for (auto& s : sols) {
    const bool dup = !unique.empty() &&
                     std::abs(s.b - unique.back().b) <=
                         opts.dedupe_rel * std::max(1.0, std::abs(unique.back().b));
    if (!dup) unique.push_back(std::move(s));
  }
  return unique;
}

}  // namespace spiralis
