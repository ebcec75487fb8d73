#include "hybrid_sim.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mati {

// ---------------------------------------------------------------- dynamics

NcsDynamics NcsDynamics::linear(LinearNcs sys) {
  sys.validate();
  NcsDynamics d;
  d.model_ = std::move(sys);
  return d;
}

NcsDynamics NcsDynamics::example1(double d) {
  require(d >= -1.0 && d <= 1.0, "Example-1 parameter d must lie in [-1, 1]");
  NcsDynamics dyn;
  dyn.model_ = Example1Dynamics{d};
  return dyn;
}

int NcsDynamics::nx() const {
  if (auto* lin = std::get_if<LinearNcs>(&model_)) return lin->nx();
  return 1;
}

int NcsDynamics::ne() const {
  if (auto* lin = std::get_if<LinearNcs>(&model_)) return lin->ne();
  return 1;
}

void NcsDynamics::flow(const Eigen::VectorXd& x, const Eigen::VectorXd& e,
                       Eigen::VectorXd& dx, Eigen::VectorXd& de) const {
  if (auto* lin = std::get_if<LinearNcs>(&model_)) {
    dx.noalias() = lin->A * x + lin->E * e;
    de.noalias() = lin->C * x + lin->F * e;
    return;
  }
  const double d = std::get<Example1Dynamics>(model_).d;
  const double xs = x(0);
  const double f = -2.0 * xs + d * xs * xs - xs * xs * xs - 2.0 * e(0);
  dx.resize(1);
  de.resize(1);
  dx(0) = f;
  de(0) = -f;
}

// ---------------------------------------------------------------- protocol

namespace {

std::vector<int> block_offsets(std::span<const int> node_dims, int ne) {
  if (node_dims.empty()) fail(ErrorKind::Domain, "empty node partition");
  std::vector<int> offsets;
  int total = 0;
  for (int d : node_dims) {
    require(d > 0, "node block sizes must be positive");
    offsets.push_back(total);
    total += d;
  }
  if (total != ne) {
    std::ostringstream os;
    os << "node partition covers " << total << " error components, expected "
       << ne;
    fail(ErrorKind::Domain, os.str());
  }
  return offsets;
}

}  // namespace

Eigen::VectorXd protocol_jump(ProtocolKind kind, long kappa,
                              const Eigen::VectorXd& e,
                              std::span<const int> node_dims, int* granted) {
  const std::vector<int> offsets =
      block_offsets(node_dims, static_cast<int>(e.size()));
  const int l = static_cast<int>(node_dims.size());
  Eigen::VectorXd out = e;
  int node = -1;
  switch (kind) {
    case ProtocolKind::TOD: {
      double best = -1.0;
      for (int i = 0; i < l; ++i) {
        const double n = e.segment(offsets[i], node_dims[i]).norm();
        if (n > best) {
          best = n;
          node = i;
        }
      }
      break;
    }
    case ProtocolKind::RR:
      require(kappa >= 0, "transmission counter must be non-negative");
      node = static_cast<int>(kappa % l);
      break;
    case ProtocolKind::SampledData:
      out.setZero();
      break;
    case ProtocolKind::Custom:
      fail(ErrorKind::Domain, "custom protocols have no jump map");
  }
  if (node >= 0) out.segment(offsets[node], node_dims[node]).setZero();
  if (granted) *granted = node;
  return out;
}

// ---------------------------------------------------------------- RNG

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t state = seed;
  engine_.seed(splitmix64(state));
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
  return splitmix64(state);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------- schedule

void Schedule::validate() const {
  require(horizon > 0.0, "schedule horizon must be positive");
  if (auto* c = std::get_if<Constant>(&kind)) {
    require(c->T > 0.0, "constant schedule needs T > 0");
  } else {
    const auto& u = std::get<UniformRandom>(kind);
    require(u.eps > 0.0 && u.eps <= u.tau_max,
            "random schedule needs 0 < eps <= tau_max");
  }
}

double Schedule::max_interval() const {
  if (auto* c = std::get_if<Constant>(&kind)) return c->T;
  return std::get<UniformRandom>(kind).tau_max;
}

Schedule Schedule::constant(double T, double horizon) {
  Schedule s;
  s.kind = Constant{T};
  s.horizon = horizon;
  s.validate();
  return s;
}

Schedule Schedule::uniform_random(double eps, double tau_max,
                                  std::uint64_t seed, double horizon) {
  Schedule s;
  s.kind = UniformRandom{eps, tau_max, seed};
  s.horizon = horizon;
  s.validate();
  return s;
}

const char* to_string(TraceEvent event) {
  switch (event) {
    case TraceEvent::Init: return "init";
    case TraceEvent::Flow: return "flow";
    case TraceEvent::Jump: return "jump";
  }
  return "?";
}

// ---------------------------------------------------------------- simulate

namespace {

double state_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& e) {
  return std::sqrt(x.squaredNorm() + e.squaredNorm());
}

class IntervalSource {
 public:
  explicit IntervalSource(const Schedule& s) : sched_(s), rng_(seed_of(s)) {}

  double next() {
    if (auto* c = std::get_if<Schedule::Constant>(&sched_.kind)) return c->T;
    const auto& u = std::get<Schedule::UniformRandom>(sched_.kind);
    return rng_.uniform(u.eps, u.tau_max);
  }

 private:
  static std::uint64_t seed_of(const Schedule& s) {
    if (auto* u = std::get_if<Schedule::UniformRandom>(&s.kind)) return u->seed;
    return 0;
  }
  const Schedule& sched_;
  Rng rng_;
};

}  // namespace

HybridTrace simulate(const NcsDynamics& dyn, ProtocolKind protocol,
                     std::span<const int> node_dims, const Schedule& sched,
                     const Eigen::VectorXd& x0, const Eigen::VectorXd& e0,
                     const SimulationOptions& opts) {
  sched.validate();
  const int nx = dyn.nx();
  const int ne = dyn.ne();
  require(x0.size() == nx, "x0 has the wrong dimension");
  require(e0.size() == ne, "e0 has the wrong dimension");
  block_offsets(node_dims, ne);
  require(protocol != ProtocolKind::Custom,
          "simulation needs a TOD, RR or sampled-data protocol");
  if (!(opts.step > 0.0) || opts.step > sched.max_interval() / 10.0) {
    std::ostringstream os;
    os << "step " << opts.step << " must be in (0, " << sched.max_interval() / 10.0
       << "]";
    fail(ErrorKind::Domain, os.str());
  }

  HybridTrace trace;
  trace.nx = nx;
  trace.ne = ne;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd e = e0;
  double t = 0.0;
  double tau = 0.0;
  long j = 0;
  trace.points.push_back({t, j, x, e, tau, j, TraceEvent::Init});
  const double n0 = state_norm(x, e);

  Eigen::VectorXd k1x(nx), k2x(nx), k3x(nx), k4x(nx);
  Eigen::VectorXd k1e(ne), k2e(ne), k3e(ne), k4e(ne);
  auto rk4 = [&](double h) {
    dyn.flow(x, e, k1x, k1e);
    dyn.flow(x + 0.5 * h * k1x, e + 0.5 * h * k1e, k2x, k2e);
    dyn.flow(x + 0.5 * h * k2x, e + 0.5 * h * k2e, k3x, k3e);
    dyn.flow(x + h * k3x, e + h * k3e, k4x, k4e);
    x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    e += h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
  };

  IntervalSource intervals(sched);
  while (t < sched.horizon) {
    const double interval = intervals.next();
    const double t_start = t;
    const bool jumps = t_start + interval <= sched.horizon;
    const double span = jumps ? interval : sched.horizon - t_start;
    const long n_sub = std::max(1L, static_cast<long>(std::ceil(span / opts.step)));
    const double h = span / static_cast<double>(n_sub);
    const double tau_start = tau;
    for (long s = 1; s <= n_sub; ++s) {
      rk4(h);
      const bool last = s == n_sub;
      t = last ? t_start + span : t_start + static_cast<double>(s) * h;
      tau = last ? tau_start + span : tau_start + static_cast<double>(s) * h;
      const double n = state_norm(x, e);
      const bool blown = !std::isfinite(n) || n > opts.divergence_threshold;
      const bool small = opts.stop_ratio > 0.0 && n <= opts.stop_ratio * n0;
      if (opts.record_flow || last || blown || small)
        trace.points.push_back({t, j, x, e, tau, j, TraceEvent::Flow});
      if (blown) {
        trace.diverged = true;
        return trace;
      }
      if (small) {
        trace.stopped_early = true;
        return trace;
      }
    }
    if (!jumps) break;

    JumpRecord rec{t, j, -1, e, {}};
    e = protocol_jump(protocol, j, e, node_dims, &rec.node);
    rec.e_after = e;
    trace.jumps.push_back(std::move(rec));
    ++j;
    tau = 0.0;
    trace.points.push_back({t, j, x, e, tau, j, TraceEvent::Jump});
  }
  return trace;
}

void check_hybrid_domain(const HybridTrace& trace) {
  auto broken = [](std::size_t i, const char* what) {
    std::ostringstream os;
    os << "trace point " << i << ": " << what;
    fail(ErrorKind::Domain, os.str());
  };
  if (trace.points.empty()) fail(ErrorKind::Domain, "empty trace");
  for (std::size_t i = 0; i < trace.points.size(); ++i) {
    const TracePoint& p = trace.points[i];
    if (p.kappa != p.j) broken(i, "kappa differs from j");
    if (i == 0) continue;
    const TracePoint& q = trace.points[i - 1];
    if (p.t < q.t) broken(i, "t decreased");
    if (p.event == TraceEvent::Jump) {
      if (p.j != q.j + 1) broken(i, "jump did not increment j by one");
      if (p.t != q.t) broken(i, "jump changed t");
      if (p.tau != 0.0) broken(i, "tau not reset at jump");
      if (p.x != q.x) broken(i, "x changed across a jump");
    } else {
      if (p.j != q.j) broken(i, "j changed during flow");
      if (std::abs((p.tau - q.tau) - (p.t - q.t)) > 1e-9 * (1.0 + p.t))
        broken(i, "tau did not advance with t");
    }
  }
  if (static_cast<long>(trace.jumps.size()) != trace.points.back().j)
    fail(ErrorKind::Domain, "jump records do not match the final j");
}

TraceSummary summarize(const HybridTrace& trace, double decay_ratio) {
  TraceSummary s;
  if (trace.points.empty()) fail(ErrorKind::Domain, "empty trace");
  s.initial_norm = state_norm(trace.points.front().x, trace.points.front().e);
  s.final_norm = state_norm(trace.points.back().x, trace.points.back().e);
  s.min_ratio = s.initial_norm > 0.0 ? 1.0 : 0.0;

  double st = 0, sy = 0, stt = 0, sty = 0;
  long count = 0;
  for (const TracePoint& p : trace.points) {
    const double n = state_norm(p.x, p.e);
    if (s.initial_norm > 0.0) {
      const double ratio = n / s.initial_norm;
      s.min_ratio = std::min(s.min_ratio, ratio);
      if (s.decay_time < 0.0 && ratio <= decay_ratio) s.decay_time = p.t;
    }
    if (n > 1e-300 && std::isfinite(n)) {
      const double y = std::log(n);
      st += p.t;
      sy += y;
      stt += p.t * p.t;
      sty += p.t * y;
      ++count;
    }
  }
  const double denom = count * stt - st * st;
  s.decay_rate = (count >= 2 && denom > 0.0)
                     ? (count * sty - st * sy) / denom
                     : std::numeric_limits<double>::quiet_NaN();

  if (s.initial_norm == 0.0 || s.decay_time >= 0.0)
    s.verdict = "stable";
  else if (trace.diverged || s.final_norm > s.initial_norm)
    s.verdict = "diverged";
  else
    s.verdict = "undecided";
  return s;
}

// ---------------------------------------------------------------- monitor

double lyapunov_value(const LyapunovCandidate& v, const Eigen::VectorXd& x) {
  if (auto* q = std::get_if<QuadraticLyapunov>(&v)) {
    require(q->P.dim() == x.size(), "P does not match the state dimension");
    return x.dot(q->P.matrix() * x);
  }
  const auto& c = std::get<QuarticLyapunov>(v);
  require(x.size() == 1, "quartic V needs a scalar state");
  const double x2 = x(0) * x(0);
  return c.c4 * x2 * x2 + c.c2 * x2;
}

MonitorReport monitor_lyapunov(const HybridTrace& trace,
                               const LyapunovCandidate& v, const GainTriple& g,
                               double rel_tol) {
  const double bound = mati_bound(g).value;
  double max_tau = 0.0;
  for (const TracePoint& p : trace.points) max_tau = std::max(max_tau, p.tau);
  if (max_tau > bound * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "trace interval " << max_tau << " exceeds the MATI bound " << bound;
    fail(ErrorKind::Precondition, os.str());
  }

  const double phi0 =
      g.lambda > 0.0 ? 1.0 / g.lambda : kSampledDataPhi0;
  const PhiTrajectory phi =
      phi_flow(g.L, g.gamma, phi0, std::min(max_tau, bound), bound / 1e4);

  auto U = [&](const TracePoint& p) {
    return lyapunov_value(v, p.x) +
           g.gamma * phi.at(p.tau) * p.e.squaredNorm();
  };

  MonitorReport rep;
  if (trace.points.empty()) return rep;
  rep.u0 = U(trace.points.front());
  rep.tolerance = rel_tol * rep.u0;
  double prev = rep.u0;
  for (std::size_t i = 1; i < trace.points.size(); ++i) {
    const double u = U(trace.points[i]);
    const double inc = u - prev;
    if (trace.points[i].event == TraceEvent::Jump) {
      ++rep.jump_checks;
      rep.max_jump_increase = std::max(rep.max_jump_increase, inc);
    } else {
      ++rep.flow_checks;
      rep.max_flow_increase = std::max(rep.max_flow_increase, inc);
    }
    if (inc > rep.tolerance) ++rep.violations;
    prev = u;
  }
  return rep;
}

// ---------------------------------------------------------------- oracles

LambdaSample verify_lambda(ProtocolKind kind, int l, int n_trials,
                           std::uint64_t seed) {
  require(l >= 1, "node count must be >= 1");
  require(n_trials >= 0, "trial count must be >= 0");
  LambdaSample out;
  switch (kind) {
    case ProtocolKind::TOD: out.analytic = std::sqrt((l - 1.0) / l); break;
    case ProtocolKind::SampledData: out.analytic = 0.0; break;
    case ProtocolKind::RR: out.analytic = 1.0; break;
    case ProtocolKind::Custom:
      fail(ErrorKind::Domain, "custom protocols have no jump map");
  }
  const std::vector<int> dims(static_cast<std::size_t>(l), 1);

  std::vector<Eigen::VectorXd> candidates;
  for (int i = 0; i < l; ++i)
    candidates.push_back(Eigen::VectorXd::Unit(l, i));
  candidates.push_back(Eigen::VectorXd::Ones(l));
  Rng rng(seed);
  for (int t = 0; t < n_trials; ++t) {
    Eigen::VectorXd e(l);
    for (int i = 0; i < l; ++i) e(i) = rng.normal();
    candidates.push_back(e);
  }

  out.worst_e = candidates.front();
  const long kappas = kind == ProtocolKind::RR ? l : 1;
  for (const auto& e : candidates) {
    const double n = e.norm();
    if (n == 0.0) continue;
    for (long kappa = 0; kappa < kappas; ++kappa) {
      const double ratio = protocol_jump(kind, kappa, e, dims).norm() / n;
      if (ratio > out.sup) {
        out.sup = ratio;
        out.worst_e = e;
      }
    }
  }
  return out;
}

Eigen::MatrixXd flow_transition(const LinearNcs& sys, double T) {
  sys.validate();
  const int nx = sys.nx();
  const int ne = sys.ne();
  Eigen::MatrixXd abar(nx + ne, nx + ne);
  abar << sys.A, sys.E, sys.C, sys.F;
  return (abar * T).exp();
}

double monodromy_radius_rr(const LinearNcs& sys, double T,
                           std::span<const int> node_dims) {
  require(T > 0.0, "period must be positive");
  const std::vector<int> offsets = block_offsets(node_dims, sys.ne());
  const int n = sys.nx() + sys.ne();
  const Eigen::MatrixXd phi = flow_transition(sys, T);
  Eigen::MatrixXd cycle = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t i = 0; i < node_dims.size(); ++i) {
    cycle = phi * cycle;
    cycle.middleRows(sys.nx() + offsets[i], node_dims[i]).setZero();
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(cycle, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

const char* to_string(StabilityCriterion c) {
  return c == StabilityCriterion::Monodromy ? "monodromy" : "simulation";
}

namespace {

std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> initial_conditions(
    const NcsDynamics& dyn, const EmpiricalOptions& opts) {
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> ics;
  const int nx = dyn.nx();
  const int ne = dyn.ne();
  if (!dyn.is_linear()) {
    for (double x : {-3.0, -2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0, 3.0})
      ics.emplace_back(Eigen::VectorXd::Constant(1, x),
                       Eigen::VectorXd::Zero(1));
    return ics;
  }
  Rng rng(opts.seed);
  for (int i = 0; i < opts.n_initial; ++i) {
    Eigen::VectorXd z(nx + ne);
    for (int k = 0; k < z.size(); ++k) z(k) = rng.normal();
    z.normalize();
    ics.emplace_back(z.head(nx), z.tail(ne));
  }
  return ics;
}

// RK4 step cap for the decay test; keeps the cubic Example-1 flow resolved.
constexpr double kMaxDecayTestStep = 5e-3;

}  // namespace

bool stable_at(const NcsDynamics& dyn, ProtocolKind protocol,
               std::span<const int> node_dims, double T,
               const EmpiricalOptions& opts) {
  if (dyn.is_linear() && protocol == ProtocolKind::RR)
    return monodromy_radius_rr(dyn.linear_system(), T, node_dims) < 1.0;

  const Schedule sched = Schedule::constant(T, opts.horizon);
  SimulationOptions sim;
  sim.step = std::min(T / 10.0, kMaxDecayTestStep);
  sim.stop_ratio = opts.decay_ratio;
  sim.record_flow = false;
  for (const auto& [x0, e0] : initial_conditions(dyn, opts)) {
    const HybridTrace tr = simulate(dyn, protocol, node_dims, sched, x0, e0, sim);
    if (tr.diverged || !tr.stopped_early) return false;
  }
  return true;
}

EmpiricalResult empirical_mati(const NcsDynamics& dyn, ProtocolKind protocol,
                               std::span<const int> node_dims, double lo,
                               double hi, const EmpiricalOptions& opts) {
  require(lo > 0.0 && lo < hi, "bracket needs 0 < lo < hi");
  EmpiricalResult res;
  res.criterion = dyn.is_linear() && protocol == ProtocolKind::RR
                      ? StabilityCriterion::Monodromy
                      : StabilityCriterion::Simulation;
  if (!stable_at(dyn, protocol, node_dims, lo, opts)) {
    std::ostringstream os;
    os << "bracket lower end " << lo << " is not stable";
    fail(ErrorKind::Domain, os.str());
  }
  if (stable_at(dyn, protocol, node_dims, hi, opts)) {
    res.boundary = hi;
    res.found = false;
    return res;
  }
  while (hi - lo > opts.tol) {
    const double mid = 0.5 * (lo + hi);
    if (stable_at(dyn, protocol, node_dims, mid, opts))
      lo = mid;
    else
      hi = mid;
  }
  res.boundary = 0.5 * (lo + hi);
  res.found = true;
  return res;
}

}  // namespace mati
