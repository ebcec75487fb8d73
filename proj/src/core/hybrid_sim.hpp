#pragma once

// Hybrid NCS simulation: RK4 flow of (x, e) between transmissions, protocol
// jumps at transmissions, plus the empirical oracles built on top of it
// (Lyapunov monitoring, lambda sampling, RR monodromy, empirical MATI).

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bound_core.hpp"
#include "lmi_analysis.hpp"

namespace mati {

/// Scalar plant x' = d x^2 - x^3 + u under u = -2 x_hat:
/// f(x, e) = -2x + d x^2 - x^3 - 2e, g = -f.
struct Example1Dynamics {
  double d = 0.0;
};

class NcsDynamics {
 public:
  static NcsDynamics linear(LinearNcs sys);
  static NcsDynamics example1(double d);

  int nx() const;
  int ne() const;
  bool is_linear() const { return std::holds_alternative<LinearNcs>(model_); }
  const LinearNcs& linear_system() const { return std::get<LinearNcs>(model_); }

  void flow(const Eigen::VectorXd& x, const Eigen::VectorXd& e,
            Eigen::VectorXd& dx, Eigen::VectorXd& de) const;

 private:
  std::variant<LinearNcs, Example1Dynamics> model_;
};

/// Zeroes the granted node's block of e. TOD grants the block with the largest
/// Euclidean norm (ties to the lowest index), RR grants node kappa mod l, and
/// sampled-data resets all of e. Writes the granted node (-1 for all) to
/// `granted` when non-null.
Eigen::VectorXd protocol_jump(ProtocolKind kind, long kappa,
                              const Eigen::VectorXd& e,
                              std::span<const int> node_dims,
                              int* granted = nullptr);

/// Portable 64-bit stream: std::mt19937_64 seeded through SplitMix64, with
/// doubles built from the top 53 bits. derive(i) gives an independent stream
/// for the i-th member of a batch.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();  // Box-Muller on uniform()

 private:
  std::mt19937_64 engine_;
};

struct Schedule {
  struct Constant {
    double T;
  };
  struct UniformRandom {
    double eps;
    double tau_max;
    std::uint64_t seed;
  };

  std::variant<Constant, UniformRandom> kind;
  double horizon = 200.0;

  void validate() const;
  /// Largest interval the schedule can produce.
  double max_interval() const;

  static Schedule constant(double T, double horizon = 200.0);
  static Schedule uniform_random(double eps, double tau_max,
                                 std::uint64_t seed, double horizon = 200.0);
};

enum class TraceEvent { Init, Flow, Jump };

const char* to_string(TraceEvent event);

struct TracePoint {
  double t;
  long j;
  Eigen::VectorXd x;
  Eigen::VectorXd e;
  double tau;
  long kappa;
  TraceEvent event;
};

struct JumpRecord {
  double t;
  long j;  // jump index before the jump
  int node;
  Eigen::VectorXd e_before;
  Eigen::VectorXd e_after;
};

struct HybridTrace {
  int nx = 0;
  int ne = 0;
  std::vector<TracePoint> points;
  std::vector<JumpRecord> jumps;
  bool diverged = false;
  /// Simulation stopped early after meeting SimulationOptions::stop_ratio.
  bool stopped_early = false;
};

struct SimulationOptions {
  double step = 0.0;
  double divergence_threshold = 1e12;
  /// When positive, stop once ||(x,e)|| <= stop_ratio * ||(x0,e0)||.
  double stop_ratio = 0.0;
  /// Record every RK4 substep; otherwise only jump instants.
  bool record_flow = true;
};

/// Throws Error(Domain) on inconsistent inputs, including a step larger than
/// a tenth of the largest schedule interval. Each inter-transmission interval
/// is split into ceil(interval / step) equal RK4 substeps so transmission
/// times are hit exactly.
HybridTrace simulate(const NcsDynamics& dyn, ProtocolKind protocol,
                     std::span<const int> node_dims, const Schedule& sched,
                     const Eigen::VectorXd& x0, const Eigen::VectorXd& e0,
                     const SimulationOptions& opts);

/// Asserts the hybrid-time-domain structure; throws Error(Domain) naming the
/// first broken invariant.
void check_hybrid_domain(const HybridTrace& trace);

struct TraceSummary {
  double initial_norm = 0.0;
  double final_norm = 0.0;
  double min_ratio = 0.0;
  /// First time the norm ratio fell to decay_ratio; negative if never.
  double decay_time = -1.0;
  /// Least-squares slope of log ||(x,e)|| against t; NaN for a zero trace.
  double decay_rate = 0.0;
  std::string verdict;  // "stable", "diverged" or "undecided"
};

TraceSummary summarize(const HybridTrace& trace, double decay_ratio = 1e-6);

/// V(x) = x' P x.
struct QuadraticLyapunov {
  SymMatrix P;
};
/// V(x) = c4 x^4 + c2 x^2 on scalar x.
struct QuarticLyapunov {
  double c4;
  double c2;
};
using LyapunovCandidate = std::variant<QuadraticLyapunov, QuarticLyapunov>;

double lyapunov_value(const LyapunovCandidate& v, const Eigen::VectorXd& x);

struct MonitorReport {
  double u0 = 0.0;
  double tolerance = 0.0;
  double max_jump_increase = 0.0;
  double max_flow_increase = 0.0;
  long jump_checks = 0;
  long flow_checks = 0;
  long violations = 0;
};

/// Evaluates U = V(x) + gamma * phi(tau) * ||e||^2 along the trace, with phi
/// restarted from 1/lambda (1e6 when lambda = 0) at every jump, and counts
/// jump or flow increases larger than rel_tol * U(0). Throws
/// Error(Precondition) if any inter-transmission interval exceeds the bound.
MonitorReport monitor_lyapunov(const HybridTrace& trace,
                               const LyapunovCandidate& v, const GainTriple& g,
                               double rel_tol = 1e-6);

struct LambdaSample {
  double sup = 0.0;
  double analytic = 0.0;
  Eigen::VectorXd worst_e;
};

/// Empirical sup of ||h(kappa, e)|| / ||e|| over l scalar nodes, from the
/// axis vectors, the all-ones vector and n_trials random directions.
/// analytic is sqrt((l-1)/l) for TOD, 0 for sampled-data and 1 for RR (W =
/// ||e|| does not contract under RR).
LambdaSample verify_lambda(ProtocolKind kind, int l, int n_trials,
                           std::uint64_t seed);

/// exp([[A, E], [C, F]] T) for the flow over one interval.
Eigen::MatrixXd flow_transition(const LinearNcs& sys, double T);

/// Spectral radius of one RR cycle at constant period T; < 1 iff the loop is
/// exponentially stable under that schedule.
double monodromy_radius_rr(const LinearNcs& sys, double T,
                           std::span<const int> node_dims);

enum class StabilityCriterion { Monodromy, Simulation };

const char* to_string(StabilityCriterion c);

struct EmpiricalOptions {
  double tol = 1e-4;
  double horizon = 200.0;
  double decay_ratio = 1e-6;
  int n_initial = 16;
  std::uint64_t seed = 20210601;
};

struct EmpiricalResult {
  double boundary = 0.0;
  /// False when hi itself was stable ("no boundary in bracket").
  bool found = false;
  StabilityCriterion criterion = StabilityCriterion::Simulation;
};

/// Whether the loop is judged stable at constant period T.
bool stable_at(const NcsDynamics& dyn, ProtocolKind protocol,
               std::span<const int> node_dims, double T,
               const EmpiricalOptions& opts);

/// Bisection on the constant transmission interval in [lo, hi]. Uses the
/// monodromy radius for linear RR and a decay test from a fixed set of
/// initial conditions otherwise. Throws Error(Domain) if lo is not stable.
EmpiricalResult empirical_mati(const NcsDynamics& dyn, ProtocolKind protocol,
                               std::span<const int> node_dims, double lo,
                               double hi, const EmpiricalOptions& opts = {});

}  // namespace mati
