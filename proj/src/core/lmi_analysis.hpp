#pragma once

// Linear-NCS certificate search: growth bound L_k, the block LMI in P,
// bisection on gamma_k, and the uniform sweep over the relaxation parameter k.

#include <Eigen/Dense>
#include <vector>

#include "bound_core.hpp"
#include "sdp_solver.hpp"

namespace mati {

/// f(x, e) = A x + E e,  g(x, e) = C x + F e.
struct LinearNcs {
  Eigen::MatrixXd A;
  Eigen::MatrixXd E;
  Eigen::MatrixXd C;
  Eigen::MatrixXd F;

  int nx() const { return static_cast<int>(A.rows()); }
  int ne() const { return static_cast<int>(F.rows()); }

  /// Dimension consistency and finite entries.
  void validate() const;

  /// Plant x' = A_P x + B_P u with emulated state feedback u = -K x_hat and
  /// e = x_hat - x: A = A_P - B_P K, E = -B_P K, C = -A, F = -E.
  static LinearNcs from_plant(const Eigen::MatrixXd& a_p,
                              const Eigen::MatrixXd& b_p,
                              const Eigen::MatrixXd& k);
};

enum class ProtocolKind { TOD, RR, SampledData, Custom };

const char* to_string(ProtocolKind kind);

struct ProtocolModel {
  double lambda = 0.0;
  double m_w = 1.0;       // bound on ||dW/de||
  double alpha_lo = 1.0;  // W >= alpha_lo ||e||
  double alpha_hi = 1.0;  // W <= alpha_hi ||e||
  int l = 1;
  ProtocolKind kind = ProtocolKind::Custom;

  void validate() const;

  /// lambda = sqrt((l-1)/l), M_w = alpha = 1 for W = ||e||.
  static ProtocolModel tod(int l);
  /// M_w = sqrt(l) with the literature's lambda = sqrt((l-1)/l); these hold
  /// for the time-varying W used for RR, not for W = ||e||.
  static ProtocolModel round_robin(int l);
  static ProtocolModel sampled_data();
};

double spectral_norm(const Eigen::MatrixXd& m);

/// L_k = M_w / alpha_lo * (1 - k) * ||F||, k in [0, 1).
double l_of_k(const LinearNcs& sys, const ProtocolModel& proto, double k);

/// Symmetric (n_x + n_e) block matrix whose negative semidefiniteness
/// certifies the dissipation inequality for V = x' P x:
///   [A'P + PA + d^2 I + Mw^2 C'C,  k Mw^2 C'F + PE                     ]
///   [ (.)',                        -a^2 (g^2 - d^2) I + Mw^2 k^2 F'F  ]
SymMatrix build_lmi(const LinearNcs& sys, const ProtocolModel& proto, double k,
                    double delta, double gamma, const SymMatrix& p);

struct MinGammaOptions {
  double gamma_tol = 1e-5;
  /// Multiplies the default slack margin 1e-8 * scale.
  double slack_factor = 1.0;
};

struct MinGammaResult {
  double gamma = 0.0;
  SymMatrix witness;
  double t_star = 0.0;
  double p_min = 0.0;
  double slack_margin = 0.0;
  /// True when the lower cap gamma = delta was already feasible.
  bool at_lower_cap = false;
};

/// The LMI feasibility problem in P at fixed (k, delta, gamma).
LmiFeasibilityProblem lmi_problem(const LinearNcs& sys,
                                  const ProtocolModel& proto, double k,
                                  double delta, double gamma,
                                  double slack_factor = 1.0);

/// Smallest gamma >= delta (to gamma_tol) for which the LMI is feasible.
/// Throws Error(NoCertificate) if infeasible at the upper cap.
MinGammaResult min_gamma(const LinearNcs& sys, const ProtocolModel& proto,
                         double k, double delta,
                         const MinGammaOptions& opts = {});

struct SweepRow {
  double k = 0.0;
  double l_k = 0.0;
  double gamma_k = 0.0;
  double tau_k = 0.0;
  SymMatrix p_witness;
  double t_star = 0.0;
  double p_min = 0.0;
  double slack_margin = 0.0;
  bool certified = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ascending k
  std::size_t best = 0;

  const SweepRow& best_row() const { return rows.at(best); }
};

/// Grid k = i * step for all i with k < 1.
std::vector<double> k_grid(double grid_step);

SweepRow evaluate_k(const LinearNcs& sys, const ProtocolModel& proto, double k,
                    double delta, const MinGammaOptions& opts = {});

/// Evaluates every grid point (concurrently when more than one thread is
/// configured) and returns rows in ascending k; the best row maximizes tau_k
/// with ties going to the smaller k. Throws Error(NoCertificate) when no grid
/// point is certified.
SweepResult sweep_k(const LinearNcs& sys, const ProtocolModel& proto,
                    double delta, double grid_step,
                    const MinGammaOptions& opts = {});

/// The k = 0 row: the un-relaxed growth bound of the baseline approach.
SweepRow baseline_carnevale(const LinearNcs& sys, const ProtocolModel& proto,
                            double delta, const MinGammaOptions& opts = {});

/// Lower guard applied to L before evaluating the bound.
inline constexpr double kMinGrowthRate = 1e-9;

}  // namespace mati
