#pragma once

// Closed-form MATI bound for given (L, gamma, lambda) and the scalar Riccati
// clock phi whose decay time from 1/lambda to lambda reproduces it.

#include <vector>

namespace mati {

/// Growth rate L of W, L2 gain gamma, protocol contraction lambda.
/// lambda = 0 is the sampled-data case.
struct GainTriple {
  double L;
  double gamma;
  double lambda;

  /// Throws Error(Domain) unless L > 0, gamma > 0 and 0 <= lambda < 1.
  void validate() const;
};

enum class Regime { GammaGreater, GammaEqual, GammaLess };

const char* to_string(Regime regime);

struct MatiBound {
  double value;
  Regime regime;
  double r;
};

/// sqrt(|(gamma/L)^2 - 1|); exactly zero when gamma == L.
double compute_r(double L, double gamma);

/// Classification used by mati_bound: GammaEqual within 1e-12 relative.
Regime classify(double L, double gamma);

/// Three-branch arctan / rational / arctanh bound. The returned value is the
/// supremum of admissible intervals; whether the interval itself is admissible
/// (<= versus <) is left to the caller.
MatiBound mati_bound(const GainTriple& g);

struct PhiSample {
  double tau;
  double phi;
};

struct PhiTrajectory {
  std::vector<PhiSample> samples;
  double L = 0.0;
  double gamma = 0.0;
  double phi0 = 0.0;

  /// phi at an arbitrary tau in [0, samples.back().tau], by cubic Hermite
  /// interpolation with slopes taken from the ODE.
  double at(double tau) const;
};

/// Right-hand side -2 L phi - gamma (phi^2 + 1).
double phi_rate(double L, double gamma, double phi);

/// RK4 integration of the Riccati clock from phi(0) = phi0 over [0, tau_end].
/// `step` is an upper bound; the step is shortened where gamma*|phi| is large
/// so that huge initial values (the lambda -> 0 surrogate) stay stable.
PhiTrajectory phi_flow(double L, double gamma, double phi0, double tau_end,
                       double step);

/// Surrogate for phi(0) = 1/lambda when lambda = 0.
inline constexpr double kSampledDataPhi0 = 1e6;

/// Time for phi to fall from 1/lambda to lambda (or from the surrogate 1e6 to
/// 0 when lambda = 0). Throws Error(Convergence) if the target is not reached
/// within 10 / L.
double phi_transit_time(const GainTriple& g);

}  // namespace mati
