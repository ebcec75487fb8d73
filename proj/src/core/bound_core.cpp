#include "bound_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "error.hpp"

namespace mati {
namespace {

// Fraction of the local time scale 1 / (gamma |phi| + 2 L) used as a step cap.
constexpr double kStiffStepFraction = 1e-3;
constexpr double kTransitTolerance = 1e-9;

double rk4_step(double L, double gamma, double phi, double h) {
  const double k1 = phi_rate(L, gamma, phi);
  const double k2 = phi_rate(L, gamma, phi + 0.5 * h * k1);
  const double k3 = phi_rate(L, gamma, phi + 0.5 * h * k2);
  const double k4 = phi_rate(L, gamma, phi + h * k3);
  return phi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double capped_step(double L, double gamma, double phi, double step) {
  return std::min(step,
                  kStiffStepFraction / (gamma * std::abs(phi) + 2.0 * L));
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << name << " must be positive and finite, got " << v;
    fail(ErrorKind::Domain, os.str());
  }
}

}  // namespace

void GainTriple::validate() const {
  require_positive(L, "L");
  require_positive(gamma, "gamma");
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    std::ostringstream os;
    os << "lambda must lie in [0, 1), got " << lambda;
    fail(ErrorKind::Domain, os.str());
  }
}

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::GammaGreater: return "gamma>L";
    case Regime::GammaEqual: return "gamma=L";
    case Regime::GammaLess: return "gamma<L";
  }
  return "?";
}

double compute_r(double L, double gamma) {
  require_positive(L, "L");
  require_positive(gamma, "gamma");
  if (gamma == L) return 0.0;
  const double ratio = gamma / L;
  return std::sqrt(std::abs(ratio * ratio - 1.0));
}

Regime classify(double L, double gamma) {
  if (std::abs(gamma - L) <= 1e-12 * std::max(gamma, L))
    return Regime::GammaEqual;
  return gamma > L ? Regime::GammaGreater : Regime::GammaLess;
}

MatiBound mati_bound(const GainTriple& g) {
  g.validate();
  const double L = g.L;
  const double lam = g.lambda;
  const Regime regime = classify(L, g.gamma);
  if (regime == Regime::GammaEqual)
    return {(1.0 / L) * (1.0 - lam) / (1.0 + lam), regime, 0.0};

  const double r = compute_r(L, g.gamma);
  const double denom =
      2.0 * lam / (1.0 + lam) * (g.gamma / L - 1.0) + 1.0 + lam;
  const double arg = r * (1.0 - lam) / denom;
  const double angle =
      regime == Regime::GammaGreater ? std::atan(arg) : std::atanh(arg);
  return {angle / (L * r), regime, r};
}

double phi_rate(double L, double gamma, double phi) {
  return -2.0 * L * phi - gamma * (phi * phi + 1.0);
}

double PhiTrajectory::at(double tau) const {
  if (samples.empty()) fail(ErrorKind::Domain, "empty phi trajectory");
  if (tau <= samples.front().tau) return samples.front().phi;
  if (tau >= samples.back().tau) return samples.back().phi;
  auto hi = std::upper_bound(
      samples.begin(), samples.end(), tau,
      [](double t, const PhiSample& s) { return t < s.tau; });
  auto lo = hi - 1;
  const double h = hi->tau - lo->tau;
  const double s = (tau - lo->tau) / h;
  const double d0 = phi_rate(L, gamma, lo->phi) * h;
  const double d1 = phi_rate(L, gamma, hi->phi) * h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * lo->phi + (s3 - 2 * s2 + s) * d0 +
         (-2 * s3 + 3 * s2) * hi->phi + (s3 - s2) * d1;
}

PhiTrajectory phi_flow(double L, double gamma, double phi0, double tau_end,
                       double step) {
  require_positive(L, "L");
  require_positive(gamma, "gamma");
  require_positive(step, "step");
  if (!(tau_end >= 0.0)) fail(ErrorKind::Domain, "tau_end must be >= 0");

  PhiTrajectory traj;
  traj.L = L;
  traj.gamma = gamma;
  traj.phi0 = phi0;
  traj.samples.push_back({0.0, phi0});
  double tau = 0.0;
  double phi = phi0;
  while (tau < tau_end) {
    double h = capped_step(L, gamma, phi, step);
    if (tau + h >= tau_end) h = tau_end - tau;
    phi = rk4_step(L, gamma, phi, h);
    // Land exactly on tau_end rather than accumulating rounding.
    tau = (tau + h >= tau_end) ? tau_end : tau + h;
    traj.samples.push_back({tau, phi});
  }
  return traj;
}

double phi_transit_time(const GainTriple& g) {
  g.validate();
  const bool sampled = g.lambda == 0.0;
  const double phi0 = sampled ? kSampledDataPhi0 : 1.0 / g.lambda;
  const double target = sampled ? 0.0 : g.lambda;
  const double step = mati_bound(g).value / 1e4;
  const double horizon = 10.0 / g.L;

  double tau = 0.0;
  double phi = phi0;
  while (tau < horizon) {
    const double h = capped_step(g.L, g.gamma, phi, step);
    const double next = rk4_step(g.L, g.gamma, phi, h);
    if (next <= target) {
      // Bisect the RK4 step length on [0, h].
      double lo = 0.0;
      double hi = h;
      while (hi - lo > kTransitTolerance) {
        const double mid = 0.5 * (lo + hi);
        if (rk4_step(g.L, g.gamma, phi, mid) > target)
          lo = mid;
        else
          hi = mid;
      }
      return tau + 0.5 * (lo + hi);
    }
    phi = next;
    tau += h;
  }
  std::ostringstream os;
  os << "phi did not reach " << target << " within horizon " << horizon;
  fail(ErrorKind::Convergence, os.str());
}

}  // namespace mati
