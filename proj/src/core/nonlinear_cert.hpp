#pragma once

// Numerical verification of polynomial dissipation certificates for the
// scalar sampled-data example x' = d x^2 - x^3 - 2 x_hat, |d| <= 1, with
// V(x) = c4 x^4 + c2 x^2, W(e) = |e| and H_k(x, e) = |f(x, e) + (2 - k) e|.

#include "bound_core.hpp"

namespace mati {

struct PolyCertificate {
  double c4 = 0.0;
  double c2 = 0.0;
  double k = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
  double L = 2.0;  // always 2 - k
  double d_bound = 1.0;

  /// Checks k in [0, 2), L == 2 - k, gamma >= delta > 0 and that V is
  /// positive definite.
  void validate() const;

  static PolyCertificate from_k(double c4, double c2, double k, double delta,
                                double gamma);
  /// k is recovered as 2 - L.
  static PolyCertificate from_L(double c4, double c2, double L, double delta,
                                double gamma);
};

/// -V'(x) f - delta^2 (x^2 + e^2) - H_k^2 + gamma^2 e^2 with d and d^2 replaced
/// by the independent symbols d and d2. Equal to the literal dissipation
/// margin when d2 == d * d.
double eval_poly_lhs(const PolyCertificate& cert, double x, double e, double d,
                     double d2);

struct VerificationReport {
  double min_margin = 0.0;
  double max_abs = 0.0;
  double tol = 0.0;
  double half_width = 0.0;
  int n_grid = 0;
  double worst_x = 0.0;
  double worst_e = 0.0;
  double worst_d = 0.0;
  double worst_d2 = 0.0;
  /// Leading weighted-homogeneous part (x^6, x^3 e, e^2) positive definite,
  /// so the margin grows without bound outside the box.
  bool radial_growth = false;
  bool pass = false;
};

/// Evaluates the margin on an n_grid x n_grid grid over the box
/// [-half_width, half_width]^2 at the four corners (d, d2) in
/// {(1,0), (1,1), (-1,0), (-1,1)}; pass iff min >= -1e-6 * max|value|.
VerificationReport verify_certificate(const PolyCertificate& cert,
                                      double half_width = 5.0,
                                      int n_grid = 501);

/// Sampled-data bound with (L = 2 - k, gamma, lambda = 0). Throws
/// Error(Verification) unless the report passed.
MatiBound certificate_to_mati(const PolyCertificate& cert,
                              const VerificationReport& report);

/// L_k |e| + H_k(x, e) - sign(e) g(x, e); non-negative whenever |d| <= 1.
/// Throws Error(Domain) for e == 0.
double check_w_growth(const PolyCertificate& cert, double x, double e,
                      double d);

}  // namespace mati
