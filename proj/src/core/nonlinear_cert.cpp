#include "nonlinear_cert.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "error.hpp"

namespace mati {

void PolyCertificate::validate() const {
  require(k >= 0.0 && k < 2.0, "certificate k must lie in [0, 2)");
  require(std::abs(L - (2.0 - k)) <= 1e-12, "certificate requires L = 2 - k");
  require(delta > 0.0, "certificate delta must be positive");
  require(gamma >= delta, "certificate requires gamma >= delta");
  require(c2 >= 0.0 && c4 >= 0.0 && (c2 > 0.0 || c4 > 0.0),
          "V must be positive definite (c2, c4 >= 0, not both zero)");
  require(d_bound == 1.0, "only |d| <= 1 is supported");
}

PolyCertificate PolyCertificate::from_k(double c4, double c2, double k,
                                        double delta, double gamma) {
  PolyCertificate c;
  c.c4 = c4;
  c.c2 = c2;
  c.k = k;
  c.L = 2.0 - k;
  c.delta = delta;
  c.gamma = gamma;
  c.validate();
  return c;
}

PolyCertificate PolyCertificate::from_L(double c4, double c2, double L,
                                        double delta, double gamma) {
  return from_k(c4, c2, 2.0 - L, delta, gamma);
}

double eval_poly_lhs(const PolyCertificate& cert, double x, double e, double d,
                     double d2) {
  const double x2 = x * x;
  const double x3 = x2 * x;
  const double dv = 4.0 * cert.c4 * x3 + 2.0 * cert.c2 * x;
  const double f0 = -2.0 * x - x3 - 2.0 * e;   // f without the d x^2 term
  const double h0 = -2.0 * x - x3 - cert.k * e;  // H_k without the d x^2 term
  const double p1 = -x2 * x2;
  const double p2 = -dv * x2 - 2.0 * h0 * x2;
  const double p3 = -dv * f0 - cert.delta * cert.delta * (x2 + e * e) -
                    h0 * h0 + cert.gamma * cert.gamma * e * e;
  return p1 * d2 + p2 * d + p3;
}

VerificationReport verify_certificate(const PolyCertificate& cert,
                                      double half_width, int n_grid) {
  cert.validate();
  if (!(half_width > 0.0)) fail(ErrorKind::Domain, "box half-width must be positive");
  if (n_grid < 100) fail(ErrorKind::Domain, "need at least 100 grid points per axis");

  static constexpr double kCorners[4][2] = {{1, 0}, {1, 1}, {-1, 0}, {-1, 1}};
  VerificationReport rep;
  rep.half_width = half_width;
  rep.n_grid = n_grid;
  rep.min_margin = std::numeric_limits<double>::infinity();
  const double h = 2.0 * half_width / (n_grid - 1);
  for (int i = 0; i < n_grid; ++i) {
    const double x = -half_width + h * i;
    for (int j = 0; j < n_grid; ++j) {
      const double e = -half_width + h * j;
      for (const auto& c : kCorners) {
        const double v = eval_poly_lhs(cert, x, e, c[0], c[1]);
        rep.max_abs = std::max(rep.max_abs, std::abs(v));
        if (v < rep.min_margin) {
          rep.min_margin = v;
          rep.worst_x = x;
          rep.worst_e = e;
          rep.worst_d = c[0];
          rep.worst_d2 = c[1];
        }
      }
    }
  }
  rep.tol = 1e-6 * rep.max_abs;
  rep.pass = rep.min_margin >= -rep.tol;

  const double a = 4.0 * cert.c4 - 1.0;
  const double b = 4.0 * cert.c4 - cert.k;
  const double c =
      cert.gamma * cert.gamma - cert.k * cert.k - cert.delta * cert.delta;
  rep.radial_growth = a > 0.0 && a * c - b * b > 0.0;
  return rep;
}

MatiBound certificate_to_mati(const PolyCertificate& cert,
                              const VerificationReport& report) {
  cert.validate();
  if (!report.pass) {
    std::ostringstream os;
    os << "certificate failed verification (min margin " << report.min_margin
       << " at x=" << report.worst_x << ", e=" << report.worst_e << ")";
    fail(ErrorKind::Verification, os.str());
  }
  return mati_bound({cert.L, cert.gamma, 0.0});
}

double check_w_growth(const PolyCertificate& cert, double x, double e,
                      double d) {
  if (e == 0.0) fail(ErrorKind::Domain, "W = |e| is not differentiable at e = 0");
  const double f = -2.0 * x + d * x * x - x * x * x - 2.0 * e;
  const double g = -f;
  const double h = std::abs(f + (2.0 - cert.k) * e);
  const double sign = e > 0.0 ? 1.0 : -1.0;
  return cert.L * std::abs(e) + h - sign * g;
}

}  // namespace mati
