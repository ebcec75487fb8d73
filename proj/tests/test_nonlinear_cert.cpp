#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "error.hpp"
#include "nonlinear_cert.hpp"

using namespace mati;

namespace {

const PolyCertificate kCertA = PolyCertificate::from_L(0.3578, 1.431, 0.738, 0.1, 1.544);
const PolyCertificate kCertB = PolyCertificate::from_k(0.5, 2.0, 0.0, 0.1, 2.151);

// Literal margin for parameter d, with the sign-corrected H_k.
double literal_margin(const PolyCertificate& c, double x, double e, double d) {
  const double f = -2 * x + d * x * x - x * x * x - 2 * e;
  const double dv = 4 * c.c4 * x * x * x + 2 * c.c2 * x;
  const double h = f + (2 - c.k) * e;
  return -dv * f - c.delta * c.delta * (x * x + e * e) - h * h + c.gamma * c.gamma * e * e;
}

double corner_min(const PolyCertificate& c, double x, double e) {
  return std::min({eval_poly_lhs(c, x, e, 1, 0), eval_poly_lhs(c, x, e, 1, 1),
                   eval_poly_lhs(c, x, e, -1, 0), eval_poly_lhs(c, x, e, -1, 1)});
}

}  // namespace

TEST_CASE("certificate construction") {
  CHECK(kCertA.k == doctest::Approx(1.262));
  CHECK(kCertA.L == 0.738);
  CHECK_THROWS_AS(PolyCertificate::from_k(0.5, 2.0, 2.0, 0.1, 2.0), Error);
  CHECK_THROWS_AS(PolyCertificate::from_k(0.5, 2.0, 0.0, 0.1, 0.05), Error);
  CHECK_THROWS_AS(PolyCertificate::from_k(0.0, 0.0, 0.0, 0.1, 1.0), Error);
  CHECK_THROWS_AS(PolyCertificate::from_k(-1.0, 1.0, 0.0, 0.1, 1.0), Error);
  PolyCertificate bad = kCertA;
  bad.L = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("eval_poly_lhs") {
  CHECK(eval_poly_lhs(kCertA, 0, 0, 1, 1) == 0.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3), ud(-1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng), e = u(rng), d = ud(rng);
    const double lit = literal_margin(kCertA, x, e, d);
    CHECK(eval_poly_lhs(kCertA, x, e, d, d * d) ==
          doctest::Approx(lit).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("published certificates") {
  const VerificationReport a = verify_certificate(kCertA, 5.0, 501);
  CHECK(a.pass);
  CHECK(a.radial_growth);
  const VerificationReport b = verify_certificate(kCertB, 5.0, 501);
  CHECK(b.pass);
  const double ta = certificate_to_mati(kCertA, a).value;
  const double tb = certificate_to_mati(kCertB, b).value;
  CHECK(std::abs(ta - 0.7909) <= 0.001);
  CHECK(std::abs(tb - 0.4762) <= 0.001);
  CHECK((ta - tb) / tb >= 0.66);
}

TEST_CASE("lowered gamma fails with a located witness") {
  PolyCertificate c = kCertA;
  c.gamma = 1.0;
  const VerificationReport r = verify_certificate(c, 5.0, 501);
  CHECK_FALSE(r.pass);
  CHECK(r.min_margin < -r.tol);
  CHECK(eval_poly_lhs(c, r.worst_x, r.worst_e, r.worst_d, r.worst_d2) == r.min_margin);
  CHECK_THROWS_AS(certificate_to_mati(c, r), Error);
}

TEST_CASE("verify_certificate preconditions") {
  CHECK_THROWS_AS(verify_certificate(kCertA, 0.0, 501), Error);
  CHECK_THROWS_AS(verify_certificate(kCertA, 5.0, 99), Error);
}

TEST_CASE("corner relaxation is a lower bound") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-5, 5), ud(-1, 1);
  long bad = 0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u(rng), e = u(rng), d = ud(rng);
    const double v = eval_poly_lhs(kCertA, x, e, d, d * d);
    if (corner_min(kCertA, x, e) > v + 1e-9 * (1 + std::abs(v))) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("gradient term scales with V") {
  PolyCertificate c1 = kCertB, c2 = kCertB;
  c2.c4 *= 3;
  c2.c2 *= 3;
  const double x = 0.7, e = -0.4, d = 0.3;
  const double f = -2 * x + d * x * x - x * x * x - 2 * e;
  const double diff = eval_poly_lhs(c2, x, e, d, d * d) - eval_poly_lhs(c1, x, e, d, d * d);
  const double dv = 4 * c1.c4 * x * x * x + 2 * c1.c2 * x;
  CHECK(diff == doctest::Approx(-2 * dv * f));
}

TEST_CASE("check_w_growth") {
  const PolyCertificate c = PolyCertificate::from_k(0.5, 2.0, 1.262, 0.1, 2.0);
  CHECK(check_w_growth(c, 1, -1, 1) == doctest::Approx(4 - 2 * 1.262));
  CHECK(check_w_growth(c, 1, -1, 1) == doctest::Approx(1.476));
  CHECK_THROWS_AS(check_w_growth(c, 1, 0, 1), Error);

  // 2x - dx^2 + x^3 = 0 at x = 0: the triangle inequality is tight.
  for (double e : {0.5, -2.0}) CHECK(std::abs(check_w_growth(c, 0.0, e, 1)) < 1e-12);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5, 5), uk(0, 1.999);
  double worst = 0;
  for (int i = 0; i < 1000000; ++i) {
    const PolyCertificate ci = PolyCertificate::from_k(0.5, 2.0, uk(rng), 0.1, 2.0);
    double e = u(rng);
    if (e == 0.0) e = 1.0;
    const double d = static_cast<double>(i % 3) - 1.0;
    worst = std::min(worst, check_w_growth(ci, u(rng), e, d));
  }
  CHECK(worst >= -1e-12);
}
