// Acceptance gate: one PASS/FAIL line per criterion, details indented below.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bound_core.hpp"
#include "hybrid_sim.hpp"
#include "lmi_analysis.hpp"
#include "nonlinear_cert.hpp"

using namespace mati;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

int g_failed = 0;

void report(int id, const char* title, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << "\n";
  for (const auto& n : o.notes) std::cout << "      " << n << "\n";
  std::cout.flush();
  if (!o.pass) ++g_failed;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Run {
  int code;
  std::string out;
  double seconds;
};

Run run_cli(const std::string& args) {
  const auto t0 = Clock::now();
  FILE* pipe = popen((std::string(MATI_CLI) + " " + args).c_str(), "r");
  std::string out;
  if (pipe) {
    std::array<char, 4096> buf;
    while (size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  }
  const int status = pipe ? pclose(pipe) : -1;
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, dt};
}

std::string scenario(const char* name) { return std::string(MATI_SCENARIO_DIR) + "/" + name; }

LinearNcs example2() {
  Eigen::MatrixXd a_p(2, 2), b_p(2, 1), k(1, 2);
  a_p << -4, 1, -2, 3;
  a_p /= 5.0;
  b_p << -1, 2;
  k << -0.2, 0.5;
  return LinearNcs::from_plant(a_p, b_p, k);
}

double sd_closed_form(double L, double gamma) {
  if (gamma > L) {
    const double r = std::sqrt(gamma * gamma / (L * L) - 1.0);
    return std::atan(r) / (L * r);
  }
  if (gamma == L) return 1.0 / L;
  const double r = std::sqrt(1.0 - gamma * gamma / (L * L));
  return std::atanh(r) / (L * r);
}

struct ReferenceRow {
  double delta, baseline, best, k, improvement;
};
const ReferenceRow kReference[] = {{2, 0.044, 0.0536, 0.999, 20},
                            {1, 0.0743, 0.1071, 0.999, 44},
                            {0.5, 0.1071, 0.2141, 0.999, 99},
                            {0.2, 0.1337, 0.2785, 0.916, 108},
                            {0.1, 0.1399, 0.2817, 0.983, 101}};

struct Certified {
  double delta;
  SweepRow baseline;
  SweepResult sweep;
};

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  double taus[2] = {NAN, NAN};
  const char* files[2] = {"example1_cert_a.json", "example1_cert_b.json"};
  const double expect[2] = {0.7909, 0.4762};
  for (int i = 0; i < 2; ++i) {
    const Run r = run_cli("verify-cert --format json --cert " + scenario(files[i]));
    bool ok = r.code == 0;
    if (ok) {
      const json j = json::parse(r.out);
      ok = j.at("pass").get<bool>();
      if (ok) taus[i] = j.at("tau_mati").get<double>();
    }
    o.expect(ok && std::abs(taus[i] - expect[i]) <= 0.001,
             fmt("%s: tau %.5f vs %.4f (+-0.001), exit %d", files[i], taus[i], expect[i], r.code));
    o.expect(r.seconds < 1.0, fmt("%s: runtime %.3f s < 1 s", files[i], r.seconds));
  }
  const double imp = 100.0 * (taus[0] - taus[1]) / taus[1];
  o.expect(imp >= 66.0, fmt("improvement %.2f %% >= 66 %%", imp));
  return o;
}

Outcome criterion2() {
  Outcome o;
  const Run r = run_cli("linear-sweep --format json --system " + scenario("example2_tod.json"));
  o.expect(r.code == 0, fmt("linear-sweep exit %d", r.code));
  if (r.code != 0) return o;
  const json rows = json::parse(r.out).at("rows");
  o.expect(rows.size() == 5, "five delta rows");
  for (std::size_t i = 0; i < rows.size() && i < 5; ++i) {
    const ReferenceRow& t = kReference[i];
    const json& row = rows[i];
    const double base = row.at("tau_baseline"), best = row.at("tau_best"), k = row.at("k_best"),
                 imp = row.at("improvement_pct");
    o.expect(std::abs(base - t.baseline) <= 0.015 * t.baseline,
             fmt("delta %.1f baseline %.5f vs %.4f (+-1.5%%)", t.delta, base, t.baseline));
    o.expect(std::abs(best - t.best) <= 0.015 * t.best,
             fmt("delta %.1f best %.5f vs %.4f (+-1.5%%)", t.delta, best, t.best));
    o.expect(std::abs(k - t.k) <= 0.01, fmt("delta %.1f k %.3f vs %.3f (+-0.01)", t.delta, k, t.k));
    o.expect(std::abs(imp - t.improvement) <= 5.0,
             fmt("delta %.1f improvement %.1f %% vs %.0f %% (+-5 pp)", t.delta, imp, t.improvement));
  }
  o.expect(r.seconds < 300.0, fmt("runtime %.1f s < 300 s", r.seconds));
  return o;
}

Outcome criterion3() {
  Outcome o;
  std::mt19937_64 rng(20210601);
  std::uniform_real_distribution<double> logu(std::log(1e-2), std::log(1e2));
  std::uniform_real_distribution<double> lam(1e-3, 1.0 - 1e-3);
  int bad = 0;
  double worst = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const GainTriple g{std::exp(logu(rng)), std::exp(logu(rng)), lam(rng)};
    const double b = mati_bound(g).value;
    const double err = std::abs(b - phi_transit_time(g)) / (1.0 + b);
    worst = std::max(worst, err);
    if (err > 1e-6) ++bad;
  }
  o.expect(bad == 0, fmt("%d random triples, max |bound - transit|/(1+bound) = %.2e <= 1e-6", n, worst));
  int cont_bad = 0;
  double cont_worst = 0;
  for (int i = 0; i < 200; ++i) {
    const double L = std::exp(logu(rng)), gamma = std::exp(logu(rng));
    const double sd = sd_closed_form(L, gamma);
    const double rel = std::abs(mati_bound({L, gamma, 1e-9}).value - sd) / sd;
    cont_worst = std::max(cont_worst, rel);
    if (rel > 1e-6) ++cont_bad;
  }
  o.expect(cont_bad == 0, fmt("lambda = 1e-9 vs sampled-data form, max rel %.2e <= 1e-6", cont_worst));
  return o;
}

Outcome criterion4() {
  Outcome o;
  std::vector<double> ls, gs, lams;
  for (int i = 0; i < 20; ++i) {
    ls.push_back(0.05 * std::pow(400.0, i / 19.0));
    gs.push_back(0.05 * std::pow(400.0, i / 19.0) * 1.0137);
    lams.push_back(0.98 * i / 19.0);
  }
  long checks = 0, violations = 0;
  for (int a = 0; a < 20; ++a)
    for (int b = 0; b < 20; ++b)
      for (int c = 0; c < 20; ++c) {
        const double v = mati_bound({ls[a], gs[b], lams[c]}).value;
        auto cmp = [&](double w) {
          ++checks;
          if (!(w < v)) ++violations;
        };
        if (a + 1 < 20) cmp(mati_bound({ls[a + 1], gs[b], lams[c]}).value);
        if (b + 1 < 20) cmp(mati_bound({ls[a], gs[b + 1], lams[c]}).value);
        if (c + 1 < 20) cmp(mati_bound({ls[a], gs[b], lams[c + 1]}).value);
      }
  o.expect(violations == 0, fmt("20^3 lattice, %ld neighbour comparisons, %ld violations", checks, violations));
  return o;
}

Outcome criterion5(const LinearNcs& sys, const ProtocolModel& tod, const std::vector<Certified>& cert) {
  Outcome o;
  const NcsDynamics dyn = NcsDynamics::linear(sys);
  const std::vector<int> nodes{1, 1};
  for (const Certified& c : cert) {
    const SweepRow& row = c.sweep.best_row();
    const GainTriple g{std::max(row.l_k, kMinGrowthRate), row.gamma_k, tod.lambda};
    const double tau = row.tau_k;
    int converged = 0;
    long violations = 0;
    double slowest = 0.0;
    for (int i = 0; i < 100; ++i) {
      const std::uint64_t seed = Rng::derive(20210601, static_cast<std::uint64_t>(1000 * c.delta) * 1000 + i);
      Rng rng(seed);
      Eigen::VectorXd z(4);
      for (int k = 0; k < 4; ++k) z(k) = rng.normal();
      z.normalize();
      SimulationOptions opts;
      opts.step = std::min(tau / 20.0, 0.005);
      const HybridTrace tr = simulate(dyn, ProtocolKind::TOD, nodes,
                                      Schedule::uniform_random(1e-3 * tau, tau, seed, 200.0),
                                      z.head(2), z.tail(2), opts);
      const TraceSummary s = summarize(tr, 1e-6);
      if (s.decay_time >= 0.0 && s.decay_rate < 0.0) ++converged;
      slowest = std::max(slowest, s.decay_time);
      violations += monitor_lyapunov(tr, QuadraticLyapunov{row.p_witness}, g, 1e-6).violations;
    }
    o.expect(converged == 100 && violations == 0,
             fmt("delta %.1f tau_max %.5f: %d/100 reach 1e-6 (slowest t=%.1f), %ld monitor violations",
                 c.delta, tau, converged, slowest, violations));
  }
  return o;
}

Outcome criterion6(const LinearNcs& sys, const std::vector<Certified>& cert) {
  Outcome o;
  const std::vector<int> nodes{1, 1};
  double largest = 0.0;
  for (const Certified& c : cert)
    largest = std::max({largest, c.sweep.best_row().tau_k, c.baseline.tau_k});

  const NcsDynamics dyn = NcsDynamics::linear(sys);
  const EmpiricalResult rr = empirical_mati(dyn, ProtocolKind::RR, nodes, largest, 5.0);
  o.expect(rr.found && rr.boundary > largest,
           fmt("RR monodromy boundary %.4f > largest certified %.5f", rr.boundary, largest));
  const EmpiricalResult tod = empirical_mati(dyn, ProtocolKind::TOD, nodes, largest, 5.0);
  o.expect(tod.found && tod.boundary > largest,
           fmt("TOD simulation boundary %.4f > largest certified %.5f", tod.boundary, largest));
  for (double d : {-1.0, 0.0, 1.0}) {
    const std::vector<int> one{1};
    const EmpiricalResult ex1 =
        empirical_mati(NcsDynamics::example1(d), ProtocolKind::SampledData, one, 0.7909, 5.0);
    o.expect(ex1.found && ex1.boundary > 0.7909,
             fmt("example 1 (d=%+.0f) boundary %.4f > 0.7909", d, ex1.boundary));
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  const PolyCertificate a = PolyCertificate::from_L(0.3578, 1.431, 0.738, 0.1, 1.544);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5, 5), ud(-1, 1);
  long bad = 0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u(rng), e = u(rng), d = ud(rng);
    const double v = eval_poly_lhs(a, x, e, d, d * d);
    double m = INFINITY;
    for (const auto& c : {std::pair{1.0, 0.0}, {1.0, 1.0}, {-1.0, 0.0}, {-1.0, 1.0}})
      m = std::min(m, eval_poly_lhs(a, x, e, c.first, c.second));
    if (m > v + 1e-9 * (1.0 + std::abs(v))) ++bad;
  }
  o.expect(bad == 0, fmt("1e5 random (x, e, d): %ld corner minima above the pointwise value", bad));
  PolyCertificate low = a;
  low.gamma = 1.0;
  const VerificationReport r = verify_certificate(low);
  const bool located =
      eval_poly_lhs(low, r.worst_x, r.worst_e, r.worst_d, r.worst_d2) < -r.tol;
  o.expect(!r.pass && located,
           fmt("gamma = 1.0 fails at x=%.3f e=%.3f (d,d2)=(%.0f,%.0f), margin %.4g", r.worst_x,
               r.worst_e, r.worst_d, r.worst_d2, r.min_margin));
  return o;
}

Outcome criterion8(const LinearNcs& sys, const ProtocolModel& tod, const std::vector<Certified>& cert) {
  Outcome o;
  long audited = 0, bad = 0;
  double worst_margin = -INFINITY;
  for (const Certified& c : cert) {
    auto audit = [&](const SweepRow& row) {
      if (!row.certified) return;
      ++audited;
      const double lm = max_eigenvalue(build_lmi(sys, tod, row.k, c.delta, row.gamma_k, row.p_witness));
      const double pm = min_eigenvalue(row.p_witness);
      worst_margin = std::max(worst_margin, lm / row.slack_margin);
      if (!(lm <= -row.slack_margin / 2) || !(pm >= row.p_min * (1 - 1e-6))) ++bad;
    };
    audit(c.baseline);
    for (const SweepRow& row : c.sweep.rows) audit(row);
  }
  o.expect(audited == 5 * 1001 && bad == 0,
           fmt("%ld witnesses rechecked, %ld failures, worst lambda_max/eps_nsd = %.3f", audited,
               bad, worst_margin));
  return o;
}

}  // namespace

int main() {
  std::cout << "acceptance gate\n";
  report(1, "example 1 certificate bounds", criterion1());
  report(2, "example 2 sweep reproduction", criterion2());
  report(3, "oracle equivalence", criterion3());
  report(4, "monotonicity", criterion4());

  const LinearNcs sys = example2();
  const ProtocolModel tod = ProtocolModel::tod(2);
  std::vector<Certified> cert;
  for (const ReferenceRow& t : kReference)
    cert.push_back({t.delta, baseline_carnevale(sys, tod, t.delta), sweep_k(sys, tod, t.delta, 0.001)});

  report(5, "simulation below certified bounds", criterion5(sys, tod, cert));
  report(6, "conservatism ordering", criterion6(sys, cert));
  report(7, "corner-relaxation soundness", criterion7());
  report(8, "SDP witness audit", criterion8(sys, tod, cert));

  std::cout << (g_failed == 0 ? "all criteria passed" : fmt("%d criteria failed", g_failed)) << "\n";
  return g_failed == 0 ? 0 : 1;
}
