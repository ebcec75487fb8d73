// mati: command-line front end over libmati.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mati/mati.h"

namespace {

using nlohmann::json;

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kIngestion = 3, kSolver = 4, kVerify = 5 };

int exit_code(mati_status s) {
  switch (s) {
    case MATI_OK: return kOk;
    case MATI_ERR_DOMAIN:
    case MATI_ERR_PRECONDITION:
    case MATI_ERR_INVALID_ARGUMENT: return kUsage;
    case MATI_ERR_INGESTION: return kIngestion;
    case MATI_ERR_CONVERGENCE:
    case MATI_ERR_SOLVER_STALL:
    case MATI_ERR_NO_CERTIFICATE: return kSolver;
    case MATI_ERR_VERIFICATION: return kVerify;
    case MATI_ERR_INTERNAL: break;
  }
  return kInternal;
}

struct Failure {
  int code;
};

void check(mati_status s, const std::string& context = {}) {
  if (s == MATI_OK) return;
  std::cerr << "error: ";
  if (!context.empty()) std::cerr << context << ": ";
  std::cerr << mati_last_error() << " (" << mati_status_string(s) << ")\n";
  throw Failure{exit_code(s)};
}

std::string fix4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Problem = std::unique_ptr<mati_problem, Deleter<mati_problem, mati_problem_free>>;
using Sweep = std::unique_ptr<mati_sweep, Deleter<mati_sweep, mati_sweep_free>>;
using Cert = std::unique_ptr<mati_certificate, Deleter<mati_certificate, mati_certificate_free>>;
using ScenarioPtr = std::unique_ptr<mati_scenario, Deleter<mati_scenario, mati_scenario_free>>;
using Trace = std::unique_ptr<mati_trace, Deleter<mati_trace, mati_trace_free>>;

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) {
    std::cerr << "error: cannot write " << path << "\n";
    throw Failure{kIngestion};
  }
  return file;
}

// ---- bound ---------------------------------------------------------------

struct BoundArgs {
  double L = 0, gamma = 0, lambda = 0;
  bool oracle = false;
  std::string format = "csv";
};

int cmd_bound(const BoundArgs& a) {
  double value = 0, r = 0;
  mati_regime regime{};
  check(mati_bound(a.L, a.gamma, a.lambda, &value, &regime, &r));
  double transit = NAN;
  if (a.oracle) check(mati_phi_transit(a.L, a.gamma, a.lambda, &transit), "oracle");

  if (a.format == "json") {
    json j = {{"L", a.L}, {"gamma", a.gamma}, {"lambda", a.lambda},
              {"regime", mati_regime_string(regime)}, {"r", r}, {"tau_mati", value}};
    if (a.oracle) {
      j["tau_oracle"] = transit;
      j["oracle_gap"] = std::abs(transit - value);
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
  }
  std::cout << "L,gamma,lambda,regime,tau_mati" << (a.oracle ? ",tau_oracle,gap" : "") << "\n";
  std::cout << fix4(a.L) << ',' << fix4(a.gamma) << ',' << fix4(a.lambda) << ','
            << mati_regime_string(regime) << ',' << fix4(value);
  if (a.oracle) {
    char gap[32];
    std::snprintf(gap, sizeof gap, "%.2e", std::abs(transit - value));
    std::cout << ',' << fix4(transit) << ',' << gap;
  }
  std::cout << "\n";
  return kOk;
}

// ---- phi -----------------------------------------------------------------

struct PhiArgs {
  double L = 0, gamma = 0, lambda = 0;
  int points = 21;
  std::string format = "csv";
  std::string output;
};

int cmd_phi(const PhiArgs& a) {
  double bound = 0, transit = 0;
  check(mati_bound(a.L, a.gamma, a.lambda, &bound, nullptr, nullptr));
  check(mati_phi_transit(a.L, a.gamma, a.lambda, &transit));
  const double phi0 = a.lambda > 0 ? 1.0 / a.lambda : 1e6;
  const auto n = static_cast<size_t>(a.points);
  std::vector<double> tau(n), phi(n);
  check(mati_phi_curve(a.L, a.gamma, phi0, bound, n, tau.data(), phi.data()));

  std::ofstream file;
  std::ostream& os = open_output(a.output, file);
  if (a.format == "json") {
    json j = {{"L", a.L}, {"gamma", a.gamma}, {"lambda", a.lambda},
              {"phi0", phi0}, {"tau_mati", bound}, {"tau_transit", transit},
              {"tau", tau}, {"phi", phi}};
    os << j.dump(2) << "\n";
    return kOk;
  }
  os << "tau,phi\n";
  for (size_t i = 0; i < n; ++i) os << fix4(tau[i]) << ',' << fix4(phi[i]) << "\n";
  std::cerr << "tau_mati " << fix4(bound) << ", transit " << fix4(transit) << "\n";
  return kOk;
}

// ---- linear-sweep ----------------------------------------------------------

struct SweepArgs {
  std::string system;
  std::optional<std::string> deltas;
  double grid_step = 0;
  std::string format = "csv";
  std::string output;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      std::cerr << "error: --delta: not a number: '" << item << "'\n";
      throw Failure{kUsage};
    }
  }
  return out;
}

int cmd_linear_sweep(const SweepArgs& a) {
  mati_problem* raw = nullptr;
  check(mati_problem_load(a.system.c_str(), &raw));
  Problem prob(raw);
  if (a.grid_step > 0) check(mati_problem_set_grid_step(prob.get(), a.grid_step));

  mati_problem_info info{};
  check(mati_problem_get_info(prob.get(), &info));
  std::vector<double> deltas;
  if (a.deltas) {
    deltas = parse_list(*a.deltas);
  } else {
    deltas.resize(info.n_delta);
    check(mati_problem_deltas(prob.get(), deltas.data(), deltas.size()));
  }

  std::ofstream file;
  std::ostream& os = open_output(a.output, file);
  json rows = json::array();
  if (a.format == "csv") os << "delta,tau_baseline,tau_best,k_best,improvement_pct\n";
  for (double delta : deltas) {
    const std::string ctx = "delta=" + fix4(delta);
    mati_sweep_row base{};
    check(mati_baseline(prob.get(), delta, &base), ctx + " baseline");
    mati_sweep* sraw = nullptr;
    check(mati_sweep_run(prob.get(), delta, &sraw), ctx + " sweep");
    Sweep sweep(sraw);
    size_t best_i = 0;
    check(mati_sweep_best(sweep.get(), &best_i), ctx);
    mati_sweep_row best{};
    check(mati_sweep_get_row(sweep.get(), best_i, &best));
    const double improvement = 100.0 * (best.tau_k - base.tau_k) / base.tau_k;

    if (a.format == "csv") {
      os << fix4(delta) << ',' << fix4(base.tau_k) << ',' << fix4(best.tau_k) << ','
         << fix4(best.k) << ',' << fix4(improvement) << "\n";
    } else {
      std::vector<double> p(static_cast<size_t>(info.nx) * info.nx);
      check(mati_sweep_witness(sweep.get(), best_i, p.data(), p.size()));
      rows.push_back({{"delta", delta},
                      {"tau_baseline", base.tau_k},
                      {"gamma_baseline", base.gamma_k},
                      {"L_baseline", base.l_k},
                      {"tau_best", best.tau_k},
                      {"gamma_best", best.gamma_k},
                      {"L_best", best.l_k},
                      {"k_best", best.k},
                      {"improvement_pct", improvement},
                      {"t_star", best.t_star},
                      {"witness_P", p},
                      {"grid_points", mati_sweep_size(sweep.get())}});
    }
  }
  if (a.format == "json")
    os << json{{"protocol", mati_protocol_string(info.protocol)},
               {"lambda", info.lambda},
               {"grid_step", info.grid_step},
               {"rows", rows}}
              .dump(2)
       << "\n";
  return kOk;
}

// ---- verify-cert -----------------------------------------------------------

struct CertArgs {
  std::string cert;
  double half_width = 5.0;
  int grid = 501;
  std::string format = "csv";
};

int cmd_verify_cert(const CertArgs& a) {
  mati_certificate* raw = nullptr;
  check(mati_certificate_load(a.cert.c_str(), &raw));
  Cert cert(raw);
  double c4, c2, k, L, delta, gamma;
  check(mati_certificate_get(cert.get(), &c4, &c2, &k, &L, &delta, &gamma));
  mati_verification rep{};
  check(mati_certificate_verify(cert.get(), a.half_width, a.grid, &rep));
  double tau = NAN;
  if (rep.pass) check(mati_bound(L, gamma, 0.0, &tau, nullptr, nullptr));

  if (a.format == "json") {
    json j = {{"c4", c4}, {"c2", c2}, {"k", k}, {"L", L}, {"delta", delta},
              {"gamma", gamma}, {"half_width", a.half_width}, {"n_grid", a.grid},
              {"min_margin", rep.min_margin}, {"max_abs", rep.max_abs},
              {"tol", rep.tol}, {"radial_growth", rep.radial_growth != 0},
              {"pass", rep.pass != 0},
              {"worst", {{"x", rep.worst_x}, {"e", rep.worst_e},
                         {"d", rep.worst_d}, {"d2", rep.worst_d2}}}};
    j["tau_mati"] = rep.pass ? json(tau) : json(nullptr);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "L,gamma,k,min_margin,tol,radial_growth,verdict,tau_mati\n"
              << fix4(L) << ',' << fix4(gamma) << ',' << fix4(k) << ','
              << rep.min_margin << ',' << rep.tol << ','
              << (rep.radial_growth ? "yes" : "no") << ','
              << (rep.pass ? "pass" : "fail") << ','
              << (rep.pass ? fix4(tau) : std::string("-")) << "\n";
  }
  if (!rep.pass) {
    std::cerr << "certificate fails at x=" << rep.worst_x << ", e=" << rep.worst_e
              << ", (d, d2)=(" << rep.worst_d << ", " << rep.worst_d2
              << "): margin " << rep.min_margin << "\n";
    return kVerify;
  }
  return kOk;
}

// ---- simulate --------------------------------------------------------------

struct SimArgs {
  std::string scenario;
  std::string out_dir = ".";
  std::string trace_name = "trace.csv";
  std::optional<std::uint64_t> seed;
  double decay_ratio = 1e-6;
  std::string format = "csv";
};

const char* verdict_name(mati_verdict v) {
  switch (v) {
    case MATI_VERDICT_STABLE: return "stable";
    case MATI_VERDICT_DIVERGED: return "diverged";
    case MATI_VERDICT_UNDECIDED: break;
  }
  return "undecided";
}

int cmd_simulate(const SimArgs& a) {
  mati_scenario* raw = nullptr;
  check(mati_scenario_load(a.scenario.c_str(), &raw));
  ScenarioPtr sc(raw);
  if (a.seed) check(mati_scenario_set_seed(sc.get(), *a.seed), "--seed");

  mati_trace* traw = nullptr;
  check(mati_simulate(sc.get(), &traw));
  Trace trace(traw);
  check(mati_trace_check_domain(trace.get()));

  std::filesystem::create_directories(a.out_dir);
  const std::string path = (std::filesystem::path(a.out_dir) / a.trace_name).string();
  check(mati_trace_write_csv(trace.get(), path.c_str()));

  mati_trace_summary s{};
  check(mati_trace_summarize(trace.get(), a.decay_ratio, &s));
  std::optional<mati_monitor_report> mon;
  if (mati_scenario_has_monitor(sc.get())) {
    mati_monitor_report m{};
    check(mati_trace_monitor(trace.get(), sc.get(), &m), "monitor");
    mon = m;
  }

  if (a.format == "json") {
    json j = {{"trace", path}, {"verdict", verdict_name(s.verdict)},
              {"initial_norm", s.initial_norm}, {"final_norm", s.final_norm},
              {"min_ratio", s.min_ratio}, {"decay_rate", s.decay_rate},
              {"decay_time", s.decay_time}, {"points", s.n_points},
              {"jumps", s.n_jumps}};
    if (mon)
      j["monitor"] = {{"u0", mon->u0}, {"tolerance", mon->tolerance},
                      {"max_jump_increase", mon->max_jump_increase},
                      {"max_flow_increase", mon->max_flow_increase},
                      {"jump_checks", mon->jump_checks},
                      {"flow_checks", mon->flow_checks},
                      {"violations", mon->violations}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "verdict,decay_rate,min_ratio,jumps" << (mon ? ",monitor_violations" : "") << "\n"
              << verdict_name(s.verdict) << ',' << fix4(s.decay_rate) << ','
              << s.min_ratio << ',' << s.n_jumps;
    if (mon) std::cout << ',' << mon->violations;
    std::cout << "\n";
  }
  return mon && mon->violations > 0 ? kVerify : kOk;
}

// ---- empirical -------------------------------------------------------------

struct EmpArgs {
  std::string scenario;
  std::optional<double> lo, hi;
  double tol = 1e-4;
  std::string format = "csv";
};

int cmd_empirical(const EmpArgs& a) {
  mati_scenario* raw = nullptr;
  check(mati_scenario_load(a.scenario.c_str(), &raw));
  ScenarioPtr sc(raw);
  double lo = 0, hi = 0;
  if (!a.lo || !a.hi) check(mati_scenario_bracket(sc.get(), &lo, &hi), "bracket");
  if (a.lo) lo = *a.lo;
  if (a.hi) hi = *a.hi;
  mati_empirical_result r{};
  check(mati_empirical(sc.get(), lo, hi, a.tol, &r));
  const char* method = r.monodromy ? "monodromy" : "simulation";
  if (a.format == "json") {
    std::cout << json{{"lo", lo}, {"hi", hi}, {"tol", a.tol},
                      {"boundary", r.boundary}, {"found", r.found != 0},
                      {"method", method}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "lo,hi,boundary,found,method\n"
              << fix4(lo) << ',' << fix4(hi) << ',' << fix4(r.boundary) << ','
              << (r.found ? "yes" : "no") << ',' << method << "\n";
  }
  if (!r.found) std::cerr << "no stability boundary in [" << lo << ", " << hi << "]\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MATI bounds for networked control systems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  const std::vector<std::string> formats{"csv", "json"};

  BoundArgs ba;
  auto* bound = app.add_subcommand("bound", "MATI for given L, gamma, lambda");
  bound->add_option("--L", ba.L, "growth rate of W")->required();
  bound->add_option("--gamma", ba.gamma, "L2 gain")->required();
  bound->add_option("--lambda", ba.lambda, "protocol contraction, 0 for sampled-data")->required();
  bound->add_flag("--oracle", ba.oracle, "cross-check against the Riccati clock");
  bound->add_option("--format", ba.format)->check(CLI::IsMember(formats));

  PhiArgs pa;
  auto* phi = app.add_subcommand("phi", "tabulate the Riccati clock over one MATI");
  phi->add_option("--L", pa.L)->required();
  phi->add_option("--gamma", pa.gamma)->required();
  phi->add_option("--lambda", pa.lambda)->required();
  phi->add_option("--points", pa.points)->check(CLI::Range(2, 1000000));
  phi->add_option("--format", pa.format)->check(CLI::IsMember(formats));
  phi->add_option("--output", pa.output, "file, default stdout");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("linear-sweep", "baseline and best MATI per delta");
  sweep->add_option("--system", sa.system, "system JSON")->required();
  sweep->add_option("--delta", sa.deltas, "comma-separated list, overrides the file; \"\" for none");
  sweep->add_option("--grid-step", sa.grid_step, "k grid step");
  sweep->add_option("--format", sa.format)->check(CLI::IsMember(formats));
  sweep->add_option("--output", sa.output, "file, default stdout");

  CertArgs ca;
  auto* cert = app.add_subcommand("verify-cert", "check a polynomial certificate");
  cert->add_option("--cert", ca.cert, "certificate JSON")->required();
  cert->add_option("--half-width", ca.half_width);
  cert->add_option("--grid", ca.grid, "points per axis");
  cert->add_option("--format", ca.format)->check(CLI::IsMember(formats));

  SimArgs ma;
  auto* sim = app.add_subcommand("simulate", "run a hybrid simulation scenario");
  sim->add_option("--scenario", ma.scenario)->required();
  sim->add_option("--out-dir", ma.out_dir);
  sim->add_option("--trace-name", ma.trace_name);
  sim->add_option("--seed", ma.seed, "schedule seed (random schedules only)");
  sim->add_option("--decay-ratio", ma.decay_ratio);
  sim->add_option("--format", ma.format)->check(CLI::IsMember(formats));

  EmpArgs ea;
  auto* emp = app.add_subcommand("empirical", "bisect for the empirical stability boundary");
  emp->add_option("--scenario", ea.scenario)->required();
  emp->add_option("--lo", ea.lo);
  emp->add_option("--hi", ea.hi);
  emp->add_option("--tol", ea.tol);
  emp->add_option("--format", ea.format)->check(CLI::IsMember(formats));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*bound) return cmd_bound(ba);
    if (*phi) return cmd_phi(pa);
    if (*sweep) return cmd_linear_sweep(sa);
    if (*cert) return cmd_verify_cert(ca);
    if (*sim) return cmd_simulate(ma);
    if (*emp) return cmd_empirical(ea);
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
