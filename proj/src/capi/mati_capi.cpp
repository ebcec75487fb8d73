#include "mati/mati.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <string>

#include "bound_core.hpp"
#include "error.hpp"
#include "hybrid_sim.hpp"
#include "io.hpp"
#include "lmi_analysis.hpp"
#include "nonlinear_cert.hpp"

struct mati_problem {
  mati::LinearProblemSpec spec;
};

struct mati_sweep {
  mati::SweepResult result;
  int nx = 0;
};

struct mati_certificate {
  mati::PolyCertificate cert;
};

struct mati_scenario {
  mati::Scenario sc;
};

struct mati_trace {
  mati::HybridTrace trace;
};

namespace {

thread_local std::string g_last_error;

mati_status status_of(mati::ErrorKind kind) {
  switch (kind) {
    case mati::ErrorKind::Domain: return MATI_ERR_DOMAIN;
    case mati::ErrorKind::Convergence: return MATI_ERR_CONVERGENCE;
    case mati::ErrorKind::SolverStall: return MATI_ERR_SOLVER_STALL;
    case mati::ErrorKind::NoCertificate: return MATI_ERR_NO_CERTIFICATE;
    case mati::ErrorKind::Ingestion: return MATI_ERR_INGESTION;
    case mati::ErrorKind::Verification: return MATI_ERR_VERIFICATION;
    case mati::ErrorKind::Precondition: return MATI_ERR_PRECONDITION;
  }
  return MATI_ERR_INTERNAL;
}

template <class Fn>
mati_status guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return MATI_OK;
  } catch (const mati::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return MATI_ERR_INTERNAL;
}

mati_status invalid(const char* what) {
  g_last_error = what;
  return MATI_ERR_INVALID_ARGUMENT;
}

mati::ProtocolKind to_kind(mati_protocol p) {
  switch (p) {
    case MATI_PROTOCOL_TOD: return mati::ProtocolKind::TOD;
    case MATI_PROTOCOL_RR: return mati::ProtocolKind::RR;
    case MATI_PROTOCOL_SAMPLED_DATA: return mati::ProtocolKind::SampledData;
    case MATI_PROTOCOL_CUSTOM: return mati::ProtocolKind::Custom;
  }
  mati::fail(mati::ErrorKind::Domain, "unknown protocol");
}

mati_protocol from_kind(mati::ProtocolKind k) {
  switch (k) {
    case mati::ProtocolKind::TOD: return MATI_PROTOCOL_TOD;
    case mati::ProtocolKind::RR: return MATI_PROTOCOL_RR;
    case mati::ProtocolKind::SampledData: return MATI_PROTOCOL_SAMPLED_DATA;
    case mati::ProtocolKind::Custom: break;
  }
  return MATI_PROTOCOL_CUSTOM;
}

Eigen::MatrixXd rowmajor(const double* data, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = data[i * cols + j];
  return m;
}

void fill_row(const mati::SweepRow& r, mati_sweep_row* out) {
  out->k = r.k;
  out->l_k = r.l_k;
  out->gamma_k = r.gamma_k;
  out->tau_k = r.tau_k;
  out->t_star = r.t_star;
  out->p_min = r.p_min;
  out->slack_margin = r.slack_margin;
  out->certified = r.certified ? 1 : 0;
}

}  // namespace

extern "C" {

const char* mati_last_error(void) { return g_last_error.c_str(); }

const char* mati_status_string(mati_status status) {
  switch (status) {
    case MATI_OK: return "ok";
    case MATI_ERR_DOMAIN: return "domain error";
    case MATI_ERR_CONVERGENCE: return "convergence failure";
    case MATI_ERR_SOLVER_STALL: return "solver stall";
    case MATI_ERR_NO_CERTIFICATE: return "no certificate";
    case MATI_ERR_INGESTION: return "ingestion error";
    case MATI_ERR_VERIFICATION: return "verification failed";
    case MATI_ERR_PRECONDITION: return "precondition violated";
    case MATI_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MATI_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mati_regime_string(mati_regime regime) {
  switch (regime) {
    case MATI_GAMMA_GREATER: return mati::to_string(mati::Regime::GammaGreater);
    case MATI_GAMMA_EQUAL: return mati::to_string(mati::Regime::GammaEqual);
    case MATI_GAMMA_LESS: return mati::to_string(mati::Regime::GammaLess);
  }
  return "unknown";
}

const char* mati_protocol_string(mati_protocol protocol) {
  switch (protocol) {
    case MATI_PROTOCOL_TOD:
    case MATI_PROTOCOL_RR:
    case MATI_PROTOCOL_SAMPLED_DATA:
    case MATI_PROTOCOL_CUSTOM: return mati::to_string(to_kind(protocol));
  }
  return "unknown";
}

mati_status mati_bound(double L, double gamma, double lambda, double* value,
                       mati_regime* regime, double* r) {
  return guard([&] {
    const mati::MatiBound b = mati::mati_bound({L, gamma, lambda});
    if (value) *value = b.value;
    if (regime) *regime = static_cast<mati_regime>(b.regime);
    if (r) *r = b.r;
  });
}

mati_status mati_phi_transit(double L, double gamma, double lambda,
                             double* tau) {
  if (!tau) return invalid("tau is null");
  return guard([&] { *tau = mati::phi_transit_time({L, gamma, lambda}); });
}

mati_status mati_phi_curve(double L, double gamma, double phi0,
                           double tau_end, size_t n, double* tau_out,
                           double* phi_out) {
  if (!tau_out || !phi_out) return invalid("output arrays are null");
  if (n < 2) return invalid("need at least two samples");
  return guard([&] {
    mati::require(L > 0.0 && gamma > 0.0, "phi needs L > 0 and gamma > 0");
    mati::require(tau_end > 0.0, "tau_end must be positive");
    const double h = tau_end / static_cast<double>(n - 1);
    const mati::PhiTrajectory tr =
        mati::phi_flow(L, gamma, phi0, tau_end, std::min(h, tau_end / 1e4));
    for (size_t i = 0; i < n; ++i) {
      const double tau = i + 1 == n ? tau_end : h * static_cast<double>(i);
      tau_out[i] = tau;
      phi_out[i] = tr.at(tau);
    }
  });
}

mati_status mati_problem_load(const char* path, mati_problem** out) {
  if (!path || !out) return invalid("null argument");
  *out = nullptr;
  return guard([&] {
    *out = new mati_problem{mati::load_linear_problem(path)};
  });
}

mati_status mati_problem_create(int nx, int ne, const double* A,
                                const double* E, const double* C,
                                const double* F, mati_protocol protocol, int l,
                                const int* node_dims, mati_problem** out) {
  if (!A || !E || !C || !F || !out) return invalid("null argument");
  if (nx <= 0 || ne <= 0) return invalid("dimensions must be positive");
  *out = nullptr;
  return guard([&] {
    mati::LinearProblemSpec spec;
    spec.sys.A = rowmajor(A, nx, nx);
    spec.sys.E = rowmajor(E, nx, ne);
    spec.sys.C = rowmajor(C, ne, nx);
    spec.sys.F = rowmajor(F, ne, ne);
    spec.sys.validate();
    switch (protocol) {
      case MATI_PROTOCOL_TOD: spec.proto = mati::ProtocolModel::tod(l); break;
      case MATI_PROTOCOL_RR: spec.proto = mati::ProtocolModel::round_robin(l); break;
      case MATI_PROTOCOL_SAMPLED_DATA:
        spec.proto = mati::ProtocolModel::sampled_data();
        break;
      default:
        mati::fail(mati::ErrorKind::Domain,
                   "custom protocols must be loaded from a file");
    }
    if (node_dims) {
      spec.node_dims.assign(node_dims, node_dims + spec.proto.l);
      int total = 0;
      for (int d : spec.node_dims) total += d;
      mati::require(total == ne, "node_dims do not sum to ne");
    } else if (spec.proto.l == ne) {
      spec.node_dims.assign(static_cast<size_t>(ne), 1);
    } else if (spec.proto.l == 1) {
      spec.node_dims = {ne};
    } else {
      mati::fail(mati::ErrorKind::Domain, "node_dims required");
    }
    *out = new mati_problem{std::move(spec)};
  });
}

void mati_problem_free(mati_problem* p) { delete p; }

mati_status mati_problem_get_info(const mati_problem* p,
                                  mati_problem_info* info) {
  if (!p || !info) return invalid("null argument");
  const auto& s = p->spec;
  info->nx = s.sys.nx();
  info->ne = s.sys.ne();
  info->protocol = from_kind(s.proto.kind);
  info->l = s.proto.l;
  info->lambda = s.proto.lambda;
  info->m_w = s.proto.m_w;
  info->alpha_lo = s.proto.alpha_lo;
  info->alpha_hi = s.proto.alpha_hi;
  info->grid_step = s.grid_step;
  info->n_delta = s.deltas.size();
  return MATI_OK;
}

mati_status mati_problem_deltas(const mati_problem* p, double* out,
                                size_t cap) {
  if (!p || (!out && cap > 0)) return invalid("null argument");
  const auto& d = p->spec.deltas;
  for (size_t i = 0; i < d.size() && i < cap; ++i) out[i] = d[i];
  return MATI_OK;
}

mati_status mati_problem_set_grid_step(mati_problem* p, double step) {
  if (!p) return invalid("null argument");
  return guard([&] {
    mati::k_grid(step);
    p->spec.grid_step = step;
  });
}

mati_status mati_sweep_run(const mati_problem* p, double delta,
                           mati_sweep** out) {
  if (!p || !out) return invalid("null argument");
  *out = nullptr;
  return guard([&] {
    auto s = new mati_sweep;
    try {
      s->result = mati::sweep_k(p->spec.sys, p->spec.proto, delta,
                                p->spec.grid_step);
    } catch (...) {
      delete s;
      throw;
    }
    s->nx = p->spec.sys.nx();
    *out = s;
  });
}

void mati_sweep_free(mati_sweep* s) { delete s; }

size_t mati_sweep_size(const mati_sweep* s) {
  return s ? s->result.rows.size() : 0;
}

mati_status mati_sweep_get_row(const mati_sweep* s, size_t i,
                               mati_sweep_row* row) {
  if (!s || !row) return invalid("null argument");
  if (i >= s->result.rows.size()) return invalid("row index out of range");
  fill_row(s->result.rows[i], row);
  return MATI_OK;
}

mati_status mati_sweep_best(const mati_sweep* s, size_t* index) {
  if (!s || !index) return invalid("null argument");
  if (s->result.rows.empty() || !s->result.best_row().certified) {
    g_last_error = "no grid point was certified";
    return MATI_ERR_NO_CERTIFICATE;
  }
  *index = s->result.best;
  return MATI_OK;
}

mati_status mati_sweep_witness(const mati_sweep* s, size_t i, double* out,
                               size_t cap) {
  if (!s || !out) return invalid("null argument");
  if (i >= s->result.rows.size()) return invalid("row index out of range");
  const auto& row = s->result.rows[i];
  if (!row.certified) {
    g_last_error = "row has no witness";
    return MATI_ERR_NO_CERTIFICATE;
  }
  const int n = s->nx;
  if (cap < static_cast<size_t>(n) * n) return invalid("buffer too small");
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out[r * n + c] = row.p_witness(r, c);
  return MATI_OK;
}

mati_status mati_baseline(const mati_problem* p, double delta,
                          mati_sweep_row* row) {
  if (!p || !row) return invalid("null argument");
  return guard([&] {
    fill_row(mati::baseline_carnevale(p->spec.sys, p->spec.proto, delta), row);
  });
}

mati_status mati_monodromy_radius_rr(const mati_problem* p, double T,
                                     double* rho) {
  if (!p || !rho) return invalid("null argument");
  return guard([&] {
    *rho = mati::monodromy_radius_rr(p->spec.sys, T, p->spec.node_dims);
  });
}

mati_status mati_verify_lambda(mati_protocol protocol, int l, int n_trials,
                               uint64_t seed, double* sup, double* analytic) {
  return guard([&] {
    const mati::LambdaSample s =
        mati::verify_lambda(to_kind(protocol), l, n_trials, seed);
    if (sup) *sup = s.sup;
    if (analytic) *analytic = s.analytic;
  });
}

mati_status mati_certificate_load(const char* path, mati_certificate** out) {
  if (!path || !out) return invalid("null argument");
  *out = nullptr;
  return guard([&] { *out = new mati_certificate{mati::load_certificate(path)}; });
}

mati_status mati_certificate_create(double c4, double c2, double k,
                                    double delta, double gamma,
                                    mati_certificate** out) {
  if (!out) return invalid("null argument");
  *out = nullptr;
  return guard([&] {
    *out = new mati_certificate{
        mati::PolyCertificate::from_k(c4, c2, k, delta, gamma)};
  });
}

void mati_certificate_free(mati_certificate* c) { delete c; }

mati_status mati_certificate_get(const mati_certificate* c, double* c4,
                                 double* c2, double* k, double* L,
                                 double* delta, double* gamma) {
  if (!c) return invalid("null argument");
  if (c4) *c4 = c->cert.c4;
  if (c2) *c2 = c->cert.c2;
  if (k) *k = c->cert.k;
  if (L) *L = c->cert.L;
  if (delta) *delta = c->cert.delta;
  if (gamma) *gamma = c->cert.gamma;
  return MATI_OK;
}

mati_status mati_certificate_verify(const mati_certificate* c,
                                    double half_width, int n_grid,
                                    mati_verification* report) {
  if (!c || !report) return invalid("null argument");
  return guard([&] {
    const mati::VerificationReport r =
        mati::verify_certificate(c->cert, half_width, n_grid);
    report->min_margin = r.min_margin;
    report->max_abs = r.max_abs;
    report->tol = r.tol;
    report->worst_x = r.worst_x;
    report->worst_e = r.worst_e;
    report->worst_d = r.worst_d;
    report->worst_d2 = r.worst_d2;
    report->radial_growth = r.radial_growth ? 1 : 0;
    report->pass = r.pass ? 1 : 0;
  });
}

mati_status mati_certificate_mati(const mati_certificate* c, double half_width,
                                  int n_grid, double* tau) {
  if (!c || !tau) return invalid("null argument");
  return guard([&] {
    const auto r = mati::verify_certificate(c->cert, half_width, n_grid);
    *tau = mati::certificate_to_mati(c->cert, r).value;
  });
}

mati_status mati_check_w_growth(const mati_certificate* c, double x, double e,
                                double d, double* residual) {
  if (!c || !residual) return invalid("null argument");
  return guard([&] { *residual = mati::check_w_growth(c->cert, x, e, d); });
}

mati_status mati_scenario_load(const char* path, mati_scenario** out) {
  if (!path || !out) return invalid("null argument");
  *out = nullptr;
  return guard([&] { *out = new mati_scenario{mati::load_scenario(path)}; });
}

void mati_scenario_free(mati_scenario* s) { delete s; }

int mati_scenario_has_monitor(const mati_scenario* s) {
  return s && s->sc.monitor.has_value() ? 1 : 0;
}

mati_status mati_scenario_bracket(const mati_scenario* s, double* lo,
                                  double* hi) {
  if (!s || !lo || !hi) return invalid("null argument");
  if (!s->sc.bracket) {
    g_last_error = "scenario has no bracket";
    return MATI_ERR_PRECONDITION;
  }
  *lo = s->sc.bracket->first;
  *hi = s->sc.bracket->second;
  return MATI_OK;
}

mati_status mati_scenario_set_seed(mati_scenario* s, uint64_t seed) {
  if (!s) return invalid("null argument");
  auto* u = std::get_if<mati::Schedule::UniformRandom>(&s->sc.schedule.kind);
  if (!u) {
    g_last_error = "schedule is not random";
    return MATI_ERR_PRECONDITION;
  }
  u->seed = seed;
  return MATI_OK;
}

mati_status mati_simulate(const mati_scenario* s, mati_trace** out) {
  if (!s || !out) return invalid("null argument");
  *out = nullptr;
  return guard([&] {
    mati::SimulationOptions opts;
    opts.step = s->sc.step;
    *out = new mati_trace{mati::simulate(s->sc.dyn, s->sc.protocol,
                                         s->sc.node_dims, s->sc.schedule,
                                         s->sc.x0, s->sc.e0, opts)};
  });
}

void mati_trace_free(mati_trace* t) { delete t; }

mati_status mati_trace_summarize(const mati_trace* t, double decay_ratio,
                                 mati_trace_summary* out) {
  if (!t || !out) return invalid("null argument");
  return guard([&] {
    const mati::TraceSummary s = mati::summarize(t->trace, decay_ratio);
    out->initial_norm = s.initial_norm;
    out->final_norm = s.final_norm;
    out->min_ratio = s.min_ratio;
    out->decay_time = s.decay_time;
    out->decay_rate = s.decay_rate;
    out->verdict = s.verdict == "stable"     ? MATI_VERDICT_STABLE
                   : s.verdict == "diverged" ? MATI_VERDICT_DIVERGED
                                             : MATI_VERDICT_UNDECIDED;
    out->n_points = t->trace.points.size();
    out->n_jumps = t->trace.jumps.size();
    out->diverged = t->trace.diverged ? 1 : 0;
  });
}

mati_status mati_trace_check_domain(const mati_trace* t) {
  if (!t) return invalid("null argument");
  return guard([&] { mati::check_hybrid_domain(t->trace); });
}

mati_status mati_trace_write_csv(const mati_trace* t, const char* path) {
  if (!t || !path) return invalid("null argument");
  return guard([&] {
    std::ofstream os(path, std::ios::binary);
    if (!os) mati::fail(mati::ErrorKind::Ingestion, std::string("cannot write ") + path);
    mati::write_trace_csv(t->trace, os);
    if (!os) mati::fail(mati::ErrorKind::Ingestion, std::string("write failed: ") + path);
  });
}

mati_status mati_trace_monitor(const mati_trace* t, const mati_scenario* s,
                               mati_monitor_report* out) {
  if (!t || !s || !out) return invalid("null argument");
  if (!s->sc.monitor) {
    g_last_error = "scenario has no monitor";
    return MATI_ERR_PRECONDITION;
  }
  return guard([&] {
    const auto& m = *s->sc.monitor;
    const mati::MonitorReport r =
        mati::monitor_lyapunov(t->trace, m.v, m.g, m.rel_tol);
    out->u0 = r.u0;
    out->tolerance = r.tolerance;
    out->max_jump_increase = r.max_jump_increase;
    out->max_flow_increase = r.max_flow_increase;
    out->jump_checks = r.jump_checks;
    out->flow_checks = r.flow_checks;
    out->violations = r.violations;
  });
}

mati_status mati_empirical(const mati_scenario* s, double lo, double hi,
                           double tol, mati_empirical_result* out) {
  if (!s || !out) return invalid("null argument");
  return guard([&] {
    mati::EmpiricalOptions opts;
    if (tol > 0.0) opts.tol = tol;
    opts.horizon = s->sc.schedule.horizon;
    const mati::EmpiricalResult r = mati::empirical_mati(
        s->sc.dyn, s->sc.protocol, s->sc.node_dims, lo, hi, opts);
    out->boundary = r.boundary;
    out->found = r.found ? 1 : 0;
    out->monodromy = r.criterion == mati::StabilityCriterion::Monodromy ? 1 : 0;
  });
}

}  // extern "C"
