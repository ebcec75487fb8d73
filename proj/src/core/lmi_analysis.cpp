#include "lmi_analysis.hpp"

#include <cmath>
#include <sstream>

#include "parallel.hpp"

namespace mati {
namespace {

void require_finite(const Eigen::MatrixXd& m, const char* name) {
  if (!m.allFinite()) {
    std::ostringstream os;
    os << "matrix " << name << " has non-finite entries";
    fail(ErrorKind::Domain, os.str());
  }
}

void require_shape(const Eigen::MatrixXd& m, int rows, int cols,
                   const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << "matrix " << name << " is " << m.rows() << "x" << m.cols()
       << ", expected " << rows << "x" << cols;
    fail(ErrorKind::Domain, os.str());
  }
}

}  // namespace

void LinearNcs::validate() const {
  const int n_x = static_cast<int>(A.rows());
  const int n_e = static_cast<int>(F.rows());
  require(n_x > 0 && n_e > 0, "system dimensions must be positive");
  require_shape(A, n_x, n_x, "A");
  require_shape(E, n_x, n_e, "E");
  require_shape(C, n_e, n_x, "C");
  require_shape(F, n_e, n_e, "F");
  require_finite(A, "A");
  require_finite(E, "E");
  require_finite(C, "C");
  require_finite(F, "F");
}

LinearNcs LinearNcs::from_plant(const Eigen::MatrixXd& a_p,
                                const Eigen::MatrixXd& b_p,
                                const Eigen::MatrixXd& k) {
  require(a_p.rows() == a_p.cols(), "A_P must be square");
  require(b_p.rows() == a_p.rows(), "B_P rows must match A_P");
  require(k.rows() == b_p.cols() && k.cols() == a_p.cols(),
          "K must be n_u x n_x");
  LinearNcs sys;
  sys.A = a_p - b_p * k;
  sys.E = -b_p * k;
  sys.C = -sys.A;
  sys.F = -sys.E;
  sys.validate();
  return sys;
}

const char* to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::TOD: return "TOD";
    case ProtocolKind::RR: return "RR";
    case ProtocolKind::SampledData: return "SampledData";
    case ProtocolKind::Custom: return "Custom";
  }
  return "?";
}

void ProtocolModel::validate() const {
  require(lambda >= 0.0 && lambda < 1.0, "protocol lambda must be in [0, 1)");
  require(alpha_lo > 0.0 && alpha_lo <= alpha_hi,
          "protocol requires 0 < alpha_lo <= alpha_hi");
  require(m_w > 0.0, "protocol M_w must be positive");
  require(l >= 1, "protocol node count must be >= 1");
  const double tol = 1e-12;
  switch (kind) {
    case ProtocolKind::TOD:
      require(std::abs(lambda - std::sqrt((l - 1.0) / l)) <= tol &&
                  m_w == 1.0 && alpha_lo == 1.0,
              "TOD requires lambda = sqrt((l-1)/l), M_w = alpha_lo = 1");
      break;
    case ProtocolKind::RR:
      require(std::abs(m_w - std::sqrt(static_cast<double>(l))) <= tol,
              "RR requires M_w = sqrt(l)");
      break;
    case ProtocolKind::SampledData:
      require(lambda == 0.0 && l == 1, "sampled-data requires lambda = 0, l = 1");
      break;
    case ProtocolKind::Custom:
      break;
  }
}

ProtocolModel ProtocolModel::tod(int l) {
  require(l >= 1, "TOD needs at least one node");
  ProtocolModel p;
  p.kind = ProtocolKind::TOD;
  p.l = l;
  p.lambda = std::sqrt((l - 1.0) / l);
  return p;
}

ProtocolModel ProtocolModel::round_robin(int l) {
  require(l >= 1, "RR needs at least one node");
  ProtocolModel p;
  p.kind = ProtocolKind::RR;
  p.l = l;
  p.lambda = std::sqrt((l - 1.0) / l);
  p.m_w = std::sqrt(static_cast<double>(l));
  p.alpha_hi = std::sqrt(static_cast<double>(l));
  return p;
}

ProtocolModel ProtocolModel::sampled_data() {
  ProtocolModel p;
  p.kind = ProtocolKind::SampledData;
  p.l = 1;
  p.lambda = 0.0;
  return p;
}

double spectral_norm(const Eigen::MatrixXd& m) {
  const SymMatrix gram(m.transpose() * m);
  return std::sqrt(std::max(0.0, max_eigenvalue(gram)));
}

double l_of_k(const LinearNcs& sys, const ProtocolModel& proto, double k) {
  if (!(k >= 0.0 && k < 1.0)) {
    std::ostringstream os;
    os << "k must lie in [0, 1), got " << k;
    fail(ErrorKind::Domain, os.str());
  }
  return proto.m_w / proto.alpha_lo * (1.0 - k) * spectral_norm(sys.F);
}

SymMatrix build_lmi(const LinearNcs& sys, const ProtocolModel& proto, double k,
                    double delta, double gamma, const SymMatrix& p) {
  const int nx = sys.nx();
  const int ne = sys.ne();
  if (p.dim() != nx) {
    std::ostringstream os;
    os << "P is " << p.dim() << "x" << p.dim() << ", expected " << nx;
    fail(ErrorKind::Domain, os.str());
  }
  const Eigen::MatrixXd& P = p.matrix();
  const double mw2 = proto.m_w * proto.m_w;
  const double a2 = proto.alpha_lo * proto.alpha_lo;

  Eigen::MatrixXd m(nx + ne, nx + ne);
  m.topLeftCorner(nx, nx) = sys.A.transpose() * P + P * sys.A +
                            delta * delta * Eigen::MatrixXd::Identity(nx, nx) +
                            mw2 * sys.C.transpose() * sys.C;
  const Eigen::MatrixXd off = k * mw2 * sys.C.transpose() * sys.F + P * sys.E;
  m.topRightCorner(nx, ne) = off;
  m.bottomLeftCorner(ne, nx) = off.transpose();
  m.bottomRightCorner(ne, ne) =
      -a2 * (gamma * gamma - delta * delta) *
          Eigen::MatrixXd::Identity(ne, ne) +
      mw2 * k * k * sys.F.transpose() * sys.F;
  return SymMatrix(m);
}

LmiFeasibilityProblem lmi_problem(const LinearNcs& sys,
                                  const ProtocolModel& proto, double k,
                                  double delta, double gamma,
                                  double slack_factor) {
  // gamma-independent scale so margins stay fixed along a bisection.
  const double scale = std::max(
      1.0,
      build_lmi(sys, proto, k, delta, delta, SymMatrix::identity(sys.nx()))
          .matrix()
          .norm());
  auto prob = LmiFeasibilityProblem::with_default_margins(
      sys.nx(),
      [&sys, &proto, k, delta, gamma](const SymMatrix& p) {
        return build_lmi(sys, proto, k, delta, gamma, p);
      },
      scale);
  prob.slack_margin *= slack_factor;
  return prob;
}

MinGammaResult min_gamma(const LinearNcs& sys, const ProtocolModel& proto,
                         double k, double delta, const MinGammaOptions& opts) {
  sys.validate();
  proto.validate();
  require(delta > 0.0, "delta must be positive");
  require(k >= 0.0 && k < 1.0, "k must lie in [0, 1)");

  auto check = [&](double gamma) {
    return is_feasible(
        lmi_problem(sys, proto, k, delta, gamma, opts.slack_factor));
  };

  MinGammaResult res;
  const auto sample = lmi_problem(sys, proto, k, delta, delta, opts.slack_factor);
  res.p_min = sample.p_min;
  res.slack_margin = sample.slack_margin;

  FeasibilityResult at_lo = check(delta);
  if (at_lo.verdict == Verdict::Feasible) {
    res.gamma = delta;
    res.witness = at_lo.witness;
    res.t_star = at_lo.t_star;
    res.at_lower_cap = true;
    return res;
  }

  const double gamma_cap =
      delta + 1e3 * (1.0 + spectral_norm(sys.F) + spectral_norm(sys.E) +
                     spectral_norm(sys.A) + spectral_norm(sys.C));
  FeasibilityResult at_hi = check(gamma_cap);
  if (at_hi.verdict != Verdict::Feasible) {
    std::ostringstream os;
    os << "LMI infeasible at gamma cap " << gamma_cap << " (k=" << k
       << ", delta=" << delta << ")";
    fail(ErrorKind::NoCertificate, os.str());
  }

  double lo = delta;
  double hi = gamma_cap;
  while (hi - lo > opts.gamma_tol) {
    const double mid = 0.5 * (lo + hi);
    FeasibilityResult r = check(mid);
    if (r.verdict == Verdict::Feasible) {
      hi = mid;
      at_hi = std::move(r);
    } else {
      lo = mid;
    }
  }
  res.gamma = hi;
  res.witness = at_hi.witness;
  res.t_star = at_hi.t_star;
  return res;
}

std::vector<double> k_grid(double grid_step) {
  if (!(grid_step > 0.0 && grid_step < 1.0)) {
    std::ostringstream os;
    os << "grid step must lie in (0, 1), got " << grid_step;
    fail(ErrorKind::Domain, os.str());
  }
  std::vector<double> ks;
  for (long i = 0;; ++i) {
    const double k = static_cast<double>(i) * grid_step;
    if (k >= 1.0 - 1e-12) break;
    ks.push_back(k);
  }
  return ks;
}

SweepRow evaluate_k(const LinearNcs& sys, const ProtocolModel& proto, double k,
                    double delta, const MinGammaOptions& opts) {
  SweepRow row;
  row.k = k;
  row.l_k = l_of_k(sys, proto, k);
  try {
    MinGammaResult mg = min_gamma(sys, proto, k, delta, opts);
    row.gamma_k = mg.gamma;
    row.p_witness = std::move(mg.witness);
    row.t_star = mg.t_star;
    row.p_min = mg.p_min;
    row.slack_margin = mg.slack_margin;
    row.tau_k = mati_bound({std::max(row.l_k, kMinGrowthRate), row.gamma_k,
                            proto.lambda})
                    .value;
    row.certified = true;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoCertificate) throw;
    row.certified = false;
  }
  return row;
}

SweepResult sweep_k(const LinearNcs& sys, const ProtocolModel& proto,
                    double delta, double grid_step,
                    const MinGammaOptions& opts) {
  sys.validate();
  proto.validate();
  const std::vector<double> ks = k_grid(grid_step);
  SweepResult res;
  res.rows.resize(ks.size());
  parallel_for(ks.size(), [&](std::size_t i) {
    res.rows[i] = evaluate_k(sys, proto, ks[i], delta, opts);
  });

  bool any = false;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    if (!res.rows[i].certified) continue;
    if (!any || res.rows[i].tau_k > res.rows[res.best].tau_k) res.best = i;
    any = true;
  }
  if (!any) {
    std::ostringstream os;
    os << "no grid point certified for delta=" << delta;
    fail(ErrorKind::NoCertificate, os.str());
  }
  return res;
}

SweepRow baseline_carnevale(const LinearNcs& sys, const ProtocolModel& proto,
                            double delta, const MinGammaOptions& opts) {
  sys.validate();
  proto.validate();
  MinGammaResult mg = min_gamma(sys, proto, 0.0, delta, opts);
  SweepRow row;
  row.k = 0.0;
  row.l_k = l_of_k(sys, proto, 0.0);
  row.gamma_k = mg.gamma;
  row.p_witness = std::move(mg.witness);
  row.t_star = mg.t_star;
  row.p_min = mg.p_min;
  row.slack_margin = mg.slack_margin;
  row.tau_k =
      mati_bound({std::max(row.l_k, kMinGrowthRate), row.gamma_k, proto.lambda})
          .value;
  row.certified = true;
  return row;
}

}  // namespace mati
