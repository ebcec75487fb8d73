#include "sdp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace mati {

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) fail(ErrorKind::Domain, "matrix is not square");
  const double asym = (m - m.transpose()).norm();
  if (asym > 1e-12 * m.norm()) {
    std::ostringstream os;
    os << "matrix is not symmetric (asymmetry " << asym << ")";
    fail(ErrorKind::Domain, os.str());
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::zero(int n) {
  return SymMatrix(Eigen::MatrixXd::Zero(n, n));
}

SymMatrix SymMatrix::identity(int n) {
  return SymMatrix(Eigen::MatrixXd::Identity(n, n));
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  require(dim() == o.dim(), "dimension mismatch in SymMatrix +");
  SymMatrix r;
  r.m_ = m_ + o.m_;
  return r;
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  require(dim() == o.dim(), "dimension mismatch in SymMatrix -");
  SymMatrix r;
  r.m_ = m_ - o.m_;
  return r;
}

SymMatrix SymMatrix::operator*(double s) const {
  SymMatrix r;
  r.m_ = m_ * s;
  return r;
}

Eigensystem eigensystem(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.matrix());
  return {es.eigenvalues(), es.eigenvectors()};
}

double max_eigenvalue(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.matrix(),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues()(m.dim() - 1);
}

double min_eigenvalue(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.matrix(),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

LmiFeasibilityProblem LmiFeasibilityProblem::with_default_margins(
    int dim_p, AffineSymMap map, double scale) {
  LmiFeasibilityProblem p;
  p.dim_p = dim_p;
  p.map = std::move(map);
  p.scale = scale;
  p.p_min = 1e-6 * scale;
  p.slack_margin = 1e-8 * scale;
  return p;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Feasible: return "FEASIBLE";
    case Verdict::Infeasible: return "INFEASIBLE";
    case Verdict::Indeterminate: return "INDETERMINATE";
  }
  return "?";
}

namespace {

constexpr int kStages = 7;
constexpr long kIterationCap = 100000;
constexpr int kStageIterationCap = 500;
constexpr double kStationarityTol = 1e-10;

// M(P) = base + sum_k p_k * coeffs[k] with P = sum_k p_k * S_k, where S_k runs
// over E_ii and E_ij + E_ji (i < j).
struct AffineDecomposition {
  int n = 0;
  Eigen::MatrixXd base;
  std::vector<Eigen::MatrixXd> coeffs;
  std::vector<std::pair<int, int>> index;
};

AffineDecomposition decompose(const LmiFeasibilityProblem& prob) {
  require(prob.dim_p > 0, "dim_p must be positive");
  require(static_cast<bool>(prob.map), "problem has no map");
  AffineDecomposition d;
  d.n = prob.dim_p;
  d.base = prob.map(SymMatrix::zero(d.n)).matrix();
  for (int i = 0; i < d.n; ++i) {
    for (int j = i; j < d.n; ++j) {
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d.n, d.n);
      s(i, j) = 1.0;
      s(j, i) = 1.0;
      d.coeffs.push_back(prob.map(SymMatrix(s)).matrix() - d.base);
      d.index.emplace_back(i, j);
    }
  }
  return d;
}

Eigen::MatrixXd to_matrix(const AffineDecomposition& d,
                          const Eigen::VectorXd& p) {
  Eigen::MatrixXd m(d.n, d.n);
  for (std::size_t k = 0; k < d.index.size(); ++k) {
    const auto [i, j] = d.index[k];
    m(i, j) = p(k);
    m(j, i) = p(k);
  }
  return m;
}

Eigen::VectorXd to_params(const AffineDecomposition& d,
                          const Eigen::MatrixXd& m) {
  Eigen::VectorXd p(d.index.size());
  for (std::size_t k = 0; k < d.index.size(); ++k) {
    const auto [i, j] = d.index[k];
    p(k) = 0.5 * (m(i, j) + m(j, i));
  }
  return p;
}

struct Evaluation {
  double lambda_max = 0.0;
  double smoothed = 0.0;
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  Eigen::VectorXd weights;
};

class SmoothedObjective {
 public:
  SmoothedObjective(const AffineDecomposition& d, double p_min)
      : d_(d), p_min_(p_min) {}

  Evaluation evaluate(const Eigen::VectorXd& p, double mu) const {
    Eigen::MatrixXd m = d_.base;
    for (std::size_t k = 0; k < d_.coeffs.size(); ++k)
      m.noalias() += p(k) * d_.coeffs[k];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Evaluation ev;
    ev.values = es.eigenvalues();
    ev.vectors = es.eigenvectors();
    ev.lambda_max = ev.values(ev.values.size() - 1);
    ev.weights = ((ev.values.array() - ev.lambda_max) / mu).exp();
    const double z = ev.weights.sum();
    ev.weights /= z;
    ev.smoothed = ev.lambda_max + mu * std::log(z);
    return ev;
  }

  // Gradient and Hessian of the smoothed objective with respect to p.
  void derivatives(const Evaluation& ev, double mu, Eigen::VectorXd& grad,
                   Eigen::MatrixXd& hess) const {
    const int m = static_cast<int>(d_.coeffs.size());
    const int nm = static_cast<int>(ev.values.size());
    std::vector<Eigen::MatrixXd> rotated(m);
    for (int k = 0; k < m; ++k)
      rotated[k] = ev.vectors.transpose() * d_.coeffs[k] * ev.vectors;

    Eigen::MatrixXd gamma(nm, nm);
    for (int i = 0; i < nm; ++i) {
      gamma(i, i) = ev.weights(i) / mu;
      for (int j = 0; j < i; ++j) {
        const double gap = ev.values(i) - ev.values(j);  // >= 0
        double dd;
        if (gap <= 1e-14 * mu) {
          dd = 0.5 * (ev.weights(i) + ev.weights(j)) / mu;
        } else {
          // (w_i - w_j) / gap with w_j = w_i * exp(-gap / mu).
          dd = -ev.weights(i) * std::expm1(-gap / mu) / gap;
        }
        gamma(i, j) = dd;
        gamma(j, i) = dd;
      }
    }

    grad.resize(m);
    for (int k = 0; k < m; ++k)
      grad(k) = (rotated[k].diagonal().array() * ev.weights.array()).sum();

    hess.resize(m, m);
    for (int k = 0; k < m; ++k) {
      const Eigen::MatrixXd weighted =
          gamma.array() * rotated[k].array();
      for (int l = k; l < m; ++l) {
        const double h = (weighted.array() * rotated[l].array()).sum() -
                         grad(k) * grad(l) / mu;
        hess(k, l) = h;
        hess(l, k) = h;
      }
    }
  }

  // Eigenvalue clipping onto {P >= p_min I}; returns true if P moved.
  bool project(Eigen::VectorXd& p) const {
    const Eigen::MatrixXd m = to_matrix(d_, p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const double floor = p_min_ * (1.0 + 1e-9);
    if (es.eigenvalues()(0) >= floor) return false;
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(floor);
    p = to_params(d_, es.eigenvectors() * clipped.asDiagonal() *
                          es.eigenvectors().transpose());
    return true;
  }

 private:
  const AffineDecomposition& d_;
  double p_min_;
};

struct Outcome {
  EigMinResult best;
  bool stationary = false;
  // Set when a smoothing stage proved min lambda_max > target.
  bool above_target = false;
};

Outcome solve(const LmiFeasibilityProblem& prob,
              std::optional<double> target) {
  const AffineDecomposition d = decompose(prob);
  const SmoothedObjective obj(d, prob.p_min);

  double coeff_norm = d.base.norm();
  for (const auto& c : d.coeffs) coeff_norm = std::max(coeff_norm, c.norm());
  const double grad_tol = kStationarityTol * std::max(1.0, coeff_norm);
  const double log_n = std::log(static_cast<double>(d.base.rows()));

  Eigen::VectorXd p = to_params(d, Eigen::MatrixXd::Identity(d.n, d.n));
  obj.project(p);

  Outcome out;
  out.best.t_star = std::numeric_limits<double>::infinity();
  auto record = [&](const Evaluation& ev, const Eigen::VectorXd& at) {
    if (ev.lambda_max < out.best.t_star) {
      out.best.t_star = ev.lambda_max;
      out.best.p_star = SymMatrix(to_matrix(d, at));
    }
  };
  auto reached = [&] { return target && out.best.t_star <= *target; };

  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  long iterations = 0;
  for (int stage = 0; stage < kStages; ++stage) {
    const double mu = prob.scale * std::pow(10.0, -stage);
    Evaluation ev = obj.evaluate(p, mu);
    record(ev, p);
    if (reached()) break;

    bool stationary = false;
    for (int it = 0; it < kStageIterationCap && iterations < kIterationCap;
         ++it, ++iterations) {
      obj.derivatives(ev, mu, grad, hess);

      // Projected-gradient stationarity measure.
      Eigen::VectorXd probe = p - grad / std::max(1.0, coeff_norm);
      obj.project(probe);
      const double pg = (p - probe).norm() * std::max(1.0, coeff_norm);
      if (pg <= grad_tol) {
        stationary = true;
        break;
      }

      const double reg =
          1e-12 * std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-300);
      Eigen::MatrixXd h = hess;
      h.diagonal().array() += reg;
      Eigen::VectorXd dir = h.ldlt().solve(-grad);
      if (!dir.allFinite() || grad.dot(dir) >= 0.0) dir = -grad;

      bool accepted = false;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
        if (attempt == 1) dir = -grad;
        double alpha = 1.0;
        for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
          Eigen::VectorXd trial = p + alpha * dir;
          obj.project(trial);
          const Evaluation tev = obj.evaluate(trial, mu);
          const double decrease = grad.dot(trial - p);
          if (tev.smoothed <= ev.smoothed + 1e-4 * std::min(decrease, 0.0) &&
              tev.smoothed < ev.smoothed) {
            p = trial;
            ev = tev;
            accepted = true;
            break;
          }
        }
      }
      if (!accepted) {
        // No representable decrease left at this smoothing level.
        stationary = true;
        break;
      }
      record(ev, p);
      if (reached()) break;
    }
    out.stationary = stationary;
    if (reached()) break;

    if (target && stationary) {
      obj.derivatives(ev, mu, grad, hess);
      const bool interior = !([&] {
        Eigen::VectorXd q = p;
        return obj.project(q);
      }());
      if (interior && grad.norm() <= 1e-8 * std::max(1.0, coeff_norm)) {
        const double lower = ev.smoothed - mu * log_n;
        if (lower > *target) {
          out.above_target = true;
          break;
        }
      }
    }
    if (iterations >= kIterationCap) break;
  }
  out.best.iterations = iterations;
  return out;
}

}  // namespace

EigMinResult max_eig_minimize(const LmiFeasibilityProblem& prob) {
  Outcome out = solve(prob, std::nullopt);
  if (!out.stationary) {
    std::ostringstream os;
    os << "lambda_max minimization stalled after " << out.best.iterations
       << " iterations (best " << out.best.t_star << ")";
    throw SolverStallError(os.str(), out.best);
  }
  return out.best;
}

FeasibilityResult is_feasible(const LmiFeasibilityProblem& prob) {
  const double target = -prob.slack_margin;
  Outcome out = solve(prob, target);
  FeasibilityResult res;
  res.witness = out.best.p_star;
  res.t_star = out.best.t_star;
  if (out.best.t_star <= target)
    res.verdict = Verdict::Feasible;
  else if (out.above_target || out.stationary)
    res.verdict = Verdict::Infeasible;
  else
    res.verdict = Verdict::Indeterminate;
  return res;
}

}  // namespace mati
