#pragma once

// Dense symmetric matrices and a small LMI feasibility solver that minimizes
// the largest eigenvalue of an affine matrix function M(P) over P >= p_min I.

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "error.hpp"

namespace mati {

class SymMatrix {
 public:
  SymMatrix() = default;
  /// Rejects inputs whose asymmetry exceeds 1e-12 * ||m||_F, then symmetrizes.
  explicit SymMatrix(const Eigen::MatrixXd& m);

  static SymMatrix zero(int n);
  static SymMatrix identity(int n);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const;

 private:
  Eigen::MatrixXd m_;
};

struct Eigensystem {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns
};

Eigensystem eigensystem(const SymMatrix& m);
double max_eigenvalue(const SymMatrix& m);
double min_eigenvalue(const SymMatrix& m);

/// Must be affine in P; the solver samples it at P = 0 and on a basis of the
/// symmetric matrices and works with the resulting coefficients.
using AffineSymMap = std::function<SymMatrix(const SymMatrix&)>;

struct LmiFeasibilityProblem {
  int dim_p = 0;
  AffineSymMap map;
  double p_min = 0.0;
  /// Feasible means M(P) <= -slack_margin * I.
  double slack_margin = 0.0;
  /// Magnitude of the map's entries; sets the smoothing schedule and the
  /// default margins.
  double scale = 1.0;

  /// p_min = 1e-6 * scale, slack_margin = 1e-8 * scale.
  static LmiFeasibilityProblem with_default_margins(int dim_p, AffineSymMap map,
                                                    double scale);
};

struct EigMinResult {
  double t_star = 0.0;
  SymMatrix p_star;
  long iterations = 0;
};

class SolverStallError : public Error {
 public:
  SolverStallError(const std::string& what, EigMinResult best)
      : Error(ErrorKind::SolverStall, what), best_(std::move(best)) {}
  const EigMinResult& best() const { return best_; }

 private:
  EigMinResult best_;
};

/// Smoothed spectral descent: minimizes mu * log sum exp(lambda_i / mu) with
/// mu = scale * 10^-j, j = 0..6, Newton steps on the smoothed objective,
/// backtracking line search and projection onto P >= p_min I by eigenvalue
/// clipping. Starts from P = I. Throws SolverStallError when the last
/// smoothing stage does not reach stationarity within the iteration cap.
EigMinResult max_eig_minimize(const LmiFeasibilityProblem& p);

enum class Verdict { Feasible, Infeasible, Indeterminate };

const char* to_string(Verdict v);

struct FeasibilityResult {
  Verdict verdict = Verdict::Indeterminate;
  SymMatrix witness;
  double t_star = 0.0;
};

/// Feasible iff the minimized lambda_max is <= -slack_margin. Stops as soon
/// as a feasible iterate is seen, or as soon as a smoothing stage proves the
/// optimum lies above the threshold.
FeasibilityResult is_feasible(const LmiFeasibilityProblem& p);

}  // namespace mati
