#pragma once

// JSON ingestion for systems, certificates and simulation scenarios, and the
// trace CSV writer.

#include <json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hybrid_sim.hpp"
#include "lmi_analysis.hpp"
#include "nonlinear_cert.hpp"

namespace mati {

/// {A, E, C, F} (or plant {A_P, B_P, K}), protocol {kind, l, ...}, delta list,
/// grid_step. Matrices are lists of rows or flat row-major lists.
struct LinearProblemSpec {
  LinearNcs sys;
  ProtocolModel proto;
  std::vector<int> node_dims;
  std::vector<double> deltas;
  double grid_step = 0.001;
};

struct MonitorSpec {
  LyapunovCandidate v;
  GainTriple g;
  double rel_tol = 1e-6;
};

struct Scenario {
  NcsDynamics dyn;
  ProtocolKind protocol = ProtocolKind::TOD;
  std::vector<int> node_dims;
  Schedule schedule;
  Eigen::VectorXd x0;
  Eigen::VectorXd e0;
  double step = 0.0;
  std::optional<MonitorSpec> monitor;
  std::optional<std::pair<double, double>> bracket;
};

// All parse/load functions throw Error(Ingestion); load_* messages name the
// path.
LinearProblemSpec parse_linear_problem(const nlohmann::json& j);
LinearProblemSpec load_linear_problem(const std::string& path);

/// {c4, c2, k or L, delta, gamma}.
PolyCertificate parse_certificate(const nlohmann::json& j);
PolyCertificate load_certificate(const std::string& path);

Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

ProtocolKind parse_protocol_kind(const std::string& name);

/// Header t,j,tau,kappa,x0..,e0..,event; values at full double precision.
void write_trace_csv(const HybridTrace& trace, std::ostream& os);

}  // namespace mati
