#include "io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mati {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) {
  fail(ErrorKind::Ingestion, what);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    bad(path + ": " + e.what());
  }
}

template <class Fn>
auto with_path(const std::string& path, Fn fn) {
  try {
    return fn(read_json(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Ingestion &&
        std::string(e.what()).rfind(path, 0) == 0)
      throw;
    fail(e.kind() == ErrorKind::Domain ? ErrorKind::Ingestion : e.kind(),
         path + ": " + e.what());
  } catch (const json::exception& e) {
    bad(path + ": " + e.what());
  }
}

double number(const json& j, const char* key) {
  if (!j.contains(key)) bad(std::string("missing field '") + key + "'");
  if (!j.at(key).is_number()) bad(std::string("field '") + key + "' is not a number");
  return j.at(key).get<double>();
}

double number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? number(j, key) : fallback;
}

// Nested rows, or a flat row-major list reshaped with `cols` columns
// (cols <= 0: square).
Eigen::MatrixXd matrix(const json& j, const char* key, int cols = 0) {
  if (!j.contains(key)) bad(std::string("missing matrix '") + key + "'");
  const json& m = j.at(key);
  if (!m.is_array() || m.empty()) bad(std::string("matrix '") + key + "' must be a non-empty array");
  if (m.front().is_array()) {
    const auto rows = m.size();
    const auto c = m.front().size();
    Eigen::MatrixXd out(rows, c);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!m[r].is_array() || m[r].size() != c)
        bad(std::string("matrix '") + key + "' has ragged rows");
      for (std::size_t k = 0; k < c; ++k) out(r, k) = m[r][k].get<double>();
    }
    return out;
  }
  const auto n = static_cast<long>(m.size());
  long c = cols;
  if (c <= 0) {
    c = std::lround(std::sqrt(static_cast<double>(n)));
    if (c * c != n) bad(std::string("flat matrix '") + key + "' is not square");
  }
  if (n % c != 0) bad(std::string("flat matrix '") + key + "' does not reshape");
  Eigen::MatrixXd out(n / c, c);
  for (long i = 0; i < n; ++i) out(i / c, i % c) = m[i].get<double>();
  return out;
}

Eigen::VectorXd vector(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array())
    bad(std::string("missing vector '") + key + "'");
  const json& v = j.at(key);
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i].get<double>();
  return out;
}

LinearNcs parse_system(const json& j) {
  if (j.contains("plant")) {
    const json& p = j.at("plant");
    const Eigen::MatrixXd a_p = matrix(p, "A_P");
    const Eigen::MatrixXd b_p = matrix(p, "B_P", 1);
    const Eigen::MatrixXd k = matrix(p, "K", static_cast<int>(a_p.rows()));
    return LinearNcs::from_plant(a_p, b_p, k);
  }
  LinearNcs sys;
  sys.A = matrix(j, "A");
  const int nx = static_cast<int>(sys.A.rows());
  sys.F = matrix(j, "F");
  const int ne = static_cast<int>(sys.F.rows());
  sys.E = matrix(j, "E", ne);
  sys.C = matrix(j, "C", nx);
  sys.validate();
  return sys;
}

std::vector<int> node_dims_of(const json& proto, int ne, int l) {
  if (proto.contains("node_dims")) {
    std::vector<int> dims = proto.at("node_dims").get<std::vector<int>>();
    int total = 0;
    for (int d : dims) total += d;
    if (total != ne) bad("node_dims do not sum to the error dimension");
    return dims;
  }
  if (l == ne) return std::vector<int>(static_cast<std::size_t>(ne), 1);
  if (l == 1) return {ne};
  bad("node_dims are required when l differs from the error dimension");
}

ProtocolModel parse_protocol_model(const json& p) {
  const ProtocolKind kind = parse_protocol_kind(p.value("kind", std::string("TOD")));
  const int l = p.value("l", 1);
  ProtocolModel m;
  switch (kind) {
    case ProtocolKind::TOD: m = ProtocolModel::tod(l); break;
    case ProtocolKind::RR: m = ProtocolModel::round_robin(l); break;
    case ProtocolKind::SampledData: m = ProtocolModel::sampled_data(); break;
    case ProtocolKind::Custom:
      m.kind = ProtocolKind::Custom;
      m.l = l;
      m.lambda = number(p, "lambda");
      break;
  }
  m.m_w = number_or(p, "m_w", m.m_w);
  m.alpha_lo = number_or(p, "alpha_lo", m.alpha_lo);
  m.alpha_hi = number_or(p, "alpha_hi", m.alpha_hi);
  m.validate();
  return m;
}

}  // namespace

ProtocolKind parse_protocol_kind(const std::string& name) {
  if (name == "TOD" || name == "tod") return ProtocolKind::TOD;
  if (name == "RR" || name == "rr") return ProtocolKind::RR;
  if (name == "SampledData" || name == "sampled-data" || name == "sd")
    return ProtocolKind::SampledData;
  if (name == "Custom" || name == "custom") return ProtocolKind::Custom;
  bad("unknown protocol kind '" + name + "'");
}

LinearProblemSpec parse_linear_problem(const json& j) {
  try {
    LinearProblemSpec spec;
    spec.sys = parse_system(j);
    const json proto = j.value("protocol", json::object());
    spec.proto = parse_protocol_model(proto);
    spec.node_dims = node_dims_of(proto, spec.sys.ne(), spec.proto.l);
    if (j.contains("delta")) {
      const json& d = j.at("delta");
      spec.deltas = d.is_array() ? d.get<std::vector<double>>()
                                 : std::vector<double>{d.get<double>()};
    }
    spec.grid_step = number_or(j, "grid_step", 0.001);
    return spec;
  } catch (const json::exception& e) {
    bad(e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Domain) bad(e.what());
    throw;
  }
}

LinearProblemSpec load_linear_problem(const std::string& path) {
  return with_path(path, [](const json& j) { return parse_linear_problem(j); });
}

PolyCertificate parse_certificate(const json& j) {
  try {
    const double c4 = number(j, "c4");
    const double c2 = number(j, "c2");
    const double delta = number(j, "delta");
    const double gamma = number(j, "gamma");
    if (j.contains("k")) {
      const double k = number(j, "k");
      if (j.contains("L") && std::abs(number(j, "L") - (2.0 - k)) > 1e-12)
        bad("certificate L must equal 2 - k");
      return PolyCertificate::from_k(c4, c2, k, delta, gamma);
    }
    if (j.contains("L"))
      return PolyCertificate::from_L(c4, c2, number(j, "L"), delta, gamma);
    bad("certificate needs k or L");
  } catch (const json::exception& e) {
    bad(e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Domain) bad(e.what());
    throw;
  }
}

PolyCertificate load_certificate(const std::string& path) {
  return with_path(path, [](const json& j) { return parse_certificate(j); });
}

Scenario parse_scenario(const json& j) {
  try {
    Scenario sc;
    const json& dyn = j.at("dynamics");
    const std::string kind = dyn.value("kind", std::string("linear"));
    if (kind == "linear")
      sc.dyn = NcsDynamics::linear(parse_system(dyn));
    else if (kind == "example1")
      sc.dyn = NcsDynamics::example1(number_or(dyn, "d", 0.0));
    else
      bad("unknown dynamics kind '" + kind + "'");

    const json proto = j.value("protocol", json::object());
    sc.protocol = parse_protocol_kind(proto.value("kind", std::string("TOD")));
    const int l = proto.value("l", static_cast<int>(
                                       proto.contains("node_dims")
                                           ? proto.at("node_dims").size()
                                           : static_cast<std::size_t>(sc.dyn.ne())));
    sc.node_dims = node_dims_of(proto, sc.dyn.ne(), l);

    const json& s = j.at("schedule");
    const std::string skind = s.value("kind", std::string("constant"));
    const double horizon = number_or(s, "horizon", 200.0);
    if (skind == "constant") {
      sc.schedule = Schedule::constant(number(s, "T"), horizon);
    } else if (skind == "uniform") {
      const double tau_max = number(s, "tau_max");
      sc.schedule = Schedule::uniform_random(
          number_or(s, "eps", 1e-3 * tau_max), tau_max,
          s.value("seed", std::uint64_t{20210601}), horizon);
    } else {
      bad("unknown schedule kind '" + skind + "'");
    }

    sc.x0 = j.contains("x0") ? vector(j, "x0")
                             : Eigen::VectorXd::Zero(sc.dyn.nx());
    sc.e0 = j.contains("e0") ? vector(j, "e0")
                             : Eigen::VectorXd::Zero(sc.dyn.ne());
    sc.step = number_or(j, "step", sc.schedule.max_interval() / 20.0);

    if (j.contains("monitor")) {
      const json& m = j.at("monitor");
      MonitorSpec ms;
      if (m.contains("P"))
        ms.v = QuadraticLyapunov{SymMatrix(matrix(m, "P"))};
      else
        ms.v = QuarticLyapunov{number(m, "c4"), number(m, "c2")};
      ms.g = {number(m, "L"), number(m, "gamma"), number_or(m, "lambda", 0.0)};
      ms.g.validate();
      ms.rel_tol = number_or(m, "rel_tol", 1e-6);
      sc.monitor = ms;
    }
    if (j.contains("bracket")) {
      const auto b = j.at("bracket").get<std::vector<double>>();
      if (b.size() != 2) bad("bracket must be [lo, hi]");
      sc.bracket = std::make_pair(b[0], b[1]);
    }
    return sc;
  } catch (const json::exception& e) {
    bad(e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Domain) bad(e.what());
    throw;
  }
}

Scenario load_scenario(const std::string& path) {
  return with_path(path, [](const json& j) { return parse_scenario(j); });
}

void write_trace_csv(const HybridTrace& trace, std::ostream& os) {
  os << "t,j,tau,kappa";
  for (int i = 0; i < trace.nx; ++i) os << ",x" << i;
  for (int i = 0; i < trace.ne; ++i) os << ",e" << i;
  os << ",event\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (const TracePoint& p : trace.points) {
    os << num(p.t) << ',' << p.j << ',' << num(p.tau) << ',' << p.kappa;
    for (int i = 0; i < trace.nx; ++i) os << ',' << num(p.x(i));
    for (int i = 0; i < trace.ne; ++i) os << ',' << num(p.e(i));
    os << ',' << to_string(p.event) << '\n';
  }
}

}  // namespace mati
