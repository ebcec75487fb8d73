#include <doctest.h>

#include <cmath>
#include <vector>

#include "error.hpp"
#include "hybrid_sim.hpp"

using namespace mati;

namespace {

LinearNcs example2() {
  Eigen::MatrixXd a_p(2, 2), b_p(2, 1), k(1, 2);
  a_p << -4, 1, -2, 3;
  a_p /= 5.0;
  b_p << -1, 2;
  k << -0.2, 0.5;
  return LinearNcs::from_plant(a_p, b_p, k);
}

const std::vector<int> kTwoNodes{1, 1};
const std::vector<int> kOneNode{1};

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

SimulationOptions with_step(double h) {
  SimulationOptions o;
  o.step = h;
  return o;
}

}  // namespace

TEST_CASE("protocol_jump examples") {
  int granted = -2;
  CHECK(protocol_jump(ProtocolKind::TOD, 0, vec({3, -4}), kTwoNodes, &granted) == vec({3, 0}));
  CHECK(granted == 1);
  CHECK(protocol_jump(ProtocolKind::RR, 1, vec({3, -4}), kTwoNodes) == vec({3, 0}));
  CHECK(protocol_jump(ProtocolKind::RR, 2, vec({3, -4}), kTwoNodes) == vec({0, -4}));
  CHECK(protocol_jump(ProtocolKind::TOD, 0, vec({1, 1}), kTwoNodes) == vec({0, 1}));
  CHECK(protocol_jump(ProtocolKind::SampledData, 5, vec({1, 2}), kTwoNodes, &granted) == vec({0, 0}));
  CHECK(granted == -1);
  const std::vector<int> blocks{2, 1};
  CHECK(protocol_jump(ProtocolKind::TOD, 0, vec({1, 1, 1.5}), blocks) == vec({1, 1, 0}));
  CHECK(protocol_jump(ProtocolKind::TOD, 0, vec({1, 1.2, 1.5}), blocks) == vec({0, 0, 1.5}));
  CHECK_THROWS_AS(protocol_jump(ProtocolKind::TOD, 0, vec({1, 1}), std::vector<int>{}), Error);
  CHECK_THROWS_AS(protocol_jump(ProtocolKind::TOD, 0, vec({1, 1}), kOneNode), Error);
}

TEST_CASE("Rng is reproducible and streams differ") {
  Rng a(42), b(42), c(Rng::derive(42, 1));
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(Rng(Rng::derive(42, 1)).uniform() != Rng(Rng::derive(42, 2)).uniform());
  CHECK(c.uniform(2.0, 3.0) >= 2.0);
  double sum = 0, sq = 0;
  Rng n(9);
  for (int i = 0; i < 20000; ++i) {
    const double z = n.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / 20000) < 0.03);
  CHECK(std::abs(sq / 20000 - 1.0) < 0.05);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(Schedule::constant(0.0), Error);
  CHECK_THROWS_AS(Schedule::uniform_random(0.0, 1.0, 1), Error);
  CHECK_THROWS_AS(Schedule::uniform_random(2.0, 1.0, 1), Error);
  CHECK(Schedule::uniform_random(0.1, 0.5, 1).max_interval() == 0.5);
}

TEST_CASE("zero initial condition gives the zero trace") {
  const HybridTrace tr = simulate(NcsDynamics::linear(example2()), ProtocolKind::TOD, kTwoNodes,
                                  Schedule::constant(0.1, 5.0), vec({0, 0}), vec({0, 0}),
                                  with_step(0.01));
  for (const TracePoint& p : tr.points) {
    CHECK(p.x.norm() == 0.0);
    CHECK(p.e.norm() == 0.0);
  }
  check_hybrid_domain(tr);
  const MonitorReport m =
      monitor_lyapunov(tr, QuadraticLyapunov{SymMatrix::identity(2)}, {0.1, 1.0, std::sqrt(0.5)});
  CHECK(m.u0 == 0.0);
  CHECK(m.violations == 0);
  CHECK(summarize(tr).verdict == "stable");
}

TEST_CASE("trace structure") {
  const HybridTrace tr = simulate(NcsDynamics::linear(example2()), ProtocolKind::TOD, kTwoNodes,
                                  Schedule::uniform_random(0.01, 0.2, 5, 10.0), vec({1, 0}),
                                  vec({0, 0}), with_step(0.01));
  check_hybrid_domain(tr);
  REQUIRE(!tr.jumps.empty());
  CHECK(tr.points.back().t == doctest::Approx(10.0));
  CHECK(static_cast<long>(tr.jumps.size()) == tr.points.back().j);
  CHECK(tr.points.back().kappa == tr.points.back().j);
  for (std::size_t i = 1; i < tr.points.size(); ++i) {
    const TracePoint& a = tr.points[i - 1];
    const TracePoint& b = tr.points[i];
    if (b.event == TraceEvent::Jump) {
      CHECK(b.t == a.t);
      CHECK(b.j == a.j + 1);
      CHECK(b.tau == 0.0);
      CHECK(b.x == a.x);
    }
  }
  for (const JumpRecord& j : tr.jumps) CHECK(j.e_after(j.node) == 0.0);

  HybridTrace broken = tr;
  broken.points[3].t = -1.0;
  CHECK_THROWS_AS(check_hybrid_domain(broken), Error);
}

TEST_CASE("simulate preconditions and divergence") {
  const NcsDynamics dyn = NcsDynamics::linear(example2());
  CHECK_THROWS_AS(simulate(dyn, ProtocolKind::TOD, kTwoNodes, Schedule::constant(0.1), vec({1, 0}),
                           vec({0, 0}), with_step(0.05)),
                  Error);
  CHECK_THROWS_AS(simulate(dyn, ProtocolKind::TOD, kTwoNodes, Schedule::constant(0.1), vec({1}),
                           vec({0, 0}), with_step(0.01)),
                  Error);
  const HybridTrace tr = simulate(dyn, ProtocolKind::TOD, kTwoNodes, Schedule::constant(5.0, 1000.0),
                                  vec({1, 0}), vec({0, 0}), with_step(0.05));
  CHECK(tr.diverged);
  CHECK(summarize(tr).verdict == "diverged");
}

TEST_CASE("example 2 decays at T = 0.05 from random unit initial states") {
  const NcsDynamics dyn = NcsDynamics::linear(example2());
  Rng rng(20210601);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd z(4);
    for (int k = 0; k < 4; ++k) z(k) = rng.normal();
    z.normalize();
    const HybridTrace tr = simulate(dyn, ProtocolKind::TOD, kTwoNodes, Schedule::constant(0.05),
                                    z.head(2), z.tail(2), with_step(0.005));
    const TraceSummary s = summarize(tr);
    CHECK(s.verdict == "stable");
    CHECK(s.decay_time > 0.0);
    CHECK(s.decay_time < 200.0);
    CHECK(s.decay_rate < 0.0);
  }
}

TEST_CASE("example 1 converges at T = 0.7") {
  const HybridTrace tr = simulate(NcsDynamics::example1(1.0), ProtocolKind::SampledData, kOneNode,
                                  Schedule::constant(0.7), vec({1}), vec({0}), with_step(0.01));
  CHECK(summarize(tr).verdict == "stable");
  CHECK(std::abs(tr.points.back().x(0)) < 1e-6);
}

TEST_CASE("RK4 order") {
  const NcsDynamics dyn = NcsDynamics::linear(example2());
  auto final_state = [&](double h) {
    const HybridTrace tr = simulate(dyn, ProtocolKind::TOD, kTwoNodes, Schedule::constant(0.4, 4.0),
                                    vec({1, -0.5}), vec({0.2, 0.1}), with_step(h));
    Eigen::VectorXd z(4);
    z << tr.points.back().x, tr.points.back().e;
    return z;
  };
  const Eigen::VectorXd a = final_state(0.04), b = final_state(0.02), c = final_state(0.01);
  const double order = std::log2((a - b).norm() / (b - c).norm());
  CHECK(order >= 3.9);
}

TEST_CASE("lyapunov monitor") {
  const NcsDynamics dyn = NcsDynamics::example1(1.0);
  const GainTriple g{0.738, 1.544, 0.0};
  const HybridTrace tr = simulate(dyn, ProtocolKind::SampledData, kOneNode,
                                  Schedule::uniform_random(7.909e-4, 0.7909, 3, 50.0), vec({1.5}),
                                  vec({0}), with_step(0.005));
  const MonitorReport m = monitor_lyapunov(tr, QuarticLyapunov{0.3578, 1.431}, g);
  CHECK(m.violations == 0);
  CHECK(m.jump_checks == static_cast<long>(tr.jumps.size()));

  const HybridTrace long_gap = simulate(dyn, ProtocolKind::SampledData, kOneNode,
                                        Schedule::constant(0.9, 5.0), vec({1}), vec({0}),
                                        with_step(0.01));
  CHECK_THROWS_AS(monitor_lyapunov(long_gap, QuarticLyapunov{0.3578, 1.431}, g), Error);
  CHECK(lyapunov_value(QuarticLyapunov{0.5, 2.0}, vec({2})) == doctest::Approx(16.0));
}

TEST_CASE("verify_lambda") {
  const LambdaSample tod = verify_lambda(ProtocolKind::TOD, 2, 2000, 1);
  CHECK(tod.sup <= std::sqrt(0.5) + 1e-12);
  CHECK(tod.sup >= std::sqrt(0.5) - 1e-12);
  CHECK(std::abs(std::abs(tod.worst_e(0)) - std::abs(tod.worst_e(1))) < 1e-9);
  CHECK(verify_lambda(ProtocolKind::SampledData, 1, 100, 1).sup == 0.0);
  const LambdaSample rr = verify_lambda(ProtocolKind::RR, 2, 100, 1);
  CHECK(rr.sup == doctest::Approx(1.0));
  CHECK(rr.analytic == 1.0);
  for (int l : {3, 5, 8}) {
    const LambdaSample s = verify_lambda(ProtocolKind::TOD, l, 500, 2);
    CHECK(s.sup <= s.analytic + 1e-12);
  }
}

TEST_CASE("flow transition matches a fine RK4 flow") {
  const LinearNcs sys = example2();
  const Eigen::MatrixXd phi = flow_transition(sys, 0.3);
  const HybridTrace tr = simulate(NcsDynamics::linear(sys), ProtocolKind::TOD, kTwoNodes,
                                  Schedule::constant(1.0, 0.3), vec({1, 2}), vec({3, 4}),
                                  with_step(0.001));
  Eigen::VectorXd z(4);
  z << tr.points.back().x, tr.points.back().e;
  CHECK((phi * vec({1, 2, 3, 4}) - z).norm() < 1e-10);
}

TEST_CASE("RR monodromy radius") {
  const LinearNcs sys = example2();
  const double tiny = monodromy_radius_rr(sys, 1e-8, kTwoNodes);
  CHECK(tiny < 1.0);
  CHECK(tiny > 1.0 - 1e-6);
  CHECK(monodromy_radius_rr(sys, 0.1399, kTwoNodes) < 1.0);
  CHECK(monodromy_radius_rr(sys, 0.2817, kTwoNodes) < 1.0);
  const double big = monodromy_radius_rr(sys, 10.0, kTwoNodes);
  CHECK(big == doctest::Approx(68195.2).epsilon(1e-4));
  CHECK_THROWS_AS(monodromy_radius_rr(sys, 0.0, kTwoNodes), Error);
}

TEST_CASE("empirical_mati") {
  const std::vector<int> nodes = kTwoNodes;
  const EmpiricalResult rr =
      empirical_mati(NcsDynamics::linear(example2()), ProtocolKind::RR, nodes, 0.1, 3.0);
  CHECK(rr.found);
  CHECK(rr.criterion == StabilityCriterion::Monodromy);
  CHECK(rr.boundary > 0.2817);
  CHECK(monodromy_radius_rr(example2(), rr.boundary - 2e-4, nodes) < 1.0);
  CHECK(monodromy_radius_rr(example2(), rr.boundary + 2e-4, nodes) >= 1.0);

  LinearNcs dec;
  dec.A = -Eigen::MatrixXd::Identity(2, 2);
  dec.E = Eigen::MatrixXd::Zero(2, 2);
  dec.C = Eigen::MatrixXd::Zero(2, 2);
  dec.F = Eigen::MatrixXd::Zero(2, 2);
  EmpiricalOptions quick;
  quick.horizon = 40.0;
  const EmpiricalResult none =
      empirical_mati(NcsDynamics::linear(dec), ProtocolKind::TOD, nodes, 0.1, 2.0, quick);
  CHECK_FALSE(none.found);
  CHECK(none.boundary == 2.0);

  const EmpiricalResult ex1 =
      empirical_mati(NcsDynamics::example1(0.0), ProtocolKind::SampledData, kOneNode, 0.5, 3.0);
  CHECK(ex1.found);
  CHECK(ex1.boundary >= 0.7909);

  CHECK_THROWS_AS(
      empirical_mati(NcsDynamics::linear(example2()), ProtocolKind::RR, nodes, 2.0, 3.0), Error);
}
