#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qtherm/cycles.hpp"
#include "qtherm/lindblad.hpp"

using namespace qtherm;
using namespace qtherm::cycles;
using qcore::CMat;
using qcore::cplx;
using qcore::I;
using std::numbers::pi;

namespace {

void check_first_law(const CycleReport& r, double rel = 1e-9) {
  double scale = 0.0;
  for (const auto& s : r.strokes) scale = std::max({scale, std::abs(s.work), std::abs(s.heat)});
  CHECK(r.first_law_residual() <= rel * std::max(scale, 1e-300));
}

bool throws_kind(ErrorKind k, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == k;
  }
  return false;
}

}  // namespace

TEST_CASE("maser inversion and performance") {
  MaserReport m = maser_analyze(3, 2, 2, 1);
  CHECK(m.inversion);
  CHECK(m.mode == MachineMode::Engine);
  CHECK(*m.efficiency == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(*m.efficiency <= 0.5);

  MaserReport carnot = maser_analyze(4, 2, 2, 1);
  CHECK(carnot.inversion);
  CHECK(*carnot.efficiency == doctest::Approx(0.5).epsilon(1e-15));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int k = 0; k < 200; ++k) {
    double wh = 5.0, wc = wh * u(rng), t = 0.3 + 3.0 * u(rng);
    MaserReport eq = maser_analyze(wh, wc, t, t);
    CHECK_FALSE(eq.inversion);
    CHECK(eq.mode == MachineMode::Refrigerator);
    double th = 3.0, tc = th * u(rng);
    MaserReport r = maser_analyze(wh, wc, th, tc);
    if (r.mode == MachineMode::Engine) CHECK(*r.efficiency <= 1.0 - tc / th + 1e-12);
    if (r.mode == MachineMode::Refrigerator) CHECK(*r.cop <= tc / (th - tc) + 1e-12);
  }
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { maser_analyze(1, 2, 2, 1); }));
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { maser_analyze(3, 2, 1, 2); }));
}

TEST_CASE("particle-in-box Carnot cycle") {
  CycleReport r = box_carnot(2, 1, 1);
  CHECK(r.net_work_output == doctest::Approx(pi * pi * 0.75 * std::log(2.0)).epsilon(1e-12));
  CHECK(*r.efficiency == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.mode == MachineMode::Engine);
  check_first_law(r);

  // Per-stroke work against the antiderivatives of the wall force.
  for (auto [la, lb, m] : {std::tuple{2.0, 1.0, 1.0}, std::tuple{3.0, 1.7, 0.4}, std::tuple{1.2, 0.5, 2.5}}) {
    CycleReport b = box_carnot(la, lb, m);
    const double c = pi * pi / m;
    auto cubic = [](double k, double from, double to) { return 0.5 * k * (1.0 / (from * from) - 1.0 / (to * to)); };
    CHECK(b.strokes[0].work == doctest::Approx(-cubic(c, la, lb)).epsilon(1e-9));
    CHECK(b.strokes[1].work == doctest::Approx(-c / (lb * lb) * std::log(2.0)).epsilon(1e-9));
    CHECK(b.strokes[2].work == doctest::Approx(-cubic(4 * c, 2 * lb, 2 * la)).epsilon(1e-9));
    CHECK(b.strokes[3].work == doctest::Approx(c / (la * la) * std::log(2.0)).epsilon(1e-9));
    CHECK(b.q_hot == doctest::Approx(c / (lb * lb) * std::log(2.0)).epsilon(1e-8));
    CHECK(b.net_work_output == doctest::Approx(c * (1 / (lb * lb) - 1 / (la * la)) * std::log(2.0)).epsilon(1e-8));
    CHECK(*b.efficiency == doctest::Approx(1 - lb * lb / (la * la)).epsilon(1e-8));
    check_first_law(b);
    for (const auto& s : b.strokes)
      if (s.kind == StrokeKind::IsentropicCompression || s.kind == StrokeKind::IsentropicExpansion)
        CHECK(s.heat == 0.0);
  }
  CycleReport thin = box_carnot(1.0, 1.0 - 1e-9, 1.0);
  CHECK(std::abs(thin.net_work_output) < 1e-7);
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { box_carnot(1, 2, 1); }));
}

TEST_CASE("ideal Otto cycle closed forms") {
  CycleReport r = otto_qho(2, 1, 4, 1);
  CHECK(r.mode == MachineMode::Engine);
  CHECK(*r.efficiency == doctest::Approx(0.5));
  CHECK(r.carnot_margin == doctest::Approx(0.25));
  auto coth = [](double x) { return 1 / std::tanh(x); };
  CHECK(r.strokes[0].work == doctest::Approx(-0.5 * coth(0.25)).epsilon(1e-14));
  CHECK(r.strokes[2].work == doctest::Approx(0.5 * coth(0.5)).epsilon(1e-14));
  CHECK(r.strokes[1].heat == doctest::Approx(0.5 * (coth(0.5) - coth(0.25))).epsilon(1e-14));
  CHECK(r.strokes[1].work == 0.0);
  CHECK(r.strokes[3].work == 0.0);
  CHECK(r.strokes[0].heat == 0.0);
  check_first_law(r);

  // Carnot point: ratio equals the temperature ratio.
  CycleReport cp = otto_qho(2, 0.5, 4, 1);
  for (const auto& s : cp.strokes) CHECK(std::abs(s.heat) < 1e-14);
  CHECK(std::abs(cp.net_work_output) < 1e-14);
  CHECK(std::abs(cp.q_hot) < 1e-14);

  CycleReport null = otto_qho(1.5, 1.5, 3, 1);
  for (const auto& s : null.strokes) CHECK(s.work == 0.0);
  CHECK(null.net_work_output == 0.0);
  CHECK(null.q_hot == doctest::Approx(-null.q_cold).epsilon(1e-15));
  CHECK(null.mode == MachineMode::Off);

  CycleReport fridge = otto_qho(2, 0.4, 4, 1);
  CHECK(fridge.mode == MachineMode::Refrigerator);
  CHECK(*fridge.cop == doctest::Approx(0.4 / 1.6).epsilon(1e-12));
  CHECK(*fridge.cop <= 1.0 / 3.0);
}

TEST_CASE("Carnot bound and first law across random cycles") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  int engines = 0, fridges = 0;
  for (int k = 0; k < 1000; ++k) {
    double th = 0.5 + 5 * u(rng), tc = th * u(rng), wa = 0.2 + 4 * u(rng), wb = wa * u(rng);
    CycleReport o = otto_qho(wa, wb, th, tc);
    check_first_law(o);
    CHECK(o.carnot_margin >= -1e-9);
    engines += o.mode == MachineMode::Engine;
    fridges += o.mode == MachineMode::Refrigerator;
    CycleReport t = two_stroke(wa, wb, th, tc, pi * u(rng));
    check_first_law(t);
    CHECK(t.carnot_margin >= -1e-9);
    if (t.mode == MachineMode::Engine) CHECK(*t.efficiency <= 1 - tc / th + 1e-9);
    if (t.mode == MachineMode::Refrigerator) CHECK(*t.cop <= tc / (th - tc) + 1e-9);
    SqueezedOttoReport s = otto_squeezed(wa, wb, th, tc, 1.5 * u(rng));
    check_first_law(s.cycle);
    CHECK(s.cycle.carnot_margin >= -1e-9);
    CHECK(s.generalized_carnot >= 1 - tc / th - 1e-15);
  }
  CHECK(engines > 100);
  CHECK(fridges > 100);
}

TEST_CASE("efficiency at maximum power") {
  MaxPowerPoint p = otto_max_power(4, 1);
  CHECK(p.ratio == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(p.efficiency == doctest::Approx(0.5).epsilon(1e-7));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int k = 0; k < 20; ++k) {
    double th = 0.1 + 10 * u(rng), tc = th * u(rng);
    MaxPowerPoint q = otto_max_power(th, tc);
    CHECK(std::abs(q.ratio - std::sqrt(tc / th)) < 1e-6);
    CHECK(q.efficiency < 1 - tc / th);
  }
  CHECK(otto_max_power(1.0, 1.0 - 1e-6).efficiency < 1e-6);
}

TEST_CASE("squeezed hot bath") {
  SqueezedOttoReport zero = otto_squeezed(2, 1, 4, 1, 0.0);
  CycleReport plain = otto_qho(2, 1, 4, 1);
  for (size_t k = 0; k < 4; ++k) {
    CHECK(zero.cycle.strokes[k].work == plain.strokes[k].work);
    CHECK(zero.cycle.strokes[k].heat == plain.strokes[k].heat);
  }
  CHECK(zero.efficiency_at_max_power == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(zero.generalized_carnot == doctest::Approx(0.75));

  const double sh2 = std::pow(std::sinh(1.0), 2);
  SqueezedOttoReport one = otto_squeezed(2, 1, 2, 1, 1.0);
  CHECK(std::abs(one.efficiency_at_max_power - (1 - std::sqrt(1.0 / (2 * (1 + 2 * sh2))))) < 1e-6);
  CHECK(one.generalized_carnot == doctest::Approx(1 - 1.0 / (2 * (1 + 2 * sh2))));
  CHECK(*one.cycle.efficiency == doctest::Approx(0.5));
  // Hot-isochore heat with the scaled initial energy.
  auto coth = [](double x) { return 1 / std::tanh(x); };
  const double n0 = 1 / std::expm1(2.0 / 2.0);
  const double factor = 1 + (2 + 1 / n0) * sh2;
  CHECK(one.cycle.q_hot == doctest::Approx(1.0 * (coth(0.5) * factor - coth(0.5))).epsilon(1e-13));

  double last = 0.0;
  for (double r : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    SqueezedOttoReport s = otto_squeezed(2, 1, 2, 1, r);
    CHECK(s.efficiency_at_max_power <= s.generalized_carnot);
    CHECK(s.efficiency_at_max_power > last);
    last = s.efficiency_at_max_power;
  }
  CHECK(last > 0.99);
}

TEST_CASE("two-stroke machine against an explicit two-qubit unitary") {
  const double wk = 1.7, wu = 0.9, th = 3.0, tc = 1.0;
  const double nk = two_level_excited_population(wk, th), nu = two_level_excited_population(wu, tc);
  CMat rk = CMat::Zero(2, 2), ru = CMat::Zero(2, 2);
  rk(0, 0) = nk;  // |0> is the upper level
  rk(1, 1) = 1 - nk;
  ru(0, 0) = nu;
  ru(1, 1) = 1 - nu;
  CHECK(nk / (1 - nk) == doctest::Approx(std::exp(-2 * wk / th)));
  const CMat hk = qcore::kron(wk * qcore::pauli_z(), CMat::Identity(2, 2));
  const CMat hu = qcore::kron(CMat::Identity(2, 2), wu * qcore::pauli_z());
  const CMat rho = qcore::kron(rk, ru);
  for (double theta : {0.0, pi / 4, pi / 2, pi}) {
    CMat gen = CMat::Zero(4, 4);
    gen(1, 2) = 1.0;
    gen(2, 1) = 1.0;
    CMat u = qcore::matrix_exp(gen, -I * theta);
    CMat after = u * rho * u.adjoint();
    const double dek = qcore::expectation(after, hk) - qcore::expectation(rho, hk);
    const double deu = qcore::expectation(after, hu) - qcore::expectation(rho, hu);
    CycleReport r = two_stroke(wk, wu, th, tc, theta);
    CHECK(std::abs(r.q_hot + dek) < 1e-12);
    CHECK(std::abs(r.q_cold + deu) < 1e-12);
    CHECK(std::abs(r.total_work() - (dek + deu)) < 1e-12);
  }
  CycleReport idle = two_stroke(wk, wu, th, tc, 0.0);
  CHECK(idle.mode == MachineMode::Off);
  for (const auto& s : idle.strokes) CHECK(s.work + s.heat == 0.0);
}

TEST_CASE("two-stroke Carnot point sign reversal") {
  // T_c/T_h = 0.5 and omega_k = 5: every exchange changes sign at omega_un = 2.5.
  CycleReport at = two_stroke(5, 2.5, 2, 1, pi / 3);
  CHECK(std::abs(at.q_hot) < 1e-15);
  CHECK(std::abs(at.q_cold) < 1e-15);
  CHECK(std::abs(at.total_work()) < 1e-15);
  CycleReport below = two_stroke(5, 2.4, 2, 1, pi / 3), above = two_stroke(5, 2.6, 2, 1, pi / 3);
  CHECK(below.mode == MachineMode::Refrigerator);
  CHECK(above.mode == MachineMode::Engine);
  CHECK(below.q_hot * above.q_hot < 0);
  CHECK(below.q_cold * above.q_cold < 0);
  CHECK(below.total_work() * above.total_work() < 0);
  CHECK(*above.efficiency == doctest::Approx(1 - 2.6 / 5));
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { two_stroke(1, 2, 2, 1, 0.1); }));
  CHECK(throws_kind(ErrorKind::InvalidParams, [] { two_stroke(2, 1, 2, 1, 4.0); }));
}

TEST_CASE("ramp unitary against direct propagation of the truncated oscillator") {
  const int n = 60;
  const double wa = 2, wb = 1;
  CMat x2 = (oscillator_hamiltonian(1, wa, n) - oscillator_hamiltonian(0, wa, n)) * 2.0;
  CMat p2 = oscillator_hamiltonian(0, wa, n) * 2.0;
  auto ham = [&](double w) { return CMat(0.5 * p2 + 0.5 * w * w * x2); };
  // A state far from the cutoff, where truncating the Hamiltonian is harmless.
  CMat probe = qcore::gibbs_matrix(ham(wa), 1.0);
  for (double tau : {0.5, 3.0}) {
    auto h = [&](double t) { return ham(wa + (wb - wa) * t / tau); };
    CMat u = qcore::magnus4_propagator(h, 0, tau, 2000);
    CMat v = ramp_unitary(wa, wb, tau, wa, n);
    CHECK(qcore::trace_distance(u * probe * u.adjoint(), v * probe * v.adjoint()) < 1e-9);
    CHECK((v * v.adjoint() - CMat::Identity(n + 1, n + 1)).norm() < 1e-12);
  }
  // Constant frequency: pure rotation exp(-i w t n) up to a global phase.
  CMat rot = ramp_unitary(wa, wa, 1.3, wa, 20);
  const cplx ref = rot(0, 0);
  for (int k = 0; k <= 20; ++k) CHECK(std::abs(rot(k, k) / ref - std::exp(-I * (wa * 1.3 * k))) < 1e-10);
}

TEST_CASE("numeric Otto cycle approaches the ideal one") {
  double previous = std::numeric_limits<double>::infinity();
  for (double tau : {10.0, 40.0, 160.0, 640.0}) {
    OttoNumericReport r = otto_numeric(2, 1, 4, 1, tau, 200, 60);
    check_first_law(r.cycle);
    CHECK(r.friction >= -1e-9 * std::abs(r.ideal_work_output));
    CHECK(std::abs(r.friction) < previous);
    previous = std::abs(r.friction);
  }
  CHECK(previous < 1e-5 * 0.96);

  OttoNumericReport fast = otto_numeric(2, 1, 4, 1, 0.5, 200, 60);
  CHECK(fast.cycle.net_work_output < fast.ideal_work_output - 1e-3);

  OttoNumericReport slow = otto_numeric(2, 1, 4, 1, 40, 400, 60);
  const double ref = std::sqrt(2.0);
  CMat gibbs_b = qcore::gibbs_matrix(oscillator_hamiltonian(1, ref, 60), 1.0);
  CMat gibbs_a = qcore::gibbs_matrix(oscillator_hamiltonian(2, ref, 60), 4.0);
  CHECK(qcore::trace_distance(slow.state_after_cold, gibbs_b) < 1e-8);
  CHECK(qcore::trace_distance(slow.state_after_hot, gibbs_a) < 1e-8);

  CHECK(throws_kind(ErrorKind::CutoffTooSmall, [] { otto_numeric(2, 1, 4, 1, 10, 100, 10); }));
  QHOSpec spec{2.0, 60};
  CHECK(spec.tail_population(4.0) == doctest::Approx((1 - std::exp(-0.5)) * std::exp(-30.0)));
}

TEST_CASE("outcoupled engine: measurement equivalence and inter-cycle coherence") {
  OutcoupledParams p = OutcoupledParams::reference();
  CHECK(p.oscillator_freq * p.period == doctest::Approx(2 * pi * 0.05));
  CHECK(p.max_gap() == doctest::Approx(2 * std::sqrt(1 + 25.0)));

  // Mean-amplitude recursion: the kick displaces the oscillator by -i g s for
  // engine outcome s = +-1 along sigma_x, then it rotates freely for one period.
  auto h_engine = [&](double t, const CMat& r) {
    CMat h = p.delta * qcore::pauli_x() - p.sweep_rate * t * qcore::pauli_z();
    return CMat(-I * (h * r - r * h));
  };
  CMat cold = qcore::gibbs_matrix(p.delta * qcore::pauli_x(), 1 / p.beta_cold);
  CMat at_kick = lindblad::integrate_master_equation(h_engine, cold, 0, p.kick_fraction * p.period, 1e-12);
  const double mean_s = qcore::expectation(at_kick, qcore::pauli_x());
  const cplx shift = -I * p.coupling * mean_s;
  const cplx turn = std::exp(-I * p.oscillator_freq * p.period);

  cplx amp = 0.0;
  double quanta = 0.0;
  bool coherent_gain = false;
  for (int n = 1; n <= 10; ++n) {
    quanta += p.coupling * p.coupling + 2 * (std::conj(shift) * amp).real();
    amp = turn * (amp + shift);
    const double with = outcoupled_multicycle(p, n, false);
    const double measured = outcoupled_multicycle(p, n, true);
    const double chain = outcoupled_projective_work(p, n);
    CHECK(std::abs(with - p.oscillator_freq * quanta) < 1e-9 * p.oscillator_freq * quanta);
    CHECK(std::abs(measured - n * p.oscillator_freq * p.coupling * p.coupling) < 1e-12);
    CHECK(std::abs(measured - chain) < 1e-12);
    if (n == 1) CHECK(with == measured);
    if (n >= 2 && with > measured * (1 + 1e-6)) coherent_gain = true;
  }
  CHECK(coherent_gain);

  OutcoupledParams tiny = p;
  tiny.cutoff = 2;
  CHECK(throws_kind(ErrorKind::CutoffTooSmall, [&] { outcoupled_multicycle(tiny, 10, false); }));
}

TEST_CASE("indistinguishable atoms do more work") {
  IndistinctParams p = IndistinctParams::reference();
  CHECK(p.kick_time == doctest::Approx(3.5));
  CHECK(outcoupled_indistinct_ratio(1, p) == doctest::Approx(1.0).epsilon(1e-12));
  double last = 1.0;
  for (int n = 2; n <= 8; ++n) {
    double e = outcoupled_indistinct_ratio(n, p);
    CHECK(e > last);
    last = e;
  }

  CHECK(kicked_variance_distinguishable(1, p) == doctest::Approx(1.0).epsilon(1e-12));

  auto h_of = [&](const CMat& x, const CMat& z) {
    return [&, x, z](double t) { return CMat(p.delta * x + (p.omega0 + p.sweep_rate * t) * z); };
  };
  for (int n = 2; n <= 3; ++n) {
    // Dense register of n qubits.
    const int d = 1 << n;
    CMat x = CMat::Zero(d, d), z = CMat::Zero(d, d);
    for (int j = 0; j < n; ++j) {
      x += qcore::embed(qcore::pauli_x(), j, n, 2);
      z += qcore::embed(qcore::pauli_z(), j, n, 2);
    }
    CMat u = qcore::magnus4_propagator(h_of(x, z), 0, p.kick_time, 4000);
    CMat v = u.adjoint() * x * u;
    CMat rho = qcore::gibbs_matrix(CMat(p.delta * x + p.omega0 * z), 1 / p.beta_cold);
    CHECK(qcore::expectation(rho, CMat(v * v)) ==
          doctest::Approx(kicked_variance_distinguishable(n, p)).epsilon(1e-9));

    // Bosonic case: the same register restricted to its symmetric subspace.
    CMat total_sq = CMat::Zero(d, d);
    for (const auto& op : {qcore::pauli_x(), qcore::pauli_y(), qcore::pauli_z()}) {
      CMat sum = CMat::Zero(d, d);
      for (int j = 0; j < n; ++j) sum += qcore::embed(op, j, n, 2) / 2.0;
      total_sq += sum * sum;
    }
    qcore::EigenSystem es = qcore::hermitian_eig(total_sq);
    const double jmax = n / 2.0 * (n / 2.0 + 1);
    std::vector<int> cols;
    for (int k = 0; k < d; ++k)
      if (std::abs(es.values(k) - jmax) < 1e-9) cols.push_back(k);
    REQUIRE(cols.size() == static_cast<size_t>(n + 1));
    CMat basis(d, n + 1);
    for (int k = 0; k <= n; ++k) basis.col(k) = es.vectors.col(cols[k]);
    CMat xs = basis.adjoint() * x * basis, zs = basis.adjoint() * z * basis;
    CMat us = qcore::magnus4_propagator(h_of(xs, zs), 0, p.kick_time, 4000);
    CMat vs = us.adjoint() * xs * us;
    CMat rs = qcore::gibbs_matrix(CMat(p.delta * xs + p.omega0 * zs), 1 / p.beta_cold);
    CHECK(qcore::expectation(rs, CMat(vs * vs)) ==
          doctest::Approx(kicked_variance_indistinguishable(n, p)).epsilon(1e-9));
  }
}

TEST_CASE("stroke and continuous machines converge at small bath action") {
  std::vector<double> logs, logd;
  for (double tau : {0.2, 0.1, 0.05, 0.02}) {
    EquivalencePoint e = stroke_continuous_equivalence(tau);
    CHECK(e.bath_action > 0);
    CHECK(e.work_continuous != 0.0);
    logs.push_back(std::log(e.bath_action));
    logd.push_back(std::log(std::abs(e.work_continuous - e.work_stroke)));
  }
  // Least-squares slope of log |dW| against log s.
  double ms = 0, md = 0;
  for (size_t k = 0; k < logs.size(); ++k) {
    ms += logs[k] / logs.size();
    md += logd[k] / logs.size();
  }
  double num = 0, den = 0;
  for (size_t k = 0; k < logs.size(); ++k) {
    num += (logs[k] - ms) * (logd[k] - md);
    den += (logs[k] - ms) * (logs[k] - ms);
  }
  CHECK(num / den > 2.5);

  // Continuous work per cycle is linear in the cycle time.
  EquivalencePoint a = stroke_continuous_equivalence(0.1), b = stroke_continuous_equivalence(0.3);
  CHECK(b.work_continuous == doctest::Approx(3 * a.work_continuous).epsilon(1e-9));
  CHECK(b.bath_action == doctest::Approx(3 * a.bath_action).epsilon(1e-9));
}
