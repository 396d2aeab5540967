#include <cmath>
#include <random>

#include "doctest.h"
#include "qtherm/metrology.hpp"

using namespace qtherm;
using namespace qtherm::metrology;
using qcore::CMat;
using qcore::CVec;
using qcore::I;

namespace {

bool throws_kind(ErrorKind k, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == k;
  }
  return false;
}

// Qubit with levels +-omega/2 at temperature T; p is the upper population.
ParamFamily thermal_qubit(double omega) {
  return {[omega](double t) { return qcore::gibbs_matrix(CMat(0.5 * omega * qcore::pauli_z()), t); }};
}

// Smooth full-rank family rho(theta) = V(theta) diag(p(theta)) V(theta)^+.
ParamFamily random_family(int d, std::mt19937_64& rng) {
  CMat h = qcore::random_hermitian(d, rng), k = qcore::random_hermitian(d, rng);
  return {[h, k, d](double th) {
    CMat v = qcore::matrix_exp(CMat(h + th * k), -I);
    CMat diag = CMat::Zero(d, d);
    double z = 0;
    for (int i = 0; i < d; ++i) z += std::exp(-(i + 1) * (1 + 0.3 * std::sin(th + i)));
    for (int i = 0; i < d; ++i) diag(i, i) = std::exp(-(i + 1) * (1 + 0.3 * std::sin(th + i))) / z;
    return CMat(v * diag * v.adjoint());
  }};
}

std::vector<CMat> random_projective(int d, std::mt19937_64& rng) {
  CMat u = qcore::random_unitary(d, rng);
  std::vector<CMat> out;
  for (int i = 0; i < d; ++i) out.push_back(u.col(i) * u.col(i).adjoint());
  return out;
}

}  // namespace

TEST_CASE("symmetric logarithmic derivative") {
  ParamFamily still{[](double) { return CMat(qcore::gibbs_matrix(qcore::pauli_x(), 0.7)); }};
  CHECK(sld(still, 0.3).cwiseAbs().maxCoeff() < 1e-9);

  // Diagonal family: L_ii = d ln p_i / dT.
  const double omega = 1.0, t = 1.0;
  CMat l = sld(thermal_qubit(omega), t);
  const double p_up = 1 / (1 + std::exp(omega / t)), dp = omega / (t * t) * p_up * (1 - p_up);
  CHECK(l(0, 0).real() == doctest::Approx(dp / p_up).epsilon(1e-8));
  CHECK(l(1, 1).real() == doctest::Approx(-dp / (1 - p_up)).epsilon(1e-8));
  CHECK(std::abs(l(0, 1)) < 1e-10);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    ParamFamily f = random_family(3, rng);
    CMat lf = sld(f, 0.4), rho = f.generator(0.4);
    CHECK((f.derivative(0.4) - 0.5 * (lf * rho + rho * lf)).norm() < 1e-8);
    CHECK((lf - lf.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  }

  // A rank-one family whose derivative leaks into the kernel-kernel block.
  ParamFamily leaky{[](double th) {
    CMat r = CMat::Zero(2, 2);
    r(0, 0) = 1 - th;
    r(1, 1) = th;
    return r;
  }};
  leaky.dtheta = 1e-3;
  CHECK(throws_kind(ErrorKind::SingularState, [&] { sld(leaky, 0.0); }));
}

TEST_CASE("quantum Fisher information closed forms") {
  const double omega = 1.0, t = 1.0;
  const double p = 1 / (1 + std::exp(omega / t)), dp = omega / (t * t) * p * (1 - p);
  FisherReport r = qfi(thermal_qubit(omega), t);
  CHECK(r.qfi == doctest::Approx(dp * dp * (1 / p + 1 / (1 - p))).epsilon(1e-8));
  CHECK(r.cramer_rao_floor == doctest::Approx(1 / r.qfi));

  // Pure-state family: 4 (<d psi|d psi> - |<psi|d psi>|^2).
  std::mt19937_64 rng(11);
  CMat h = qcore::random_hermitian(4, rng);
  CVec psi0 = qcore::random_pure(4, rng);
  auto psi = [&](double th) { return CVec(qcore::matrix_exp(h, -I * th) * psi0); };
  ParamFamily pure{[&](double th) {
    CVec v = psi(th);
    return CMat(v * v.adjoint());
  }};
  const double th = 0.8;
  CVec v = psi(th), dv = -I * h * v;
  const double expected = 4 * (dv.squaredNorm() - std::norm(v.dot(dv)));
  CHECK(qfi(pure, th).qfi == doctest::Approx(expected).epsilon(1e-8));
  // For a unitary family that is four times the variance of the generator.
  const double var = (v.adjoint() * h * h * v)(0).real() - std::pow((v.adjoint() * h * v)(0).real(), 2);
  CHECK(expected == doctest::Approx(4 * var).epsilon(1e-12));

  for (int trial = 0; trial < 10; ++trial) {
    ParamFamily f = random_family(trial % 2 ? 3 : 4, rng);
    FisherReport fr = qfi(f, 0.2);
    CMat rho = f.generator(0.2);
    CHECK((rho * fr.sld * fr.sld).trace().real() == doctest::Approx(fr.qfi).epsilon(1e-7));
    CHECK(fidelity_susceptibility(f, 0.2) == doctest::Approx(fr.qfi).epsilon(1e-6));
  }
  CHECK(fidelity_susceptibility(thermal_qubit(1.0), 1.0) == doctest::Approx(r.qfi).epsilon(1e-6));
}

TEST_CASE("classical Fisher information never exceeds the quantum one") {
  std::mt19937_64 rng(21);
  ParamFamily qubit = random_family(2, rng);
  const double qf = qfi(qubit, 0.5).qfi;
  for (int k = 0; k < 100; ++k) CHECK(cfi(qubit, 0.5, random_projective(2, rng)) <= qf + 1e-8);

  for (int trial = 0; trial < 5; ++trial) {
    ParamFamily f = random_family(3, rng);
    FisherReport fr = qfi(f, -0.3);
    // Projectors onto the SLD eigenvectors are optimal.
    qcore::EigenSystem es = qcore::hermitian_eig(fr.sld);
    std::vector<CMat> best;
    for (int i = 0; i < 3; ++i) best.push_back(es.vectors.col(i) * es.vectors.col(i).adjoint());
    CHECK(cfi(f, -0.3, best) == doctest::Approx(fr.qfi).epsilon(1e-7));
    FisherReport with = qfi(f, -0.3, best);
    CHECK(*with.cfi <= with.qfi + 1e-8);
    CHECK(cfi(f, -0.3, {CMat::Identity(3, 3)}) == doctest::Approx(0.0));
  }

  std::vector<CMat> broken = {CMat::Identity(2, 2) * 0.5};
  CHECK(throws_kind(ErrorKind::InvalidPOVM, [&] { cfi(qubit, 0.5, broken); }));
}

TEST_CASE("null locator") {
  CHECK(locate_null({0, 1, 2, 3}, {-3, -1, 1, 3}) == doctest::Approx(1.5));
  CHECK(locate_null({0, 1, 2}, {-1, 0, 1}) == 1.0);
  CHECK(throws_kind(ErrorKind::NullNotBracketed, [] { locate_null({0, 1, 2}, {0, 0, 0}); }));
  CHECK(throws_kind(ErrorKind::NullNotBracketed, [] { locate_null({0, 1, 2}, {1, 2, 3}); }));
}

TEST_CASE("Josephson dressing operator") {
  const double lam = 0.3;
  CMat a = josephson_dressing(lam, 6);
  const double x = 4 * lam * lam;
  for (int n = 0; n <= 6; ++n) {
    // L_n^(1)(x) = sum_k (-1)^k C(n + 1, n - k) x^k / k!
    double lag = 0.0;
    for (int k = 0; k <= n; ++k)
      lag += std::pow(-1.0, k) * std::tgamma(n + 2.0) / (std::tgamma(n - k + 1.0) * std::tgamma(k + 2.0)) *
             std::pow(x, k) / std::tgamma(k + 1.0);
    CHECK(a(n, n).real() == doctest::Approx(2 * lam * std::exp(-2 * lam * lam) * lag / (n + 1)).epsilon(1e-12));
  }
  CHECK((a - CMat(a.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("thermometer current and null protocol") {
  // Frequencies in temperature units: 1 GHz corresponds to 47.9924 mK.
  const double ghz = 47.9924;
  ThermometerModel m{8.5 * ghz, ghz, 0.06 * ghz, 0.06 * ghz, 1.2};
  for (double th : {90.0, 127.5, 170.0}) {
    const int n = std::max(thermometer_cutoff(m.omega_h, th), thermometer_cutoff(m.omega_c, 15));
    const double exact = thermometer_current_exact(m, th, 15);
    const double scale = thermometer_current_exact(m, 170, 15);
    CHECK(std::abs(thermometer_current(m, th, 15, n) - exact) < 1e-6 * scale);
  }
  CHECK(std::abs(thermometer_current_exact(m, 127.5, 15)) < 1e-15);

  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(100 + 3 * k);
  NullProtocolResult r = thermometry_simulate(m, 15, grid);
  CHECK(std::abs(r.null_location - 127.5) < 3.0);
  CHECK(std::abs(r.estimated_parameter - 15) < 3.0 / 8.5);
  CHECK(r.error_estimate == doctest::Approx(3.0 / 8.5));
  CHECK(r.sweep_trace.size() == grid.size());
  size_t k = 0;
  locate_null(grid, [&] {
    std::vector<double> ys;
    for (auto& [x, y] : r.sweep_trace) ys.push_back(y);
    return ys;
  }(), &k);
  CHECK(r.sweep_trace[k].second * r.sweep_trace[k + 1].second < 0);

  // Refining the grid by halves shrinks the estimate error at least as fast as the step.
  double last = std::numeric_limits<double>::infinity();
  for (double step : {8.0, 4.0, 2.0}) {
    std::vector<double> g;
    for (double th = 101.3; th <= 160; th += step) g.push_back(th);
    double err = std::abs(thermometry_simulate(m, 15, g).estimated_parameter - 15);
    CHECK(err <= 0.5 * last + 1e-9);
    last = err;
  }

  std::vector<double> cold_grid = {60, 70, 80, 90};
  CHECK(throws_kind(ErrorKind::NullNotBracketed, [&] { thermometry_simulate(m, 15, cold_grid); }));
  CHECK(throws_kind(ErrorKind::CutoffTooSmall, [&] { thermometer_current(m, 400, 15, 3); }));
}

TEST_CASE("thermometry error budget") {
  ThermometerModel m{8.5, 1.0, 0.06, 0.06, 0.05};
  ThermometryError e = thermometry_error(m, 0.3, 1e-3, 0.0);
  // Slope of the closed-form current with respect to the cold temperature.
  const double h = 1e-6;
  const double slope =
      (thermometer_current_exact(m, 0.3 * 8.5, 0.3 + h) - thermometer_current_exact(m, 0.3 * 8.5, 0.3 - h)) / (2 * h);
  CHECK(e.current_slope == doctest::Approx(slope).epsilon(1e-6));
  CHECK(e.delta_tc == doctest::Approx(1e-3 / std::abs(slope)).epsilon(1e-6));
  CHECK(e.alpha == doctest::Approx(e.delta_tc * 1.0 / (0.09 * std::sinh(1.0 / 0.6))));

  // Hot-temperature error enters suppressed by Omega_c / Omega_h.
  ThermometryError hot_only = thermometry_error(m, 0.3, 0.0, 1.0);
  CHECK(hot_only.delta_tc == doctest::Approx(1.0 / 8.5));
  ThermometerModel wide = m;
  wide.omega_h = 85;
  CHECK(thermometry_error(wide, 0.3, 0.0, 1.0).delta_tc == doctest::Approx(1.0 / 85));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int k = 0; k < 500; ++k) {
    double kh = std::pow(10, u(rng)), kc = std::pow(10, u(rng)), g = std::pow(10, u(rng));
    CHECK(thermometry_c2(kh, kc, g) >= thermometry_c1(kh, kc, g));
  }
  // Equal rates: the ratio grows without bound as g -> 0.
  CHECK(thermometry_c2(1, 1, 1e-4) / thermometry_c1(1, 1, 1e-4) > 1e3);

  RatioOptimum opt = thermometry_optimal_ratio();
  // Closed-form infimum with kappa_h = 1: C2/C1 -> sqrt(2 + 4 g^2 + 1 / (8 g^2)) as kappa_c -> 0.
  CHECK(opt.ratio == doctest::Approx(std::sqrt(2 + std::sqrt(2.0))).epsilon(1e-5));
  CHECK(opt.ratio >= 1.0);
}

TEST_CASE("two-stroke magnetometry null") {
  std::vector<double> grid;
  for (int k = 0; k <= 40; ++k) grid.push_back(3.0 + 0.1 * k);
  NullProtocolResult r = magnetometry_null(2.5, 2, 1, std::acos(-1.0) / 2, grid);
  CHECK(r.null_location == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(r.estimated_parameter == doctest::Approx(2.5).epsilon(1e-9));
  CHECK(r.error_estimate == doctest::Approx(0.05));

  NullProtocolResult tenth = magnetometry_null(0.5, 10, 1, 1.0, grid, 0.02);
  CHECK(tenth.estimated_parameter == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(tenth.error_estimate == doctest::Approx(0.002));

  CHECK(throws_kind(ErrorKind::NullNotBracketed, [&] { magnetometry_null(2.5, 2, 1, 0.0, grid); }));
}
