#include "qtherm/sta.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace qtherm::sta {

using qcore::cplx;
using qcore::I;

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::InvalidParams, what);
}

}  // namespace

double ErmakovSchedule::b(double t) const {
  const double s = t / tau;
  double v = 0.0;
  for (int k = 5; k >= 0; --k) v = v * s + b_coeffs[k];
  return v;
}

double ErmakovSchedule::b_dot(double t) const {
  const double s = t / tau;
  double v = 0.0;
  for (int k = 5; k >= 1; --k) v = v * s + k * b_coeffs[k];
  return v / tau;
}

double ErmakovSchedule::b_ddot(double t) const {
  const double s = t / tau;
  double v = 0.0;
  for (int k = 5; k >= 2; --k) v = v * s + k * (k - 1) * b_coeffs[k];
  return v / (tau * tau);
}

double ErmakovSchedule::omega_sq(double t) const {
  const double bv = b(t);
  return omega_i * omega_i / std::pow(bv, 4) - b_ddot(t) / bv;
}

double ErmakovSchedule::ermakov_residual(double t) const {
  const double bv = b(t);
  return b_ddot(t) + omega_sq(t) * bv - omega_i * omega_i / (bv * bv * bv);
}

double ErmakovSchedule::boundary_residual() const {
  const double bf = std::sqrt(omega_i / omega_f);
  return std::max({std::abs(b(0) - 1.0), std::abs(b_dot(0)), std::abs(b_ddot(0)), std::abs(b(tau) - bf),
                   std::abs(b_dot(tau)), std::abs(b_ddot(tau))});
}

ErmakovSchedule ermakov_schedule(double omega_i, double omega_f, double tau) {
  require(omega_i > 0 && omega_f > 0, "frequencies must be positive");
  require(tau > 0, "duration must be positive");
  ErmakovSchedule s;
  s.omega_i = omega_i;
  s.omega_f = omega_f;
  s.tau = tau;
  // Smoothstep quintic: zero first and second derivatives at both ends.
  const double jump = std::sqrt(omega_i / omega_f) - 1.0;
  s.b_coeffs = {1.0, 0.0, 0.0, 10.0 * jump, -15.0 * jump, 6.0 * jump};
  s.min_omega_sq = s.omega_sq(0.0);
  const int grid = 1000;
  for (int k = 0; k <= grid; ++k) s.min_omega_sq = std::min(s.min_omega_sq, s.omega_sq(tau * k / grid));
  s.trap_inversion = s.min_omega_sq < 0.0;
  return s;
}

namespace {

struct Quadratures {
  CMat x2, p2, xp_px;
};

// Quadratic forms in the Fock basis of omega_ref, built one size up so that
// the kept block is exact.
Quadratures quadratures(double omega_ref, int n_max) {
  CMat a = qcore::annihilation(n_max + 2);
  CMat x = (a + a.adjoint()) / std::sqrt(2.0 * omega_ref);
  CMat p = I * std::sqrt(omega_ref / 2.0) * (a.adjoint() - a);
  const int d = n_max + 1;
  Quadratures q;
  q.x2 = (x * x).topLeftCorner(d, d);
  q.p2 = (p * p).topLeftCorner(d, d);
  q.xp_px = (x * p + p * x).topLeftCorner(d, d);
  return q;
}

// Advances rho across [t0, t1], doubling the Magnus step count until the
// state itself (not the full propagator) stops changing.
CMat advance(const std::function<CMat(double)>& ham, const CMat& rho, double t0, double t1, double tol) {
  int n = 8;
  CMat u = qcore::magnus4_propagator(ham, t0, t1, n);
  CMat coarse = u * rho * u.adjoint();
  for (;;) {
    n *= 2;
    u = qcore::magnus4_propagator(ham, t0, t1, n);
    CMat fine = u * rho * u.adjoint();
    if ((fine - coarse).cwiseAbs().maxCoeff() < tol) return fine;
    if (n > (1 << 18)) throw Error(ErrorKind::NumericalInstability, "oscillator evolution did not converge");
    coarse = fine;
  }
}

}  // namespace

ErmakovTransport ermakov_transport(const ErmakovSchedule& s, int n_max, double temperature, int samples) {
  require(n_max >= 2, "cutoff must be at least 2");
  require(temperature > 0, "temperature must be positive");
  require(samples >= 1, "need at least one sample");
  const double x = s.omega_i / temperature;
  const double tail = -std::expm1(-x) * std::exp(-x * n_max);
  if (tail >= 1e-10)
    throw Error(ErrorKind::CutoffTooSmall,
                "level " + std::to_string(n_max) + " holds population " + std::to_string(tail));

  const Quadratures q = quadratures(s.omega_i, n_max);
  const int d = n_max + 1;
  auto ham = [&](double t) { return CMat(0.5 * q.p2 + 0.5 * s.omega_sq(t) * q.x2); };
  auto invariant = [&](double t) {
    const double bv = s.b(t), bd = s.b_dot(t);
    const double w0 = s.omega_i;
    return CMat(0.5 * (w0 * w0 / (bv * bv) * q.x2 + bv * bv * q.p2 - bv * bd * q.xp_px + bd * bd * q.x2));
  };

  qcore::RVec pops(d);
  for (int n = 0; n < d; ++n) pops(n) = std::exp(-x * n);
  pops /= pops.sum();
  CMat rho = pops.cast<cplx>().asDiagonal();
  const double i0 = qcore::expectation(rho, invariant(0.0));

  ErmakovTransport out;
  for (int k = 1; k <= samples; ++k) {
    const double t0 = s.tau * (k - 1) / samples, t1 = s.tau * k / samples;
    rho = advance(ham, rho, t0, t1, 1e-11);
    const double ik = qcore::expectation(rho, invariant(t1));
    out.max_drift = std::max(out.max_drift, std::abs(ik - i0) / i0);
  }

  // Compare populations only on levels that the truncation represents well.
  qcore::EigenSystem fin = qcore::hermitian_eig(ham(s.tau));
  for (int n = 0; n < d / 2; ++n) {
    const double pn = fin.vectors.col(n).dot(rho * fin.vectors.col(n)).real();
    out.population_error = std::max(out.population_error, std::abs(pn - pops(n)));
  }
  out.final_state = rho;
  return out;
}

double verify_ermakov_invariant(const ErmakovSchedule& s, int n_max, double temperature) {
  return ermakov_transport(s, n_max, temperature).max_drift;
}

CMat counterdiabatic(const HamiltonianPath& h0, double t, double dt, double gap_tol) {
  require(dt > 0, "difference step must be positive");
  const qcore::EigenSystem here = qcore::hermitian_eig(h0(t));
  const Eigen::Index d = here.values.size();
  for (Eigen::Index n = 0; n + 1 < d; ++n)
    if (here.values(n + 1) - here.values(n) < gap_tol)
      throw Error(ErrorKind::DegenerateSpectrum,
                  "levels " + std::to_string(n) + " and " + std::to_string(n + 1) + " are degenerate");

  // Eigenvectors at a nearby time with each phase rotated onto the one at t.
  auto aligned = [&](double s) {
    CMat v = qcore::hermitian_eig(h0(s)).vectors;
    for (Eigen::Index n = 0; n < d; ++n) {
      const cplx ov = here.vectors.col(n).dot(v.col(n));
      if (std::abs(ov) < 0.5)
        throw Error(ErrorKind::DegenerateSpectrum, "eigenvector ordering changes within the difference stencil");
      v.col(n) *= std::conj(ov) / std::abs(ov);
    }
    return v;
  };
  const CMat deriv =
      (-aligned(t + 2 * dt) + 8.0 * aligned(t + dt) - 8.0 * aligned(t - dt) + aligned(t - 2 * dt)) / (12.0 * dt);

  CMat in_eig = I * (here.vectors.adjoint() * deriv);
  in_eig.diagonal().setZero();
  in_eig = qcore::hermitian_part(in_eig);
  return here.vectors * in_eig * here.vectors.adjoint();
}

CMat CDProtocol::cd_term(double t) const { return counterdiabatic(bare, t, dt, gap_tol); }

CMat CDProtocol::total(double t) const { return CMat(bare(t) + cd_term(t)); }

double CDProtocol::cd_cost(double t0, double t1) const {
  auto norm = [&](double t) { return qcore::hermitian_eig(cd_term(t)).values.cwiseAbs().maxCoeff(); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(norm, t0, t1, 10, 1e-10);
}

CMat cd_propagator(const CDProtocol& p, double t0, double t1, double tol) {
  return qcore::time_ordered_propagator([&](double t) { return p.total(t); }, t0, t1, {}, tol);
}

}  // namespace qtherm::sta
