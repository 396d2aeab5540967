#pragma once

#include <array>
#include <functional>

#include "qtherm/qcore.hpp"

namespace qtherm::sta {

using qcore::CMat;

// Scale factor b(t) of the oscillator invariant, a quintic in t/tau that starts
// at rest at 1 and ends at rest at sqrt(omega_i / omega_f).
struct ErmakovSchedule {
  double omega_i = 1.0;
  double omega_f = 1.0;
  double tau = 1.0;
  std::array<double, 6> b_coeffs{};  // b(t) = sum_k c_k (t/tau)^k
  bool trap_inversion = false;       // omega(t)^2 < 0 somewhere on [0, tau]
  double min_omega_sq = 0.0;

  double omega0() const { return omega_i; }
  double b(double t) const;
  double b_dot(double t) const;
  double b_ddot(double t) const;
  // Drive implied by the Ermakov equation: omega0^2 / b^4 - b'' / b.
  double omega_sq(double t) const;
  // b'' + omega^2 b - omega0^2 / b^3 at t.
  double ermakov_residual(double t) const;
  // Largest deviation from the six boundary conditions.
  double boundary_residual() const;
};

ErmakovSchedule ermakov_schedule(double omega_i, double omega_f, double tau);

struct ErmakovTransport {
  double max_drift = 0.0;         // max_t |<I(t)> - <I(0)>| / <I(0)>
  double population_error = 0.0;  // max_n |p_n(tau) - p_n(0)| in the final energy basis
  CMat final_state;
};

// Evolves a thermal state of the initial oscillator under the truncated
// Hamiltonian p^2/2 + omega(t)^2 x^2/2 and tracks the invariant
// I(t) = [omega0^2 x^2 / b^2 + (b p - b' x)^2] / 2 at `samples` times.
ErmakovTransport ermakov_transport(const ErmakovSchedule& s, int n_max, double temperature, int samples = 50);
double verify_ermakov_invariant(const ErmakovSchedule& s, int n_max, double temperature);

using HamiltonianPath = std::function<CMat(double)>;

// i sum_n (|d_t n><n| - <n|d_t n> |n><n|) from centred differences of phase
// aligned eigenvectors. Throws DegenerateSpectrum if two levels come closer
// than gap_tol at t.
CMat counterdiabatic(const HamiltonianPath& h0, double t, double dt = 1e-4, double gap_tol = 1e-8);

struct CDProtocol {
  HamiltonianPath bare;
  double dt = 1e-4;
  double gap_tol = 1e-8;

  CMat cd_term(double t) const;
  CMat total(double t) const;
  // Diagnostic driving cost: integral of the operator norm of the CD term.
  double cd_cost(double t0, double t1) const;
};

// Propagator of bare + CD from t0 to t1.
CMat cd_propagator(const CDProtocol& p, double t0, double t1, double tol = 1e-12);

}  // namespace qtherm::sta
