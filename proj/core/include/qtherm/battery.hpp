#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "qtherm/qcore.hpp"

namespace qtherm::battery {

using qcore::CMat;
using qcore::CVec;
using qcore::RVec;

inline constexpr long kMaxDimension = 4096;
inline constexpr double kPopulationFloor = 1e-12;
// Floor for exact population derivatives of pure states, where dp^2 / p stays
// finite as p -> 0; only amplitudes near rounding level are dropped.
inline constexpr double kExactPopulationFloor = 1e-24;
// Bures angles between identical states come out near sqrt(eps).
inline constexpr double kAngleResolution = 1e-7;

struct BatterySpec {
  CMat cell_hamiltonian;
  RVec cell_levels;  // ascending
  int n_cells = 1;
  CMat battery_hamiltonian;  // sum of the cell Hamiltonians
};
BatterySpec make_battery(const CMat& cell_hamiltonian, int n_cells);

struct ErgotropyReport {
  double ergotropy = 0.0;
  CMat passive_state;
  double passive_energy = 0.0;
  double thermal_bound = 0.0;  // Tr(rho h) - Tr(zeta h) for the entropy-matched Gibbs state zeta
  double bound_gap = 0.0;
  double effective_beta = 0.0;  // +inf when the matched state is the ground state
};

// Populations sorted in descending order, placed on the energy levels in
// ascending order. Ties keep the original eigenvalue order.
CMat passive_state(const CMat& rho, const CMat& h);
ErgotropyReport ergotropy(const CMat& rho, const CMat& h);

struct EntropyMatch {
  double beta = 0.0;
  CMat state;
  double energy = 0.0;
};
// Gibbs state of h with von Neumann entropy equal to `entropy`, by bisection
// on beta in [1e-8, 1e8].
EntropyMatch entropy_matched_gibbs(const CMat& h, double entropy);

// Per-cell energy of the passive state of n copies of sigma under the sum of
// n copies of h0. Only the spectra enter, so the n-fold product is never formed.
double n_copy_passive_energy(const CMat& sigma, const CMat& h0, int n);

// Ergotropy over mean energy, measured from the ground energy of h.
double extractable_fraction(const CMat& rho, const CMat& h);

struct QSLReport {
  double bures_distance = 0.0;
  double time_averaged_variance = 0.0;  // time average of Delta H
  double time_averaged_energy = 0.0;    // time average of <H> above the instantaneous ground energy
  double tau_mt = 0.0;
  double tau_unified = 0.0;
  double actual_tau = 0.0;
  bool mt_holds = true;
  bool unified_holds = true;
};
QSLReport qsl_report(const std::vector<double>& times, const std::vector<CMat>& states,
                     const std::function<CMat(double)>& h_of_t);

// Populations of the eigenspaces of h0 (degenerate levels grouped).
struct EnergyLevels {
  RVec energies;
  std::vector<CMat> bases;  // orthonormal columns spanning each eigenspace
};
EnergyLevels energy_levels(const CMat& h0, double tol = 1e-9);

// Fisher information of the energy populations of a sampled trajectory, with
// centred differences inside and second-order one-sided ones at the ends.
std::vector<double> energy_fisher(const std::vector<CMat>& states, const CMat& h0, double dt);

struct VarianceParts {
  double local_sum = 0.0;
  double entanglement_part = 0.0;
};
VarianceParts variance_decomposition(const CMat& rho, const BatterySpec& spec);
VarianceParts variance_decomposition(const CVec& psi, const BatterySpec& spec);

struct ChargeTrace {
  std::vector<double> times;
  std::vector<double> energies;  // above the ground energy of the battery Hamiltonian
  std::vector<double> powers;
  std::vector<double> variances;
  std::vector<double> energy_fisher;
  std::vector<double> bound_tightness;
  std::vector<double> local_variance;  // filled when the battery has cell structure
  std::vector<double> entanglement_variance;
  double capacity = 0.0;      // spread of the battery spectrum
  size_t optimal_index = 0;   // first maximum of the stored energy
  double final_fraction = 0.0;
  double final_entanglement = 0.0;  // entropy of the battery when it is part of a larger system
  QSLReport qsl;

  double optimal_time() const { return times[optimal_index]; }
  // Averages over [0, optimal_time].
  double mean_power() const;
  double mean_variance() const;
  double mean_fisher() const;
  double mean_tightness() const;
  // Largest average power (E(t) - E(0)) / t over the whole trace.
  double max_mean_power() const;
};

// Max over samples of P^2 - var * I_E; also refreshes the bound tightness.
double power_bound_check(ChargeTrace& trace);

// n independent copies of a single-cell trace.
ChargeTrace parallel_copies(const ChargeTrace& cell, int n);

// tau_parallel / tau_collective at first passage of the energy
// E(0) + target_fraction * capacity.
double quantum_advantage(const ChargeTrace& parallel, const ChargeTrace& collective, double target_fraction = 0.5);

// Time-independent charging of a pure state; shared by the model simulators.
struct PureCharging {
  CMat hamiltonian;
  CMat battery_hamiltonian;
  CVec initial;
  double tau = 1.0;
  double dt = 1e-2;
  // Optional per-sample hook on the state in the original basis.
  std::function<void(size_t, const CVec&)> observe;
  // Optional reduction to the battery: returns the reduced state and its Hamiltonian.
  std::function<std::pair<CMat, CMat>(const CVec&)> reduce;
};
ChargeTrace charge_pure(const PureCharging& p);

enum class Range { NearestNeighbor, PowerLaw };

struct XXZParams {
  int n = 6;
  double b = 1.0;
  double g = 0.1;
  double alpha = 0.5;
  double nu = 1.0;
  Range range = Range::NearestNeighbor;
  double omega = 1.0;
  double tau = 3.0;
  double dt = 1e-2;
};
// Battery H_B + H_g charged by H_g + omega sum sigma_x from all spins down.
ChargeTrace charge_spins_xxz(const XXZParams& p);
CMat xxz_interaction(const XXZParams& p);
CMat xxz_field(int n, double b);  // b sum sigma_z
CMat xxz_drive(int n, double omega);  // omega sum sigma_x

struct LMGParams {
  int n = 8;
  double lambda = 20.0;
  double gamma = -1.0;
  double b = 1.0;
  double tau = 1.0;
  double dt = 1e-3;
};
// Battery b sum sigma_z charged by it plus (lambda / n) sum_{i<j} (sx sx + gamma sy sy),
// on the symmetric sector.
ChargeTrace charge_lmg(const LMGParams& p);

struct DickeParams {
  int n = 4;
  int n_photons = -1;  // negative selects n
  double lambda = 0.5;
  bool rescale = false;  // lambda -> lambda / sqrt(n)
  double omega = 1.0;
  double omega_c = 1.0;
  int photon_cutoff = 0;  // 0 picks one from the tail test
  double tau = 10.0;
  double dt = 1e-2;
};
// Dicke charger: omega J_z + omega_c a^dag a + 2 omega_c lambda J_x (a + a^dag),
// battery omega J_z, from all atoms down and a Fock state.
ChargeTrace charge_dicke(const DickeParams& p);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qtherm::battery
