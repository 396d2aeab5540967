#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qtherm/floquet.hpp"
#include "qtherm/qcore.hpp"

namespace qtherm::cycles {

using floquet::MachineMode;
using qcore::CMat;

enum class StrokeKind {
  IsentropicCompression,
  IsentropicExpansion,
  HotIsochore,
  ColdIsochore,
  IsothermalExpansion,
  IsothermalCompression,
  UnitaryStroke,
  ThermalizationStroke
};
std::string to_string(StrokeKind k);

// Sign convention: work > 0 is done on the working fluid, heat > 0 flows into it.
struct StrokeRecord {
  StrokeKind kind;
  double work = 0.0;
  double heat = 0.0;
  std::optional<double> duration;  // empty for quasi-static strokes
  std::string label;
};

struct CycleReport {
  std::vector<StrokeRecord> strokes;
  double net_work_output = 0.0;  // -sum of stroke work
  double q_hot = 0.0;
  double q_cold = 0.0;
  std::optional<double> efficiency;
  std::optional<double> cop;
  MachineMode mode = MachineMode::Off;
  double carnot_margin = 0.0;  // Carnot efficiency (or COP) minus the achieved value

  double total_work() const;
  double total_heat() const;
  double first_law_residual() const;  // |sum W + sum Q|
};

struct MaserReport {
  bool inversion = false;
  MachineMode mode = MachineMode::Off;
  std::optional<double> efficiency;
  std::optional<double> cop;
};

MaserReport maser_analyze(double omega_h, double omega_c, double t_hot, double t_cold);

// Particle in a box restricted to its two lowest levels.
CycleReport box_carnot(double length_a, double length_b, double mass);

// Closed-form ideal Otto cycle of a harmonic oscillator.
CycleReport otto_qho(double omega_a, double omega_b, double t_hot, double t_cold);

struct MaxPowerPoint {
  double ratio = 0.0;       // omega_B / omega_A at maximal high-temperature work
  double efficiency = 0.0;  // 1 - ratio
};
MaxPowerPoint otto_max_power(double t_hot, double t_cold);

struct SqueezedOttoReport {
  CycleReport cycle;
  double efficiency_at_max_power = 0.0;
  double generalized_carnot = 0.0;
};
SqueezedOttoReport otto_squeezed(double omega_a, double omega_b, double t_hot, double t_cold, double squeezing);

struct QHOSpec {
  double frequency = 1.0;
  int n_max = 60;

  // Population of level n_max in the thermal state at `temperature`.
  double tail_population(double temperature) const;
  void check_tail(double temperature) const;  // throws CutoffTooSmall above 1e-10
};

struct OttoNumericOptions {
  double bath_rate = 1.0;
  double ode_tol = 1e-13;
};

struct OttoNumericReport {
  CycleReport cycle;
  double ideal_work_output = 0.0;
  double friction = 0.0;  // ideal work output minus simulated work output
  CMat state_after_cold;  // oscillator state at the end of the cold isochore
  CMat state_after_hot;
};

// Linear frequency ramps evolved unitarily on a Fock space truncated at n_max;
// isochores are Lindblad thermalizations with a flat bath coupled through x.
// States are kept in the Fock basis of sqrt(omega_a omega_b).
// The cycle is repeated until it closes on itself.
OttoNumericReport otto_numeric(double omega_a, double omega_b, double t_hot, double t_cold, double ramp_time,
                               double thermalization_time, int n_max, const OttoNumericOptions& opts = {});

// Truncated oscillator Hamiltonian p^2/2 + w^2 x^2/2 (unit mass) in the Fock
// basis of frequency omega_ref.
CMat oscillator_hamiltonian(double omega, double omega_ref, int n_max);

// Propagator of a linear frequency ramp in the Fock basis of omega_ref, kept up
// to n_max. Built from the classical solution of x'' = -w(t)^2 x, which fixes
// the squeeze and rotation of the exact oscillator unitary.
CMat ramp_unitary(double omega_from, double omega_to, double ramp_time, double omega_ref, int n_max,
                  double tol = 1e-13);

CycleReport two_stroke(double omega_k, double omega_un, double t_hot, double t_cold, double theta);

// Engine populations used by two_stroke: excited-level weight of levels +-w at temperature T.
double two_level_excited_population(double omega, double temperature);

// Outcoupled Otto engine: a driven two-level engine kicks an oscillator once per cycle.
struct OutcoupledParams {
  double delta = 1.0;
  double coupling = 0.02;        // g
  double kick_fraction = 0.1;    // kick at (m + kick_fraction) T
  double oscillator_freq = 0.0;  // omega of the external system
  double sweep_rate = 0.5;       // v
  double period = 20.0;
  double beta_cold = 1.0;
  double beta_hot = 0.0;
  int cutoff = 30;

  double max_gap() const;  // 2 sqrt(delta^2 + (v T / 2)^2)
  // g = 0.02, b = 0.1/delta, omega T = 2 pi 0.05, v = delta^2/2, T = 20/delta,
  // beta_c = 1/delta, beta_h = 1/(4 E_max).
  static OutcoupledParams reference(double delta = 1.0);
  void validate() const;
};

// Mean energy gained by the oscillator after n cycles, starting from its ground
// state. With per_cycle_measurement the oscillator is dephased in its energy
// basis at every cycle boundary.
double outcoupled_multicycle(const OutcoupledParams& p, int n_cycles, bool per_cycle_measurement);

// Same quantity from the measured-sequence formula: a Markov chain over
// oscillator levels built from single-cycle transition probabilities.
double outcoupled_projective_work(const OutcoupledParams& p, int n_cycles);

struct IndistinctParams {
  double delta = 1.0;
  double omega0 = 1.0;  // Omega(0)
  double sweep_rate = 0.1;
  double period = 20.0;
  double kick_time = 3.5;
  double beta_hot = 0.0;
  double beta_cold = 2.0;

  double gap(double t) const;  // sqrt(Omega(t)^2 + delta^2)
  // v = 0.1 Omega(0)^2, T = 20/Omega(0), t1 = 0.35 T/2, beta_c = 2/eps_0, beta_h = 1/(4 eps_{T/2}).
  static IndistinctParams reference(double delta = 1.0, double omega0 = 1.0);
};

// <[V_E(t1)]^2> in the initial cold thermal state for N distinguishable atoms,
// summed over all 2^N product configurations.
double kicked_variance_distinguishable(int n_atoms, const IndistinctParams& p);
// Same for bosonic atoms on the N + 1 dimensional symmetric subspace.
double kicked_variance_indistinguishable(int n_atoms, const IndistinctParams& p);
// Ratio of indistinguishable to distinguishable work in the weak-kick limit.
double outcoupled_indistinct_ratio(int n_atoms, const IndistinctParams& p);

// Three-level machine (hot 1-3, cold 1-2, resonant work field 2-3) run either
// continuously or as symmetric strokes over the same cycle time.
struct EquivalenceModel {
  double omega_c = 1.0;
  double omega_h = 3.0;
  double t_hot = 5.0;
  double t_cold = 0.5;
  double rate_hot = 1.0;
  double rate_cold = 1.0;
  double field = 0.5;
};

struct EquivalencePoint {
  double cycle_time = 0.0;
  double bath_action = 0.0;
  double work_continuous = 0.0;  // work done on the system per cycle
  double work_stroke = 0.0;
};

EquivalencePoint stroke_continuous_equivalence(double cycle_time, const EquivalenceModel& m = {});

}  // namespace qtherm::cycles
