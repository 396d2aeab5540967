#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qtherm/lindblad.hpp"
#include "qtherm/qcore.hpp"

namespace qtherm::floquet {

using qcore::CMat;
using qcore::HermitianOperator;

// Effective static Hamiltonian (i/T) ln U(T, 0) with quasi-energies folded
// into (-Omega/2, Omega/2]. Breakpoints mark discontinuities of h_of_t.
HermitianOperator floquet_hamiltonian(const std::function<CMat(double)>& h_of_t, double period,
                                      std::vector<double> breakpoints = {});

enum class Waveform { Constant, Sinusoidal, PiecewiseAsymmetric };

// Gap of a modulated two-level system, omega_s(t), with cycle mean `mean_gap`.
//   Sinusoidal:          mean_gap + amplitude sin(Omega t)
//   PiecewiseAsymmetric: mean_gap + amplitude/u on [0, uT), mean_gap - amplitude/(1-u) on [uT, T)
struct PeriodicModulation {
  double mean_gap = 1.0;
  Waveform waveform = Waveform::Constant;
  double amplitude = 0.0;
  double up_fraction = 0.5;
  double drive_frequency = 1.0;

  double period() const;
  double gap(double t) const;
  // Accumulated phase offset  int_0^t (omega_s - mean_gap) dt', evaluated piecewise by quadrature.
  double phase(double t) const;
  std::vector<double> breakpoints() const;  // interior points of [0, T) where the gap jumps
  void validate() const;
};

struct SidebandWeights {
  int m_max = 0;
  std::vector<double> weights;  // index m + m_max

  double weight(int m) const;
  double total() const;
};

// Throws TruncationTooSmall when the captured weight is below 0.999.
SidebandWeights sideband_weights(const PeriodicModulation& mod, int m_max);
// Doubles m_max from `m_start` until 1 - sum <= tail_budget.
SidebandWeights sideband_weights_converged(const PeriodicModulation& mod, int m_start = 40,
                                           double tail_budget = 1e-8, int m_cap = 2560);

struct CTMConfig {
  PeriodicModulation modulation;
  lindblad::BathSpec hot;
  lindblad::BathSpec cold;
};

// Hot bath flat on (w0, w0 + (m_max + 1/2) Omega], cold flat on
// [w0 - (m_max + 1/2) Omega, w0) clipped to (0, w0); both couple through sigma_x.
CTMConfig ctm_separated_preset(const PeriodicModulation& mod, double t_hot, double t_cold, double rate_hot,
                               double rate_cold, int m_max);

enum class MachineMode { Engine, Refrigerator, Heater, Accelerator, Off };
std::string to_string(MachineMode m);

struct CTMReport {
  double r = 0.0;
  double j_hot = 0.0;
  double j_cold = 0.0;
  double power = 0.0;
  MachineMode mode = MachineMode::Off;
  std::optional<double> efficiency;
  std::optional<double> cop;
  double omega_cr = 0.0;
  int m_max_used = 0;
  double flux_scale = 0.0;  // sum_{m,j} P_m gamma^j(w_m) w_m, used to set the classification tolerance
};

// Sideband generator sum_{m,j} L_m^j with H_F = (w0/2) sigma_z; channels "hot" and "cold".
lindblad::LindbladGenerator ctm_generator(const CTMConfig& cfg, const SidebandWeights& w);

double ctm_steady_state(const CTMConfig& cfg, int m_max = 40);
CTMReport ctm_currents(const CTMConfig& cfg, int m_max = 40);

MachineMode classify_mode(double j_hot, double j_cold, double power, double tol);

}  // namespace qtherm::floquet
