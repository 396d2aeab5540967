#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "qtherm/qcore.hpp"

namespace qtherm::metrology {

using qcore::CMat;

struct ParamFamily {
  std::function<CMat(double)> generator;
  double dtheta = 0.0;  // 0 selects 1e-5 * max(|theta|, 1)

  double step(double theta) const;
  CMat derivative(double theta) const;  // centred difference
};

inline constexpr double kSldFloor = 1e-12;
inline constexpr double kCfiFloor = 1e-12;

struct FisherReport {
  double qfi = 0.0;
  std::optional<double> cfi;
  CMat sld;
  double cramer_rao_floor = 0.0;  // 1 / qfi
};

// Solves d rho = (L rho + rho L) / 2 on the support of rho.
CMat sld(const ParamFamily& family, double theta);

// Spectral formula, cross-checked against Tr(rho L^2).
FisherReport qfi(const ParamFamily& family, double theta);
FisherReport qfi(const ParamFamily& family, double theta, const std::vector<CMat>& povm);

double cfi(const ParamFamily& family, double theta, const std::vector<CMat>& povm);

// 8 (1 - F(rho_theta, rho_theta+eps)) / eps^2 in the limit eps -> 0, from the
// two-sided average Richardson-extrapolated in eps.
double fidelity_susceptibility(const ParamFamily& family, double theta, double eps = 1e-3);

struct NullProtocolResult {
  double null_location = 0.0;
  double estimated_parameter = 0.0;
  double error_estimate = 0.0;
  std::vector<std::pair<double, double>> sweep_trace;  // (control, observable)
};

// First sign change of ys along xs, by linear interpolation inside the bracket.
double locate_null(const std::vector<double>& xs, const std::vector<double>& ys, size_t* bracket = nullptr);

// Dressing operator 2 lam e^{-2 lam^2} sum_n L_n^(1)(4 lam^2) / (n + 1) |n><n| of
// a Josephson-coupled cavity. The thermometry protocol below replaces
// E_J A_h A_c / 2 by a constant g.
CMat josephson_dressing(double lambda, int n_max);

struct ThermometerModel {
  double omega_h = 8.5;
  double omega_c = 1.0;
  double kappa_h = 0.06;
  double kappa_c = 0.06;
  double g = 0.05;
};

// Steady-state charge current of two cavities exchanging quanta at rate g,
// each damped by its own bath, on Fock spaces truncated at n_max.
double thermometer_current(const ThermometerModel& m, double t_hot, double t_cold, int n_max);
// Same current from the closed second-moment equations of the untruncated model.
double thermometer_current_exact(const ThermometerModel& m, double t_hot, double t_cold);
// Smallest cutoff whose thermal tail at (omega, T) is below 1e-8.
int thermometer_cutoff(double omega, double temperature);

// Sweeps T_h over the grid and reads T_c off the null of the current.
// n_max = 0 picks the cutoff from the hottest grid temperature.
NullProtocolResult thermometry_simulate(const ThermometerModel& m, double t_cold_true,
                                        const std::vector<double>& t_hot_grid, int n_max = 0);

struct ThermometryError {
  double delta_tc = 0.0;
  double current_slope = 0.0;  // d<I>/dT_c
  double c1 = 0.0;
  double c2 = 0.0;
  double c1_over_c2 = 0.0;
  double alpha = 0.0;  // delta_tc Omega_c / (T_c^2 sinh(Omega_c / 2 T_c))
};
ThermometryError thermometry_error(const ThermometerModel& m, double t_cold, double delta_current,
                                   double delta_t_hot);

double thermometry_c1(double kappa_h, double kappa_c, double g);
double thermometry_c2(double kappa_h, double kappa_c, double g);

struct RatioOptimum {
  double ratio = 0.0;  // C2 / C1
  double kappa_h = 1.0;
  double kappa_c = 1.0;
  double g = 1.0;
};
// Minimum of C2/C1 over couplings with ratios kappa_c/kappa_h and g/kappa_h
// in [10^-log_range, 10^log_range].
RatioOptimum thermometry_optimal_ratio(double log_range = 6.0);

// Two-stroke probe: sweeps the known field, finds where the work changes sign
// and returns omega_un = omega_k* T_c / T_h. A non-positive omega_k_error
// defaults to the grid spacing at the bracket.
NullProtocolResult magnetometry_null(double omega_un_true, double t_hot, double t_cold, double theta,
                                     const std::vector<double>& omega_k_grid, double omega_k_error = 0.0);

}  // namespace qtherm::metrology
