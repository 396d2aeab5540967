#include "qtherm/floquet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace qtherm::floquet {

using qcore::cplx;
using qcore::I;
using std::numbers::pi;

HermitianOperator floquet_hamiltonian(const std::function<CMat(double)>& h_of_t, double period,
                                      std::vector<double> breakpoints) {
  if (!(period > 0)) throw Error(ErrorKind::InvalidParams, "period must be positive");
  CMat u = qcore::time_ordered_propagator(h_of_t, 0.0, period, std::move(breakpoints), 1e-12);
  Eigen::ComplexSchur<CMat> schur(u);
  const CMat& tri = schur.matrixT();
  const CMat& z = schur.matrixU();
  const double omega = 2.0 * pi / period;
  Eigen::VectorXd eps(tri.rows());
  for (Eigen::Index k = 0; k < tri.rows(); ++k) {
    double e = -std::arg(tri(k, k)) / period;
    // arg lies in (-pi, pi], so e lies in [-Omega/2, Omega/2); move the lower edge up.
    if (e <= -omega / 2.0 + 1e-14 * omega) e += omega;
    eps(k) = e;
  }
  CMat hf = z * eps.cast<cplx>().asDiagonal() * z.adjoint();
  return HermitianOperator(qcore::hermitian_part(hf));
}

// ---------------------------------------------------------------------------

double PeriodicModulation::period() const { return 2.0 * pi / drive_frequency; }

void PeriodicModulation::validate() const {
  if (!(mean_gap > 0)) throw Error(ErrorKind::InvalidParams, "mean gap must be positive");
  if (!(drive_frequency > 0)) throw Error(ErrorKind::InvalidParams, "drive frequency must be positive");
  if (waveform == Waveform::PiecewiseAsymmetric && !(up_fraction > 0 && up_fraction < 1))
    throw Error(ErrorKind::InvalidParams, "up fraction must lie in (0, 1)");
}

double PeriodicModulation::gap(double t) const {
  const double tp = period();
  double s = std::fmod(t, tp);
  if (s < 0) s += tp;
  switch (waveform) {
    case Waveform::Constant:
      return mean_gap;
    case Waveform::Sinusoidal:
      return mean_gap + amplitude * std::sin(drive_frequency * s);
    case Waveform::PiecewiseAsymmetric:
      return s < up_fraction * tp ? mean_gap + amplitude / up_fraction : mean_gap - amplitude / (1.0 - up_fraction);
  }
  return mean_gap;
}

std::vector<double> PeriodicModulation::breakpoints() const {
  if (waveform == Waveform::PiecewiseAsymmetric) return {up_fraction * period()};
  return {};
}

double PeriodicModulation::phase(double t) const {
  using boost::math::quadrature::gauss_kronrod;
  auto offset = [this](double x) { return gap(x) - mean_gap; };
  if (waveform == Waveform::Constant || t == 0.0) return 0.0;
  std::vector<double> edges{0.0};
  for (double b : breakpoints())
    if (b < t) edges.push_back(b);
  edges.push_back(t);
  double acc = 0.0;
  for (size_t k = 0; k + 1 < edges.size(); ++k) {
    // Stay strictly inside each smooth piece so the jump is never sampled.
    acc += gauss_kronrod<double, 15>::integrate(offset, edges[k], edges[k + 1], 8, 1e-14);
  }
  return acc;
}

double SidebandWeights::weight(int m) const {
  if (m < -m_max || m > m_max) return 0.0;
  return weights[m + m_max];
}

double SidebandWeights::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

namespace {

// Amplitudes c_m = (1/T) int_0^T e^{-i phase(t)} e^{-i m Omega t} dt for all m at once
// on composite Gauss-Legendre panels; the panel count doubles until every
// amplitude is stable. The phase at each node comes from quadrature of the gap.
SidebandWeights compute_weights(const PeriodicModulation& mod, int m_max) {
  using boost::math::quadrature::gauss;
  using boost::math::quadrature::gauss_kronrod;
  mod.validate();
  if (m_max < 0) throw Error(ErrorKind::InvalidParams, "m_max must be non-negative");
  SidebandWeights out;
  out.m_max = m_max;
  out.weights.assign(2 * m_max + 1, 0.0);
  if (mod.waveform == Waveform::Constant || mod.amplitude == 0.0) {
    out.weights[m_max] = 1.0;
    return out;
  }
  const double tp = mod.period(), omega = mod.drive_frequency;
  std::vector<double> edges{0.0};
  for (double b : mod.breakpoints()) edges.push_back(b);
  edges.push_back(tp);

  using Rule = gauss<double, 20>;
  std::vector<double> xs, ws;  // nodes and weights on [-1, 1]
  for (size_t k = 0; k < Rule::abscissa().size(); ++k) {
    xs.push_back(Rule::abscissa()[k]);
    ws.push_back(Rule::weights()[k]);
    if (Rule::abscissa()[k] != 0.0) {
      xs.push_back(-Rule::abscissa()[k]);
      ws.push_back(Rule::weights()[k]);
    }
  }
  auto offset = [&mod](double x) { return mod.gap(x) - mod.mean_gap; };
  auto integrate_offset = [&](double a, double b) {
    return gauss_kronrod<double, 15>::integrate(offset, a, b, 6, 1e-15);
  };

  auto amplitudes = [&](int panels) {
    std::vector<cplx> amp(2 * m_max + 1, 0.0);
    double phase_at_edge = 0.0;
    for (size_t seg = 0; seg + 1 < edges.size(); ++seg) {
      const double a = edges[seg], b = edges[seg + 1], h = (b - a) / panels;
      for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h, mid = lo + h / 2;
        for (size_t k = 0; k < xs.size(); ++k) {
          const double t = mid + 0.5 * h * xs[k];
          const double ph = phase_at_edge + integrate_offset(lo, t);
          const cplx base = 0.5 * h * ws[k] * std::exp(-I * ph);
          const cplx step = std::exp(-I * omega * t);
          cplx rot = std::exp(I * (double)m_max * omega * t);  // e^{-i m Omega t} at m = -m_max
          for (int m = -m_max; m <= m_max; ++m) {
            amp[m + m_max] += base * rot;
            rot *= step;
          }
        }
        phase_at_edge += integrate_offset(lo, lo + h);
      }
    }
    for (auto& c : amp) c /= tp;
    return amp;
  };

  int panels = 4 + 2 * static_cast<int>(std::ceil(m_max * 0.25 + mod.amplitude / omega));
  std::vector<cplx> coarse = amplitudes(panels);
  for (int iter = 0;; ++iter) {
    panels *= 2;
    std::vector<cplx> fine = amplitudes(panels);
    double diff = 0.0;
    for (size_t k = 0; k < fine.size(); ++k) diff = std::max(diff, std::abs(fine[k] - coarse[k]));
    coarse = std::move(fine);
    if (diff < 5e-14) break;
    if (iter > 8) throw Error(ErrorKind::NumericalInstability, "sideband quadrature did not converge");
  }
  for (int m = -m_max; m <= m_max; ++m) out.weights[m + m_max] = std::norm(coarse[m + m_max]);
  return out;
}

}  // namespace

SidebandWeights sideband_weights(const PeriodicModulation& mod, int m_max) {
  SidebandWeights w = compute_weights(mod, m_max);
  if (w.total() < 0.999)
    throw Error(ErrorKind::TruncationTooSmall,
                "sideband weights sum to " + std::to_string(w.total()) + " with m_max = " + std::to_string(m_max));
  return w;
}

SidebandWeights sideband_weights_converged(const PeriodicModulation& mod, int m_start, double tail_budget,
                                           int m_cap) {
  int m = std::max(m_start, 0);
  for (;;) {
    SidebandWeights w = compute_weights(mod, m);
    if (1.0 - w.total() <= tail_budget) return w;
    if (2 * m > m_cap || m == 0) {
      if (m == 0) {
        m = 1;
        continue;
      }
      throw Error(ErrorKind::TruncationTooSmall, "sideband tail above budget at m_max = " + std::to_string(m));
    }
    m *= 2;
  }
}

// ---------------------------------------------------------------------------

CTMConfig ctm_separated_preset(const PeriodicModulation& mod, double t_hot, double t_cold, double rate_hot,
                               double rate_cold, int m_max) {
  mod.validate();
  if (!(t_hot >= t_cold && t_cold > 0)) throw Error(ErrorKind::InvalidParams, "need T_h >= T_c > 0");
  const double w0 = mod.mean_gap, reach = (m_max + 0.5) * mod.drive_frequency;
  lindblad::FrequencyWindow hot{w0, w0 + reach, false, true};
  lindblad::FrequencyWindow cold{std::max(0.0, w0 - reach), w0, w0 - reach > 0, false};
  HermitianOperator sx(qcore::pauli_x());
  return CTMConfig{mod,
                   lindblad::BathSpec{"hot", t_hot, lindblad::SpectralFunction::windowed(rate_hot, hot), sx},
                   lindblad::BathSpec{"cold", t_cold, lindblad::SpectralFunction::windowed(rate_cold, cold), sx}};
}

std::string to_string(MachineMode m) {
  switch (m) {
    case MachineMode::Engine:
      return "Engine";
    case MachineMode::Refrigerator:
      return "Refrigerator";
    case MachineMode::Heater:
      return "Heater";
    case MachineMode::Accelerator:
      return "Accelerator";
    case MachineMode::Off:
      return "Off";
  }
  return "Off";
}

namespace {

void validate_config(const CTMConfig& cfg) {
  cfg.modulation.validate();
  if (!(cfg.hot.temperature >= cfg.cold.temperature && cfg.cold.temperature > 0))
    throw Error(ErrorKind::InvalidParams, "need T_h >= T_c > 0");
}

double sideband_frequency(const CTMConfig& cfg, int m) {
  return cfg.modulation.mean_gap + m * cfg.modulation.drive_frequency;
}

}  // namespace

lindblad::LindbladGenerator ctm_generator(const CTMConfig& cfg, const SidebandWeights& w) {
  const CMat sm = qcore::sigma_minus(), sp = qcore::sigma_plus();
  std::vector<lindblad::Channel> channels;
  for (const auto* bath : {&cfg.hot, &cfg.cold}) {
    lindblad::Channel ch{bath->label, {}};
    for (int m = -w.m_max; m <= w.m_max; ++m) {
      double pm = w.weight(m);
      if (pm == 0.0) continue;
      double wm = sideband_frequency(cfg, m);
      ch.jumps.push_back({wm, sm, pm * bath->rate(wm)});
      ch.jumps.push_back({-wm, sp, pm * bath->rate(-wm)});
    }
    channels.push_back(std::move(ch));
  }
  HermitianOperator hf(0.5 * cfg.modulation.mean_gap * qcore::pauli_z());
  return lindblad::LindbladGenerator(hf, std::move(channels));
}

namespace {

double steady_ratio(const CTMConfig& cfg, const SidebandWeights& w) {
  double num = 0.0, den = 0.0;
  for (const auto* bath : {&cfg.hot, &cfg.cold})
    for (int m = -w.m_max; m <= w.m_max; ++m) {
      double wm = sideband_frequency(cfg, m);
      num += w.weight(m) * bath->rate(-wm);
      den += w.weight(m) * bath->rate(wm);
    }
  if (den <= 0.0 || !std::isfinite(num / den)) throw Error(ErrorKind::NoCoupling, "all sideband rates vanish");
  return num / den;
}

}  // namespace

double ctm_steady_state(const CTMConfig& cfg, int m_max) {
  validate_config(cfg);
  return steady_ratio(cfg, sideband_weights_converged(cfg.modulation, m_max));
}

CTMReport ctm_currents(const CTMConfig& cfg, int m_max) {
  validate_config(cfg);
  SidebandWeights w = sideband_weights_converged(cfg.modulation, m_max);
  CTMReport rep;
  rep.m_max_used = w.m_max;
  rep.r = steady_ratio(cfg, w);
  const double w0 = cfg.modulation.mean_gap;
  CMat rho = CMat::Zero(2, 2);
  rho(0, 0) = rep.r / (1.0 + rep.r);
  rho(1, 1) = 1.0 / (1.0 + rep.r);
  const CMat sm = qcore::sigma_minus(), sp = qcore::sigma_plus();
  const CMat hf = 0.5 * w0 * qcore::pauli_z();

  auto dissipate = [](const CMat& s, const CMat& r) {
    CMat k = s.adjoint() * s;
    return CMat(s * r * s.adjoint() - 0.5 * (k * r + r * k));
  };
  CMat d_down = dissipate(sm, rho), d_up = dissipate(sp, rho);

  // J_j = sum_m (w_m / w0) Tr(L_m^j rho H_F)
  auto current = [&](const lindblad::BathSpec& bath) {
    double j = 0.0;
    for (int m = -w.m_max; m <= w.m_max; ++m) {
      double pm = w.weight(m);
      if (pm == 0.0) continue;
      double wm = sideband_frequency(cfg, m);
      CMat lm = pm * (bath.rate(wm) * d_down + bath.rate(-wm) * d_up);
      j += (wm / w0) * (lm * hf).trace().real();
      rep.flux_scale += pm * bath.rate(wm) * std::abs(wm);
    }
    return j;
  };
  rep.j_hot = current(cfg.hot);
  rep.j_cold = current(cfg.cold);
  rep.power = -(rep.j_hot + rep.j_cold);
  rep.omega_cr = w0 * (cfg.hot.temperature - cfg.cold.temperature) / (cfg.hot.temperature + cfg.cold.temperature);

  rep.mode = classify_mode(rep.j_hot, rep.j_cold, rep.power, 1e-9 * rep.flux_scale);
  if (rep.mode == MachineMode::Engine) rep.efficiency = -rep.power / rep.j_hot;
  if (rep.mode == MachineMode::Refrigerator) rep.cop = rep.j_cold / rep.power;
  return rep;
}

MachineMode classify_mode(double j_hot, double j_cold, double power, double tol) {
  if (!(tol >= 0)) throw Error(ErrorKind::InvalidParams, "tolerance must be non-negative");
  if (std::abs(j_hot + j_cold + power) > tol)
    throw Error(ErrorKind::UnclassifiableState, "first-law residual exceeds tolerance");
  auto sgn = [tol](double x) { return x > tol ? 1 : (x < -tol ? -1 : 0); };
  const int h = sgn(j_hot), c = sgn(j_cold), p = sgn(power);
  if (p == 0) return MachineMode::Off;
  if (p < 0 && h > 0 && c <= 0) return MachineMode::Engine;
  if (p > 0) {
    if (h < 0 && c > 0) return MachineMode::Refrigerator;
    if (h <= 0 && c <= 0) return MachineMode::Heater;
    if (h > 0 && c < 0) return MachineMode::Accelerator;
  }
  throw Error(ErrorKind::UnclassifiableState, "sign pattern (" + std::to_string(j_hot) + ", " +
                                                  std::to_string(j_cold) + ", " + std::to_string(power) +
                                                  ") matches no operating mode");
}

}  // namespace qtherm::floquet
