#include "qtherm/cycles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/numeric/odeint.hpp>

#include "qtherm/lindblad.hpp"

namespace qtherm::cycles {

using qcore::cplx;
using qcore::I;
using std::numbers::pi;

std::string to_string(StrokeKind k) {
  switch (k) {
    case StrokeKind::IsentropicCompression:
      return "IsentropicCompression";
    case StrokeKind::IsentropicExpansion:
      return "IsentropicExpansion";
    case StrokeKind::HotIsochore:
      return "HotIsochore";
    case StrokeKind::ColdIsochore:
      return "ColdIsochore";
    case StrokeKind::IsothermalExpansion:
      return "IsothermalExpansion";
    case StrokeKind::IsothermalCompression:
      return "IsothermalCompression";
    case StrokeKind::UnitaryStroke:
      return "UnitaryStroke";
    case StrokeKind::ThermalizationStroke:
      return "ThermalizationStroke";
  }
  return "UnitaryStroke";
}

double CycleReport::total_work() const {
  double s = 0.0;
  for (const auto& st : strokes) s += st.work;
  return s;
}

double CycleReport::total_heat() const {
  double s = 0.0;
  for (const auto& st : strokes) s += st.heat;
  return s;
}

double CycleReport::first_law_residual() const { return std::abs(total_work() + total_heat()); }

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::InvalidParams, what);
}

double coth(double x) { return 1.0 / std::tanh(x); }

double energy_scale(const CycleReport& r) {
  double s = 0.0;
  for (const auto& st : r.strokes) s = std::max({s, std::abs(st.work), std::abs(st.heat)});
  return s;
}

// Fills the derived fields from strokes, q_hot and q_cold. Carnot limits are
// optional because the box cycle has no bath temperatures.
void finalize(CycleReport& r, std::optional<double> carnot_eta, std::optional<double> carnot_cop) {
  const double w_on = r.total_work();
  r.net_work_output = -w_on;
  const double tol = 1e-9 * std::max(energy_scale(r), std::numeric_limits<double>::min());
  r.mode = floquet::classify_mode(r.q_hot, r.q_cold, w_on, tol);
  r.efficiency.reset();
  r.cop.reset();
  r.carnot_margin = 0.0;
  if (r.mode == MachineMode::Engine) {
    r.efficiency = r.net_work_output / r.q_hot;
    if (carnot_eta) r.carnot_margin = *carnot_eta - *r.efficiency;
  } else if (r.mode == MachineMode::Refrigerator) {
    r.cop = r.q_cold / w_on;
    if (carnot_cop) r.carnot_margin = *carnot_cop - *r.cop;
  }
}

double carnot_efficiency(double t_hot, double t_cold) { return 1.0 - t_cold / t_hot; }
double carnot_cop(double t_hot, double t_cold) {
  return t_hot > t_cold ? t_cold / (t_hot - t_cold) : std::numeric_limits<double>::infinity();
}

}  // namespace

// ---------------------------------------------------------------------------

MaserReport maser_analyze(double omega_h, double omega_c, double t_hot, double t_cold) {
  require(omega_h > omega_c && omega_c > 0, "need omega_h > omega_c > 0");
  require(t_hot >= t_cold && t_cold > 0, "need T_h >= T_c > 0");
  MaserReport out;
  out.inversion = omega_c / omega_h >= t_cold / t_hot;
  if (out.inversion) {
    out.mode = MachineMode::Engine;
    out.efficiency = 1.0 - omega_c / omega_h;
  } else {
    out.mode = MachineMode::Refrigerator;
    out.cop = omega_c / (omega_h - omega_c);
  }
  return out;
}

// ---------------------------------------------------------------------------

CycleReport box_carnot(double length_a, double length_b, double mass) {
  require(length_a > length_b && length_b > 0, "need L_A > L_B > 0");
  require(mass > 0, "mass must be positive");
  using boost::math::quadrature::gauss_kronrod;
  const double c = pi * pi / mass;

  // Forces on the wall along each stroke. Adiabats keep the populations fixed
  // (ground level, then first excited level); isotherms keep the energy fixed.
  auto f_ab = [c](double l) { return c / (l * l * l); };
  auto f_bc = [c, length_b](double l) { return c / (l * length_b * length_b); };
  auto f_cd = [c](double l) { return 4.0 * c / (l * l * l); };
  auto f_da = [c, length_a](double l) { return c / (l * length_a * length_a); };

  auto work_on = [](auto f, double from, double to) {
    double err = 0.0;
    double v = gauss_kronrod<double, 31>::integrate(f, from, to, 15, 1e-14, &err);
    return -v;
  };

  CycleReport r;
  const double w_ab = work_on(f_ab, length_a, length_b);
  const double w_bc = work_on(f_bc, length_b, 2.0 * length_b);
  const double w_cd = work_on(f_cd, 2.0 * length_b, 2.0 * length_a);
  const double w_da = work_on(f_da, 2.0 * length_a, length_a);
  r.strokes.push_back({StrokeKind::IsentropicCompression, w_ab, 0.0, std::nullopt, "A->B"});
  r.strokes.push_back({StrokeKind::IsothermalExpansion, w_bc, -w_bc, std::nullopt, "B->C"});
  r.strokes.push_back({StrokeKind::IsentropicExpansion, w_cd, 0.0, std::nullopt, "C->D"});
  r.strokes.push_back({StrokeKind::IsothermalCompression, w_da, -w_da, std::nullopt, "D->A"});
  r.q_hot = -w_bc;
  r.q_cold = -w_da;
  finalize(r, std::nullopt, std::nullopt);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void check_otto(double omega_a, double omega_b, double t_hot, double t_cold) {
  require(omega_a >= omega_b && omega_b > 0, "need omega_A >= omega_B > 0");
  require(t_hot > t_cold && t_cold > 0, "need T_h > T_c > 0");
}

// Ideal cycle with the hot-isochore energy scaled by `hot_factor`.
CycleReport otto_closed_form(double omega_a, double omega_b, double t_hot, double t_cold, double hot_factor,
                             double carnot_eta, double carnot_c) {
  const double ch = coth(omega_a / (2.0 * t_hot)) * hot_factor;
  const double cc = coth(omega_b / (2.0 * t_cold));
  CycleReport r;
  const double w_ab = 0.5 * (omega_b - omega_a) * ch;
  const double q_c = 0.5 * omega_b * (cc - ch);
  const double w_ba = 0.5 * (omega_a - omega_b) * cc;
  const double q_h = 0.5 * omega_a * (ch - cc);
  r.strokes.push_back({StrokeKind::IsentropicCompression, w_ab, 0.0, std::nullopt, "A->B"});
  r.strokes.push_back({StrokeKind::ColdIsochore, 0.0, q_c, std::nullopt, "B->C"});
  r.strokes.push_back({StrokeKind::IsentropicExpansion, w_ba, 0.0, std::nullopt, "C->D"});
  r.strokes.push_back({StrokeKind::HotIsochore, 0.0, q_h, std::nullopt, "D->A"});
  r.q_hot = q_h;
  r.q_cold = q_c;
  finalize(r, carnot_eta, carnot_c);
  if (r.mode == MachineMode::Engine) {
    r.efficiency = 1.0 - omega_b / omega_a;
    r.carnot_margin = carnot_eta - *r.efficiency;
  }
  return r;
}

}  // namespace

CycleReport otto_qho(double omega_a, double omega_b, double t_hot, double t_cold) {
  check_otto(omega_a, omega_b, t_hot, t_cold);
  return otto_closed_form(omega_a, omega_b, t_hot, t_cold, 1.0, carnot_efficiency(t_hot, t_cold),
                          carnot_cop(t_hot, t_cold));
}

MaxPowerPoint otto_max_power(double t_hot, double t_cold) {
  require(t_hot > t_cold && t_cold > 0, "need T_h > T_c > 0");
  // High-temperature work output W(x) = (x - 1)(T_c/x - T_h), x = omega_B/omega_A.
  auto neg_work = [&](double x) { return -(x - 1.0) * (t_cold / x - t_hot); };
  auto res = boost::math::tools::brent_find_minima(neg_work, t_cold / t_hot, 1.0,
                                                   std::numeric_limits<double>::digits);
  return {res.first, 1.0 - res.first};
}

SqueezedOttoReport otto_squeezed(double omega_a, double omega_b, double t_hot, double t_cold, double squeezing) {
  check_otto(omega_a, omega_b, t_hot, t_cold);
  require(squeezing >= 0, "squeezing must be non-negative");
  const double sh2 = std::pow(std::sinh(squeezing), 2);
  const double n0 = 1.0 / std::expm1(omega_a / t_hot);
  const double factor = 1.0 + (2.0 + 1.0 / n0) * sh2;
  const double t_eff = t_hot * (1.0 + 2.0 * sh2);
  SqueezedOttoReport out;
  out.generalized_carnot = 1.0 - t_cold / t_eff;
  // The margin is taken against the thermal temperature that carries the same
  // hot-isochore energy; the high-temperature form above can sit below it.
  const double c = factor / std::tanh(0.5 * omega_a / t_hot);
  const double t_equiv = omega_a / std::log((c + 1.0) / (c - 1.0));
  out.cycle = otto_closed_form(omega_a, omega_b, t_hot, t_cold, factor, 1.0 - t_cold / t_equiv,
                               carnot_cop(t_equiv, t_cold));
  out.efficiency_at_max_power = otto_max_power(t_eff, t_cold).efficiency;
  return out;
}

// ---------------------------------------------------------------------------

double QHOSpec::tail_population(double temperature) const {
  const double x = frequency / temperature;
  return -std::expm1(-x) * std::exp(-x * n_max);
}

void QHOSpec::check_tail(double temperature) const {
  double p = tail_population(temperature);
  if (p >= 1e-10)
    throw Error(ErrorKind::CutoffTooSmall,
                "level " + std::to_string(n_max) + " holds population " + std::to_string(p));
}

namespace {

struct OscillatorParts {
  CMat x2, p2, x;
};

OscillatorParts oscillator_parts(double omega_ref, int n_max) {
  // Square in a slightly larger space so the kept block is exact.
  CMat a = qcore::annihilation(n_max + 2);
  CMat x = (a + a.adjoint()) / std::sqrt(2.0 * omega_ref);
  CMat p = I * std::sqrt(omega_ref / 2.0) * (a.adjoint() - a);
  const int d = n_max + 1;
  return {CMat((x * x).topLeftCorner(d, d)), CMat((p * p).topLeftCorner(d, d)), CMat(x.topLeftCorner(d, d))};
}

double energy(const CMat& h, const CMat& rho) { return qcore::expectation(rho, h); }

}  // namespace

CMat ramp_unitary(double omega_from, double omega_to, double ramp_time, double omega_ref, int n_max,
                  double tol) {
  require(omega_from > 0 && omega_to > 0 && omega_ref > 0, "frequencies must be positive");
  require(ramp_time > 0 && n_max >= 1, "need ramp_time > 0 and n_max >= 1");
  namespace ode = boost::numeric::odeint;
  // Fundamental solutions of x'' = -w(t)^2 x: (u, u', v, v') with u(0) = 1, v'(0) = 1.
  using State = std::array<double, 4>;
  auto rhs = [&](const State& y, State& dy, double t) {
    const double w = omega_from + (omega_to - omega_from) * t / ramp_time;
    dy = {y[1], -w * w * y[0], y[3], -w * w * y[2]};
  };
  State y{1.0, 0.0, 0.0, 1.0};
  const double dt0 = 0.01 / std::max(omega_from, omega_to);
  ode::integrate_adaptive(ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<State>()), rhs, y, 0.0,
                          ramp_time, dt0);

  // Heisenberg map of the dimensionless quadratures X = sqrt(w_ref) x, P = p / sqrt(w_ref),
  // then U^dag a U = mu a + nu a^dag.
  const double m11 = y[0], m12 = y[2] * omega_ref, m21 = y[1] / omega_ref, m22 = y[3];
  const cplx mu = 0.5 * cplx(m11 + m22, m21 - m12);
  const cplx nu = 0.5 * cplx(m11 - m22, m21 + m12);
  // U = R(phi1) S(r) R(phi2) with R(phi) = exp(-i phi n), S(r) = exp(r (a^2 - a^dag^2) / 2).
  const double r = std::asinh(std::abs(nu));
  const double sum = -std::arg(mu);
  const double diff = std::abs(nu) > 0 ? -std::arg(-nu) : 0.0;
  const double phi1 = 0.5 * (sum + diff), phi2 = 0.5 * (sum - diff);

  const int keep = n_max + 1;
  const int big = static_cast<int>(std::ceil(keep * (2.0 + 2.0 * std::exp(2.0 * r)))) + 40;
  CMat a = qcore::annihilation(big - 1);
  CMat squeeze = qcore::matrix_exp(CMat(0.5 * r * (a * a - a.adjoint() * a.adjoint())));
  CMat u = squeeze.topLeftCorner(keep, keep);
  for (int m = 0; m < keep; ++m)
    for (int n = 0; n < keep; ++n) u(m, n) *= std::exp(-I * (phi1 * m + phi2 * n));
  // Nearest unitary to the kept block; the discarded weight sits in unpopulated levels.
  Eigen::JacobiSVD<CMat> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

CMat oscillator_hamiltonian(double omega, double omega_ref, int n_max) {
  OscillatorParts parts = oscillator_parts(omega_ref, n_max);
  return 0.5 * parts.p2 + 0.5 * omega * omega * parts.x2;
}

OttoNumericReport otto_numeric(double omega_a, double omega_b, double t_hot, double t_cold, double ramp_time,
                               double thermalization_time, int n_max, const OttoNumericOptions& opts) {
  check_otto(omega_a, omega_b, t_hot, t_cold);
  require(ramp_time > 0 && thermalization_time > 0, "stroke durations must be positive");
  require(n_max >= 2, "n_max must be at least 2");
  QHOSpec{omega_a, n_max}.check_tail(t_hot);
  QHOSpec{omega_b, n_max}.check_tail(t_cold);

  // Fock basis of the geometric-mean frequency: both thermal states are squeezed equally in it.
  const double omega_ref = std::sqrt(omega_a * omega_b);
  OscillatorParts parts = oscillator_parts(omega_ref, n_max);
  auto ham = [&](double w) { return CMat(0.5 * parts.p2 + 0.5 * w * w * parts.x2); };
  const CMat h_a = ham(omega_a), h_b = ham(omega_b);

  const CMat u_ab = ramp_unitary(omega_a, omega_b, ramp_time, omega_ref, n_max, opts.ode_tol);
  const CMat u_ba = ramp_unitary(omega_b, omega_a, ramp_time, omega_ref, n_max, opts.ode_tol);

  // x in units of the reference oscillator length keeps the coupling dimensionless.
  qcore::HermitianOperator coupling(qcore::hermitian_part(parts.x * std::sqrt(omega_ref)));
  auto bath = [&](const char* label, double temp) {
    return lindblad::BathSpec{label, temp, lindblad::SpectralFunction::flat(opts.bath_rate), coupling};
  };
  lindblad::LindbladGenerator gen_cold =
      lindblad::build_generator(qcore::HermitianOperator(h_b), {bath("cold", t_cold)});
  lindblad::LindbladGenerator gen_hot =
      lindblad::build_generator(qcore::HermitianOperator(h_a), {bath("hot", t_hot)});
  lindblad::Propagator therm_cold(gen_cold, thermalization_time), therm_hot(gen_hot, thermalization_time);

  OttoNumericReport out;
  CMat rho = qcore::gibbs_matrix(h_a, t_hot);
  CycleReport rep;
  // Repeat the cycle until it closes on itself so the reported strokes obey the cyclic first law.
  for (int iter = 0; iter < 200; ++iter) {
    rep = CycleReport{};
    const CMat start = rho;
    CMat r1 = u_ab * rho * u_ab.adjoint();
    const double w_ab = energy(h_b, r1) - energy(h_a, rho);
    CMat r2 = therm_cold.apply(r1);
    const double q_c = energy(h_b, r2) - energy(h_b, r1);
    CMat r3 = u_ba * r2 * u_ba.adjoint();
    const double w_ba = energy(h_a, r3) - energy(h_b, r2);
    CMat r4 = therm_hot.apply(r3);
    const double q_h = energy(h_a, r4) - energy(h_a, r3);
    rep.strokes.push_back({StrokeKind::IsentropicCompression, w_ab, 0.0, ramp_time, "A->B"});
    rep.strokes.push_back({StrokeKind::ColdIsochore, 0.0, q_c, thermalization_time, "B->C"});
    rep.strokes.push_back({StrokeKind::IsentropicExpansion, w_ba, 0.0, ramp_time, "C->D"});
    rep.strokes.push_back({StrokeKind::HotIsochore, 0.0, q_h, thermalization_time, "D->A"});
    rep.q_hot = q_h;
    rep.q_cold = q_c;
    out.state_after_cold = r2;
    out.state_after_hot = r4;
    rho = qcore::hermitian_part(r4);
    const double scale = std::max({std::abs(w_ab), std::abs(w_ba), std::abs(q_h), std::abs(q_c), 1e-300});
    if (rep.first_law_residual() <= 1e-11 * scale && qcore::trace_distance(rho, start) < 1e-12) break;
  }
  finalize(rep, carnot_efficiency(t_hot, t_cold), carnot_cop(t_hot, t_cold));
  out.cycle = rep;
  CycleReport ideal = otto_qho(omega_a, omega_b, t_hot, t_cold);
  out.ideal_work_output = ideal.net_work_output;
  out.friction = ideal.net_work_output - rep.net_work_output;
  return out;
}

// ---------------------------------------------------------------------------

double two_level_excited_population(double omega, double temperature) {
  // levels -omega (ground) and +omega (excited)
  return 1.0 / (1.0 + std::exp(2.0 * omega / temperature));
}

CycleReport two_stroke(double omega_k, double omega_un, double t_hot, double t_cold, double theta) {
  require(omega_k > omega_un && omega_un > 0, "need omega_k > omega_un > 0");
  require(t_hot > t_cold && t_cold > 0, "need T_h > T_c > 0");
  require(theta >= 0 && theta <= pi, "theta must lie in [0, pi]");
  const double n_k = two_level_excited_population(omega_k, t_hot);
  const double n_un = two_level_excited_population(omega_un, t_cold);
  const double s2 = std::pow(std::sin(theta), 2);
  const double dn = n_k - n_un;
  const double w = -2.0 * (omega_k - omega_un) * dn * s2;
  const double q_h = 2.0 * omega_k * dn * s2;
  const double q_c = -2.0 * omega_un * dn * s2;
  CycleReport r;
  r.strokes.push_back({StrokeKind::UnitaryStroke, w, 0.0, std::nullopt, "swap"});
  r.strokes.push_back({StrokeKind::ThermalizationStroke, 0.0, q_h, std::nullopt, "hot"});
  r.strokes.push_back({StrokeKind::ThermalizationStroke, 0.0, q_c, std::nullopt, "cold"});
  r.q_hot = q_h;
  r.q_cold = q_c;
  finalize(r, carnot_efficiency(t_hot, t_cold), carnot_cop(t_hot, t_cold));
  if (r.mode == MachineMode::Engine) {
    r.efficiency = 1.0 - omega_un / omega_k;
    r.carnot_margin = carnot_efficiency(t_hot, t_cold) - *r.efficiency;
  }
  return r;
}

// ---------------------------------------------------------------------------

double OutcoupledParams::max_gap() const {
  return 2.0 * std::sqrt(delta * delta + std::pow(sweep_rate * period, 2) / 4.0);
}

OutcoupledParams OutcoupledParams::reference(double delta) {
  OutcoupledParams p;
  p.delta = delta;
  p.coupling = 0.02;
  p.kick_fraction = 0.1 / delta;
  p.period = 20.0 / delta;
  p.oscillator_freq = 2.0 * pi * 0.05 / p.period;
  p.sweep_rate = 0.5 * delta * delta;
  p.beta_cold = 1.0 / delta;
  p.beta_hot = 1.0 / (4.0 * p.max_gap());
  return p;
}

void OutcoupledParams::validate() const {
  require(delta > 0 && period > 0 && oscillator_freq > 0, "delta, period and oscillator frequency must be positive");
  require(kick_fraction > 0 && kick_fraction < 0.5, "kick must fall inside the compression stroke");
  require(beta_cold > 0 && beta_hot > 0, "inverse temperatures must be positive");
  require(cutoff >= 2, "cutoff must be at least 2");
}

namespace {

// Single-cycle map on the oscillator state; the engine enters each cycle in
// the cold Gibbs state and is reset to the hot Gibbs state at mid-cycle.
class OutcoupledCycle {
 public:
  explicit OutcoupledCycle(const OutcoupledParams& p) : p_(p) {
    p.validate();
    const int d = p.cutoff + 1;
    const double tp = p.period, tk = p.kick_fraction * tp;
    const CMat sx = qcore::pauli_x(), sz = qcore::pauli_z();
    auto h_engine = [&](double t) {
      double om = t <= tp / 2 ? -p.sweep_rate * t : -p.sweep_rate * (tp - t);
      return CMat(p.delta * sx + om * sz);
    };
    const CMat u1 = qcore::time_ordered_propagator(h_engine, 0.0, tk, {}, 1e-13);
    const CMat u2 = qcore::time_ordered_propagator(h_engine, tk, tp / 2, {}, 1e-13);
    const CMat u3 = qcore::time_ordered_propagator(h_engine, tp / 2, tp, {}, 1e-13);
    CMat a = qcore::annihilation(p.cutoff);
    h_s_ = p.oscillator_freq * qcore::number_operator(p.cutoff);
    auto free_osc = [&](double t) {
      CMat f = CMat::Zero(d, d);
      for (int n = 0; n < d; ++n) f(n, n) = std::exp(-I * p.oscillator_freq * static_cast<double>(n) * t);
      return f;
    };
    before_kick_ = qcore::kron(u1, free_osc(tk));
    after_kick_ = qcore::kron(u2, free_osc(tp / 2 - tk));
    second_half_ = qcore::kron(u3, free_osc(tp / 2));
    kick_ = qcore::matrix_exp(qcore::kron(sx, a + a.adjoint()), -I * p.coupling);
    cold_ = qcore::gibbs_matrix(h_engine(0.0), 1.0 / p.beta_cold);
    hot_ = qcore::gibbs_matrix(h_engine(tp / 2), 1.0 / p.beta_hot);
    space_ = qcore::CompositeSpace{{2, d}};
  }

  CMat apply(const CMat& rho_s) const {
    CMat r = qcore::kron(cold_, rho_s);
    r = before_kick_ * r * before_kick_.adjoint();
    r = kick_ * r * kick_.adjoint();
    r = after_kick_ * r * after_kick_.adjoint();
    r = qcore::kron(hot_, qcore::partial_trace_matrix(r, space_, {1}));
    r = second_half_ * r * second_half_.adjoint();
    return qcore::partial_trace_matrix(r, space_, {1});
  }

  void check_tail(const CMat& rho_s) const {
    const double top = rho_s(rho_s.rows() - 1, rho_s.rows() - 1).real();
    if (top >= 1e-10)
      throw Error(ErrorKind::CutoffTooSmall,
                  "oscillator level " + std::to_string(p_.cutoff) + " holds population " + std::to_string(top));
  }

  const CMat& h_s() const { return h_s_; }
  Eigen::Index dim() const { return h_s_.rows(); }

 private:
  OutcoupledParams p_;
  CMat h_s_, before_kick_, after_kick_, second_half_, kick_, cold_, hot_;
  qcore::CompositeSpace space_;
};

}  // namespace

double outcoupled_multicycle(const OutcoupledParams& p, int n_cycles, bool per_cycle_measurement) {
  require(n_cycles >= 0, "cycle count must be non-negative");
  OutcoupledCycle cyc(p);
  CMat rho = CMat::Zero(cyc.dim(), cyc.dim());
  rho(0, 0) = 1.0;
  for (int n = 0; n < n_cycles; ++n) {
    rho = cyc.apply(rho);
    if (per_cycle_measurement) rho = CMat(rho.diagonal().asDiagonal());
    cyc.check_tail(rho);
  }
  return energy(cyc.h_s(), rho);
}

double outcoupled_projective_work(const OutcoupledParams& p, int n_cycles) {
  require(n_cycles >= 0, "cycle count must be non-negative");
  OutcoupledCycle cyc(p);
  const Eigen::Index d = cyc.dim();
  Eigen::MatrixXd trans(d, d);  // trans(i, k) = probability of k -> i over one cycle
  for (Eigen::Index k = 0; k < d; ++k) {
    CMat proj = CMat::Zero(d, d);
    proj(k, k) = 1.0;
    trans.col(k) = cyc.apply(proj).diagonal().real();
  }
  Eigen::VectorXd prob = Eigen::VectorXd::Zero(d);
  prob(0) = 1.0;
  for (int n = 0; n < n_cycles; ++n) {
    prob = trans * prob;
    if (prob(d - 1) >= 1e-10) throw Error(ErrorKind::CutoffTooSmall, "oscillator tail above 1e-10");
  }
  return cyc.h_s().diagonal().real().dot(prob);
}

// ---------------------------------------------------------------------------

double IndistinctParams::gap(double t) const {
  const double om = omega0 + sweep_rate * t;
  return std::sqrt(om * om + delta * delta);
}

IndistinctParams IndistinctParams::reference(double delta, double omega0) {
  IndistinctParams p;
  p.delta = delta;
  p.omega0 = omega0;
  p.sweep_rate = 0.1 * omega0 * omega0;
  p.period = 20.0 / omega0;
  p.kick_time = 0.35 * p.period / 2.0;
  p.beta_cold = 2.0 / p.gap(0.0);
  p.beta_hot = 1.0 / (4.0 * p.gap(p.period / 2.0));
  return p;
}

namespace {

void check_indistinct(int n_atoms, const IndistinctParams& p) {
  require(n_atoms >= 1 && n_atoms <= 12, "atom count must lie in [1, 12]");
  require(p.kick_time > 0 && p.kick_time < p.period / 2, "kick must fall inside the compression stroke");
  require(p.beta_cold > 0, "cold inverse temperature must be positive");
}

// Compression-stroke propagator up to the kick for H = delta X + Omega(t) Z.
CMat kick_propagator(const CMat& x, const CMat& z, const IndistinctParams& p) {
  auto h = [&](double t) { return CMat(p.delta * x + (p.omega0 + p.sweep_rate * t) * z); };
  return qcore::time_ordered_propagator(h, 0.0, p.kick_time, {}, 1e-13);
}

}  // namespace

double kicked_variance_distinguishable(int n_atoms, const IndistinctParams& p) {
  check_indistinct(n_atoms, p);
  const CMat sx = qcore::pauli_x(), sz = qcore::pauli_z();
  const CMat u = kick_propagator(sx, sz, p);
  qcore::EigenSystem es = qcore::hermitian_eig(CMat(p.delta * sx + p.omega0 * sz));
  // Single-atom eigenstates, their Boltzmann weights and <sigma_x> after the sweep.
  double weight[2], mx[2];
  const double e0 = es.values(0);
  double z = 0.0;
  for (int c = 0; c < 2; ++c) {
    weight[c] = std::exp(-p.beta_cold * (es.values(c) - e0));
    z += weight[c];
    qcore::CVec phi = u * es.vectors.col(c);
    mx[c] = phi.dot(sx * phi).real();
  }
  for (double& w : weight) w /= z;

  // Sum over every product configuration: ||V|c>||^2 = N + (sum_j m_j)^2 - sum_j m_j^2.
  double total = 0.0;
  for (unsigned long cfg = 0; cfg < (1ul << n_atoms); ++cfg) {
    double prob = 1.0, sum = 0.0, sum_sq = 0.0;
    for (int j = 0; j < n_atoms; ++j) {
      int c = (cfg >> j) & 1ul;
      prob *= weight[c];
      sum += mx[c];
      sum_sq += mx[c] * mx[c];
    }
    total += prob * (n_atoms + sum * sum - sum_sq);
  }
  return total;
}

double kicked_variance_indistinguishable(int n_atoms, const IndistinctParams& p) {
  check_indistinct(n_atoms, p);
  qcore::SpinOps s = qcore::spin_operators(n_atoms);
  const CMat sx = 2.0 * s.jx, sz = 2.0 * s.jz;
  const CMat u = kick_propagator(sx, sz, p);
  const CMat rho = qcore::gibbs_matrix(CMat(p.delta * sx + p.omega0 * sz), 1.0 / p.beta_cold);
  const CMat v = u.adjoint() * sx * u;
  return qcore::expectation(rho, CMat(v * v));
}

double outcoupled_indistinct_ratio(int n_atoms, const IndistinctParams& p) {
  return kicked_variance_indistinguishable(n_atoms, p) / kicked_variance_distinguishable(n_atoms, p);
}

// ---------------------------------------------------------------------------

namespace {

// Density vector spanning the null space of a 9 x 9 superoperator, trace normalised.
CMat fixed_point(const CMat& op, Eigen::Index d) {
  Eigen::JacobiSVD<CMat> svd(op, Eigen::ComputeFullV);
  qcore::CVec v = svd.matrixV().col(op.cols() - 1);
  CMat rho = qcore::devectorize(v, d);
  return qcore::hermitian_part(rho / rho.trace());
}

}  // namespace

EquivalencePoint stroke_continuous_equivalence(double cycle_time, const EquivalenceModel& m) {
  require(cycle_time > 0, "cycle time must be positive");
  require(m.omega_h > m.omega_c && m.omega_c > 0, "need omega_h > omega_c > 0");
  require(m.t_hot > 0 && m.t_cold > 0, "temperatures must be positive");
  const Eigen::Index d = 3;
  CMat h0 = CMat::Zero(d, d);
  h0(1, 1) = m.omega_c;
  h0(2, 2) = m.omega_h;
  auto ket_bra = [d](int i, int j) {
    CMat k = CMat::Zero(d, d);
    k(i, j) = 1.0;
    return k;
  };
  // Interaction picture: the secular dissipators and the resonant field are time independent.
  lindblad::BathSpec hot{"hot", m.t_hot, lindblad::SpectralFunction::flat(m.rate_hot), {}};
  lindblad::BathSpec cold{"cold", m.t_cold, lindblad::SpectralFunction::flat(m.rate_cold), {}};
  CMat diss = lindblad::superop_dissipator(ket_bra(0, 2), hot.rate(m.omega_h)) +
              lindblad::superop_dissipator(ket_bra(2, 0), hot.rate(-m.omega_h)) +
              lindblad::superop_dissipator(ket_bra(0, 1), cold.rate(m.omega_c)) +
              lindblad::superop_dissipator(ket_bra(1, 0), cold.rate(-m.omega_c));
  CMat field = lindblad::superop_hamiltonian(CMat(m.field * (ket_bra(1, 2) + ket_bra(2, 1))));

  EquivalencePoint out;
  out.cycle_time = cycle_time;
  out.bath_action = lindblad::bath_action([&diss](double) { return diss; }, cycle_time);

  auto e_of = [&h0](const CMat& rho) { return qcore::expectation(rho, h0); };

  const CMat id = CMat::Identity(d * d, d * d);
  CMat rho_ss = fixed_point(CMat(field + diss), d);
  const CMat d_rho = qcore::devectorize(diss * qcore::vectorize(rho_ss), d);
  out.work_continuous = -cycle_time * e_of(d_rho);

  const CMat half_field = qcore::matrix_exp(field, 0.5 * cycle_time);
  const CMat therm = qcore::matrix_exp(diss, cycle_time);
  CMat rho0 = fixed_point(CMat(half_field * therm * half_field - id), d);
  CMat rho1 = qcore::devectorize(half_field * qcore::vectorize(rho0), d);
  CMat rho2 = qcore::devectorize(therm * qcore::vectorize(rho1), d);
  out.work_stroke = -(e_of(rho2) - e_of(rho1));
  return out;
}

}  // namespace qtherm::cycles
