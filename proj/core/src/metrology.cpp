#include "qtherm/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>
#include <boost/math/special_functions/laguerre.hpp>
#include <boost/math/tools/minima.hpp>

#include "qtherm/cycles.hpp"

namespace qtherm::metrology {

using qcore::cplx;
using qcore::I;

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::InvalidParams, what);
}

}  // namespace

double ParamFamily::step(double theta) const { return dtheta > 0 ? dtheta : 1e-5 * std::max(std::abs(theta), 1.0); }

CMat ParamFamily::derivative(double theta) const {
  const double h = step(theta);
  return (generator(theta + h) - generator(theta - h)) / (2.0 * h);
}

namespace {

struct SpectralData {
  qcore::EigenSystem es;
  CMat d_eig;  // derivative of rho in the eigenbasis of rho
  double scale = 0.0;
};

SpectralData spectral(const ParamFamily& family, double theta) {
  SpectralData s;
  s.es = qcore::hermitian_eig(family.generator(theta));
  s.d_eig = s.es.vectors.adjoint() * family.derivative(theta) * s.es.vectors;
  s.scale = std::max(s.d_eig.cwiseAbs().maxCoeff(), 1e-300);
  return s;
}

// SLD matrix elements in the eigenbasis; zero on the kernel-kernel block.
CMat sld_eig(const SpectralData& s) {
  const Eigen::Index d = s.es.values.size();
  CMat l = CMat::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const double denom = s.es.values(i) + s.es.values(j);
      if (denom > kSldFloor) {
        l(i, j) = 2.0 * s.d_eig(i, j) / denom;
      } else if (std::abs(s.d_eig(i, j)) > 1e-6 * s.scale) {
        throw Error(ErrorKind::SingularState, "state derivative leaves the support of the state");
      }
    }
  return qcore::hermitian_part(l);
}

}  // namespace

CMat sld(const ParamFamily& family, double theta) {
  SpectralData s = spectral(family, theta);
  return s.es.vectors * sld_eig(s) * s.es.vectors.adjoint();
}

FisherReport qfi(const ParamFamily& family, double theta) {
  SpectralData s = spectral(family, theta);
  const CMat l_eig = sld_eig(s);
  const Eigen::Index d = s.es.values.size();
  // Population and coherence terms; d_eig(j, i) = (p_i - p_j) <phi_j|d phi_i> off the diagonal.
  double pop = 0.0, coh = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double p = s.es.values(i);
    if (p > kSldFloor) pop += std::norm(s.d_eig(i, i)) / p;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double denom = s.es.values(i) + s.es.values(j);
      if (i != j && denom > kSldFloor) coh += 2.0 * std::norm(s.d_eig(j, i)) / denom;
    }
  }
  FisherReport r;
  r.qfi = pop + coh;
  r.sld = s.es.vectors * l_eig * s.es.vectors.adjoint();
  const CMat rho = family.generator(theta);
  const double direct = (rho * r.sld * r.sld).trace().real();
  if (std::abs(direct - r.qfi) > 1e-7 * std::max(1.0, std::abs(r.qfi)))
    throw Error(ErrorKind::NumericalInstability, "spectral QFI disagrees with Tr(rho L^2)");
  r.cramer_rao_floor = r.qfi > 0 ? 1.0 / r.qfi : std::numeric_limits<double>::infinity();
  return r;
}

FisherReport qfi(const ParamFamily& family, double theta, const std::vector<CMat>& povm) {
  FisherReport r = qfi(family, theta);
  r.cfi = cfi(family, theta, povm);
  return r;
}

double cfi(const ParamFamily& family, double theta, const std::vector<CMat>& povm) {
  if (povm.empty()) throw Error(ErrorKind::InvalidPOVM, "empty measurement");
  const CMat rho = family.generator(theta);
  const CMat drho = family.derivative(theta);
  CMat sum = CMat::Zero(rho.rows(), rho.cols());
  for (const CMat& e : povm) {
    if (e.rows() != rho.rows() || e.cols() != rho.cols())
      throw Error(ErrorKind::InvalidPOVM, "element dimension does not match the state");
    if ((e - e.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
      throw Error(ErrorKind::InvalidPOVM, "element is not Hermitian");
    if (qcore::hermitian_eig(e).values(0) < -1e-10) throw Error(ErrorKind::InvalidPOVM, "element is not positive");
    sum += e;
  }
  if ((sum - CMat::Identity(rho.rows(), rho.cols())).cwiseAbs().maxCoeff() > 1e-10)
    throw Error(ErrorKind::InvalidPOVM, "elements do not sum to the identity");
  double total = 0.0;
  for (const CMat& e : povm) {
    const double p = qcore::expectation(rho, e);
    if (p > kCfiFloor) total += std::pow(qcore::expectation(drho, e), 2) / p;
  }
  return total;
}

double fidelity_susceptibility(const ParamFamily& family, double theta, double eps) {
  require(eps > 0, "eps must be positive");
  const qcore::DensityMatrix here(family.generator(theta));
  // Averaging both sides cancels the odd orders in e.
  auto chi = [&](double e) {
    const qcore::DensityMatrix up(family.generator(theta + e)), down(family.generator(theta - e));
    return 4.0 * (2.0 - qcore::fidelity(here, up) - qcore::fidelity(here, down)) / (e * e);
  };
  return (4.0 * chi(0.5 * eps) - chi(eps)) / 3.0;
}

double locate_null(const std::vector<double>& xs, const std::vector<double>& ys, size_t* bracket) {
  require(xs.size() == ys.size(), "sweep and observable lengths differ");
  for (size_t k = 0; k + 1 < xs.size(); ++k) {
    if (ys[k] == 0.0 && k > 0 && ys[k - 1] * ys[k + 1] < 0) {
      if (bracket) *bracket = k;
      return xs[k];
    }
    if (ys[k] * ys[k + 1] < 0) {
      if (bracket) *bracket = k;
      return xs[k] - ys[k] * (xs[k + 1] - xs[k]) / (ys[k + 1] - ys[k]);
    }
  }
  throw Error(ErrorKind::NullNotBracketed, "observable does not change sign on the grid");
}

CMat josephson_dressing(double lambda, int n_max) {
  require(lambda > 0, "zero-point amplitude must be positive");
  require(n_max >= 0, "cutoff must be non-negative");
  CMat a = CMat::Zero(n_max + 1, n_max + 1);
  const double pre = 2.0 * lambda * std::exp(-2.0 * lambda * lambda);
  for (int n = 0; n <= n_max; ++n)
    a(n, n) = pre * boost::math::laguerre(static_cast<unsigned>(n), 1u, 4.0 * lambda * lambda) / (n + 1);
  return a;
}

namespace {

double bose(double omega, double t) { return 1.0 / std::expm1(omega / t); }

void check_thermometer(const ThermometerModel& m) {
  require(m.omega_h > 0 && m.omega_c > 0, "cavity frequencies must be positive");
  require(m.kappa_h > 0 && m.kappa_c > 0, "bath rates must be positive");
  require(m.g > 0, "exchange coupling must be positive");
}

double tail(double omega, double t, int n_max) {
  const double x = omega / t;
  return -std::expm1(-x) * std::exp(-x * n_max);
}

}  // namespace

int thermometer_cutoff(double omega, double temperature) {
  int n = 1;
  while (tail(omega, temperature, n) >= 1e-8) ++n;
  return n;
}

double thermometer_current_exact(const ThermometerModel& m, double t_hot, double t_cold) {
  check_thermometer(m);
  const double nh = bose(m.omega_h, t_hot), nc = bose(m.omega_c, t_cold);
  const double k = m.kappa_h * m.kappa_c;
  return 8.0 * m.g * m.g * k * (nh - nc) / ((m.kappa_h + m.kappa_c) * (k + 4.0 * m.g * m.g));
}

double thermometer_current(const ThermometerModel& m, double t_hot, double t_cold, int n_max) {
  check_thermometer(m);
  require(t_hot > 0 && t_cold > 0, "temperatures must be positive");
  require(n_max >= 1, "cutoff must be at least 1");
  if (tail(m.omega_h, t_hot, n_max) >= 1e-8 || tail(m.omega_c, t_cold, n_max) >= 1e-8)
    throw Error(ErrorKind::CutoffTooSmall, "thermal tail at level " + std::to_string(n_max) + " exceeds 1e-8");

  // Product Fock states (n_h, n_c). The exchange term conserves n_h + n_c and the
  // baths move whole blocks, so the steady state is block diagonal in it.
  const int side = n_max + 1, dim = side * side;
  auto state = [side](int nh, int nc) { return nh * side + nc; };
  std::vector<int> level(dim);
  for (int nh = 0; nh < side; ++nh)
    for (int nc = 0; nc < side; ++nc) level[state(nh, nc)] = nh + nc;
  std::vector<int> index(static_cast<size_t>(dim) * dim, -1);
  std::vector<std::pair<int, int>> pairs;
  for (int s = 0; s < dim; ++s)
    for (int t = 0; t < dim; ++t)
      if (level[s] == level[t]) {
        index[static_cast<size_t>(s) * dim + t] = static_cast<int>(pairs.size());
        pairs.emplace_back(s, t);
      }
  const Eigen::Index unknowns = static_cast<Eigen::Index>(pairs.size());

  // Sparse single-mode actions: target state and amplitude, or none.
  struct Move {
    int to;
    double amp;
  };
  auto lower_h = [&](int s) -> Move {
    int nh = s / side, nc = s % side;
    return nh > 0 ? Move{state(nh - 1, nc), std::sqrt(nh)} : Move{-1, 0};
  };
  auto raise_h = [&](int s) -> Move {
    int nh = s / side, nc = s % side;
    return nh < n_max ? Move{state(nh + 1, nc), std::sqrt(nh + 1.0)} : Move{-1, 0};
  };
  auto lower_c = [&](int s) -> Move {
    int nh = s / side, nc = s % side;
    return nc > 0 ? Move{state(nh, nc - 1), std::sqrt(nc)} : Move{-1, 0};
  };
  auto raise_c = [&](int s) -> Move {
    int nh = s / side, nc = s % side;
    return nc < n_max ? Move{state(nh, nc + 1), std::sqrt(nc + 1.0)} : Move{-1, 0};
  };
  // H |s> = g (a_h^+ a_c + a_c^+ a_h) |s>, real symmetric.
  auto apply_h = [&](int s) {
    std::vector<std::pair<int, double>> out;
    Move c = lower_c(s);
    if (c.to >= 0) {
      Move h = raise_h(c.to);
      if (h.to >= 0) out.emplace_back(h.to, m.g * c.amp * h.amp);
    }
    Move hh = lower_h(s);
    if (hh.to >= 0) {
      Move cc = raise_c(hh.to);
      if (cc.to >= 0) out.emplace_back(cc.to, m.g * hh.amp * cc.amp);
    }
    return out;
  };

  const double nbh = bose(m.omega_h, t_hot), nbc = bose(m.omega_c, t_cold);
  struct Jump {
    std::function<Move(int)> op;
    double rate;
  };
  const std::vector<Jump> jumps = {{lower_h, m.kappa_h * (nbh + 1)},
                                   {raise_h, m.kappa_h * nbh},
                                   {lower_c, m.kappa_c * (nbc + 1)},
                                   {raise_c, m.kappa_c * nbc}};
  // <s| A^+ A |s> for each jump, with the truncated ladder matrices.
  auto occupation = [&](const Jump& j, int s) {
    Move mv = j.op(s);
    return mv.to >= 0 ? mv.amp * mv.amp : 0.0;
  };

  // Row 0 carries the trace condition in place of one balance equation.
  std::vector<Eigen::Triplet<cplx>> entries;
  for (Eigen::Index col = 0; col < unknowns; ++col) {
    auto [s, t] = pairs[col];
    auto add = [&](int a, int b, cplx v) {
      int row = index[static_cast<size_t>(a) * dim + b];
      if (row > 0) entries.emplace_back(row, col, v);
    };
    for (auto [to, amp] : apply_h(s)) add(to, t, -I * amp);
    for (auto [to, amp] : apply_h(t)) add(s, to, I * amp);
    for (const Jump& j : jumps) {
      Move ms = j.op(s), mt = j.op(t);
      if (ms.to >= 0 && mt.to >= 0) add(ms.to, mt.to, j.rate * ms.amp * mt.amp);
      add(s, t, -0.5 * j.rate * (occupation(j, s) + occupation(j, t)));
    }
  }
  for (int s = 0; s < dim; ++s) entries.emplace_back(0, index[static_cast<size_t>(s) * dim + s], 1.0);
  Eigen::SparseMatrix<cplx> liou(unknowns, unknowns);
  liou.setFromTriplets(entries.begin(), entries.end());
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(unknowns);
  rhs(0) = 1.0;
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
  lu.compute(liou);
  if (lu.info() != Eigen::Success) throw Error(ErrorKind::NumericalInstability, "steady-state system is singular");
  Eigen::VectorXcd rho = lu.solve(rhs);

  // <I> = 2 i g <a_h^+ a_c - a_c^+ a_h> = -4 g Im <a_h^+ a_c>.
  cplx coherence = 0.0;
  for (int s = 0; s < dim; ++s) {
    // <a_h^+ a_c> = sum_{s,t} rho_{t s} <s| a_h^+ a_c |t>
    Move c = lower_c(s);
    if (c.to < 0) continue;
    Move h = raise_h(c.to);
    if (h.to < 0) continue;
    int row = index[static_cast<size_t>(s) * dim + h.to];
    if (row >= 0) coherence += rho(row) * c.amp * h.amp;
  }
  return -4.0 * m.g * coherence.imag();
}

NullProtocolResult thermometry_simulate(const ThermometerModel& m, double t_cold_true,
                                        const std::vector<double>& t_hot_grid, int n_max) {
  check_thermometer(m);
  require(t_cold_true > 0, "cold temperature must be positive");
  require(t_hot_grid.size() >= 2, "grid needs at least two points");
  require(std::is_sorted(t_hot_grid.begin(), t_hot_grid.end()) && t_hot_grid.front() > 0,
          "grid must be positive and ascending");
  const double hottest = t_hot_grid.back();
  if (n_max <= 0)
    n_max = std::max(thermometer_cutoff(m.omega_h, hottest), thermometer_cutoff(m.omega_c, t_cold_true));

  NullProtocolResult r;
  std::vector<double> ys;
  for (double th : t_hot_grid) {
    ys.push_back(thermometer_current(m, th, t_cold_true, n_max));
    r.sweep_trace.emplace_back(th, ys.back());
  }
  size_t k = 0;
  r.null_location = locate_null(t_hot_grid, ys, &k);
  r.estimated_parameter = r.null_location * m.omega_c / m.omega_h;
  r.error_estimate = (t_hot_grid[k + 1] - t_hot_grid[k]) * m.omega_c / m.omega_h;
  return r;
}

double thermometry_c1(double kappa_h, double kappa_c, double g) {
  const double kh = kappa_h, kc = kappa_c, g2 = g * g;
  const double root = std::sqrt(8 * g2 * kc * kh + kh * kh * (kc * kc + 16 * g2) + 2 * kc * kh * kh * kh +
                                32 * g2 * g2 + kh * kh * kh * kh);
  return 2 * (kh + kc) * (kh * kc + 4 * g2) / (kc * root);
}

double thermometry_c2(double kappa_h, double kappa_c, double g) {
  return (kappa_h + kappa_c) * (kappa_h * kappa_c + 4 * g * g) / (std::sqrt(2.0) * kappa_h * kappa_c * g);
}

ThermometryError thermometry_error(const ThermometerModel& m, double t_cold, double delta_current,
                                   double delta_t_hot) {
  check_thermometer(m);
  require(t_cold > 0, "temperature must be positive");
  require(delta_current >= 0 && delta_t_hot >= 0, "measurement errors must be non-negative");
  ThermometryError e;
  // At the null the hot occupation equals the cold one; only the cold one moves with T_c.
  const double x = m.omega_c / (2 * t_cold);
  const double dn_dt = m.omega_c / (4 * t_cold * t_cold * std::sinh(x) * std::sinh(x));
  const double k = m.kappa_h * m.kappa_c;
  e.current_slope = -8 * m.g * m.g * k * dn_dt / ((m.kappa_h + m.kappa_c) * (k + 4 * m.g * m.g));
  e.delta_tc = std::sqrt(std::pow(delta_current / e.current_slope, 2) +
                         std::pow(m.omega_c / m.omega_h * delta_t_hot, 2));
  e.c1 = thermometry_c1(m.kappa_h, m.kappa_c, m.g);
  e.c2 = thermometry_c2(m.kappa_h, m.kappa_c, m.g);
  e.c1_over_c2 = e.c1 / e.c2;
  e.alpha = e.delta_tc * m.omega_c / (t_cold * t_cold * std::sinh(x));
  return e;
}

RatioOptimum thermometry_optimal_ratio(double log_range) {
  require(log_range > 0, "search range must be positive");
  using boost::math::tools::brent_find_minima;
  const int bits = std::numeric_limits<double>::digits / 2;
  // The ratio is scale free, so kappa_h = 1.
  auto ratio = [](double log_kc, double log_g) {
    const double kc = std::pow(10.0, log_kc), g = std::pow(10.0, log_g);
    return thermometry_c2(1.0, kc, g) / thermometry_c1(1.0, kc, g);
  };
  auto best_g = [&](double log_kc) {
    return brent_find_minima([&](double lg) { return ratio(log_kc, lg); }, -log_range, log_range, bits);
  };
  auto outer = brent_find_minima([&](double lk) { return best_g(lk).second; }, -log_range, log_range, bits);
  RatioOptimum r;
  r.kappa_c = std::pow(10.0, outer.first);
  r.g = std::pow(10.0, best_g(outer.first).first);
  r.ratio = outer.second;
  return r;
}

NullProtocolResult magnetometry_null(double omega_un_true, double t_hot, double t_cold, double theta,
                                     const std::vector<double>& omega_k_grid, double omega_k_error) {
  require(omega_k_grid.size() >= 2, "grid needs at least two points");
  require(std::is_sorted(omega_k_grid.begin(), omega_k_grid.end()), "grid must be ascending");
  NullProtocolResult r;
  std::vector<double> ys;
  for (double wk : omega_k_grid) {
    ys.push_back(cycles::two_stroke(wk, omega_un_true, t_hot, t_cold, theta).total_work());
    r.sweep_trace.emplace_back(wk, ys.back());
  }
  size_t k = 0;
  r.null_location = locate_null(omega_k_grid, ys, &k);
  r.estimated_parameter = r.null_location * t_cold / t_hot;
  const double direct = omega_k_error > 0 ? omega_k_error : omega_k_grid[k + 1] - omega_k_grid[k];
  r.error_estimate = direct * t_cold / t_hot;
  return r;
}

}  // namespace qtherm::metrology
