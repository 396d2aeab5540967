#include "qtherm/battery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Sparse>

#include <boost/math/tools/toms748_solve.hpp>

namespace qtherm::battery {

using qcore::cplx;
using qcore::I;

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::InvalidParams, what);
}

long ipow(long base, int e) {
  long r = 1;
  for (int k = 0; k < e; ++k) {
    r *= base;
    if (r > kMaxDimension * 1024) return r;
  }
  return r;
}

double trace_real(const CMat& a, const CMat& b) { return (a * b).trace().real(); }

// Eigendecomposition that uses the real solver when the matrix has no imaginary part.
qcore::EigenSystem eig(const CMat& h) {
  if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.real());
    return {es.eigenvalues(), es.eigenvectors().cast<cplx>()};
  }
  return qcore::hermitian_eig(h);
}

// m * x for a matrix stored as real when its imaginary part vanishes.
struct MaybeReal {
  CMat full;
  Eigen::MatrixXd real;
  bool is_real = false;

  explicit MaybeReal(CMat m) : full(std::move(m)) {
    is_real = full.size() == 0 || full.imag().cwiseAbs().maxCoeff() == 0.0;
    if (is_real) real = full.real();
  }
  CMat operator*(const CMat& x) const {
    if (!is_real) return full * x;
    CMat out(real.rows(), x.cols());
    out.real() = real * x.real();
    out.imag() = real * x.imag();
    return out;
  }
};

// Index ranges [start, end) of eigenvalues equal within tol.
std::vector<std::pair<Eigen::Index, Eigen::Index>> group_levels(const RVec& values, double tol) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  Eigen::Index start = 0;
  for (Eigen::Index k = 1; k <= values.size(); ++k) {
    if (k == values.size() || values(k) - values(k - 1) > tol * scale) {
      out.emplace_back(start, k);
      start = k;
    }
  }
  return out;
}

RVec sorted_spectrum_desc(const CMat& rho) {
  Eigen::SelfAdjointEigenSolver<CMat> es(rho, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

double entropy_of(const RVec& p) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k)
    if (p(k) > 1e-16) s -= p(k) * std::log(p(k));
  return s;
}

RVec gibbs_populations(const RVec& levels, double beta) {
  RVec p = (-beta * (levels.array() - levels(0))).exp();
  return p / p.sum();
}

// op acting on factor `site` of n factors of dimension d, applied to each column.
CMat apply_local(const CMat& m, const CMat& op, int site, int n, int d) {
  const long stride = ipow(d, n - 1 - site);
  CMat out = CMat::Zero(m.rows(), m.cols());
  for (Eigen::Index idx = 0; idx < m.rows(); ++idx) {
    const long digit = (idx / stride) % d;
    const Eigen::Index base = idx - digit * stride;
    for (int y = 0; y < d; ++y) {
      const cplx c = op(digit, y);
      if (c != cplx(0.0)) out.row(idx) += c * m.row(base + y * stride);
    }
  }
  return out;
}

double trapezoid_mean(const std::vector<double>& t, const std::vector<double>& y, size_t last) {
  if (last == 0) return y[0];
  double acc = 0.0;
  for (size_t k = 1; k <= last; ++k) acc += 0.5 * (y[k] + y[k - 1]) * (t[k] - t[k - 1]);
  return acc / (t[last] - t[0]);
}

double first_passage(const ChargeTrace& tr, double target) {
  for (size_t k = 1; k < tr.energies.size(); ++k) {
    if (tr.energies[k] >= target) {
      const double e0 = tr.energies[k - 1], e1 = tr.energies[k];
      return tr.times[k - 1] + (target - e0) / (e1 - e0) * (tr.times[k] - tr.times[k - 1]);
    }
  }
  throw Error(ErrorKind::TargetUnreached, "charging never reaches the target energy");
}

}  // namespace

BatterySpec make_battery(const CMat& cell_hamiltonian, int n_cells) {
  qcore::HermitianOperator h(cell_hamiltonian);
  require(n_cells >= 1, "a battery needs at least one cell");
  if (ipow(h.dim(), n_cells) > kMaxDimension) throw Error(ErrorKind::TooLarge, "battery Hilbert space too large");
  BatterySpec s;
  s.cell_hamiltonian = cell_hamiltonian;
  s.n_cells = n_cells;
  s.cell_levels = eig(cell_hamiltonian).values;
  const int d = static_cast<int>(h.dim());
  s.battery_hamiltonian = CMat::Zero(ipow(d, n_cells), ipow(d, n_cells));
  for (int i = 0; i < n_cells; ++i) s.battery_hamiltonian += qcore::embed(cell_hamiltonian, i, n_cells, d);
  return s;
}

CMat passive_state(const CMat& rho, const CMat& h) {
  if (rho.rows() != h.rows()) throw Error(ErrorKind::DimMismatch, "state and Hamiltonian dimensions differ");
  qcore::DensityMatrix checked(rho, 1e-9);
  qcore::EigenSystem he = eig(qcore::HermitianOperator(h).matrix());
  RVec p = sorted_spectrum_desc(checked.matrix());
  return he.vectors * p.cast<cplx>().asDiagonal() * he.vectors.adjoint();
}

EntropyMatch entropy_matched_gibbs(const CMat& h, double entropy) {
  qcore::EigenSystem he = eig(qcore::HermitianOperator(h).matrix());
  const RVec& e = he.values;
  const double d = static_cast<double>(e.size());
  if (entropy < -1e-10 || entropy > std::log(d) + 1e-10)
    throw Error(ErrorKind::InvalidState, "entropy outside [0, ln d]");

  auto s_of = [&](double beta) { return entropy_of(gibbs_populations(e, beta)); };
  const double lo = 1e-8, hi = 1e8;
  EntropyMatch m;
  if (entropy >= s_of(lo)) {
    m.beta = lo;
  } else if (entropy <= s_of(hi)) {
    m.beta = std::numeric_limits<double>::infinity();
  } else {
    // Entropy decreases monotonically in beta; solve in log beta.
    auto f = [&](double lb) { return s_of(std::exp(lb)) - entropy; };
    boost::uintmax_t iters = 200;
    auto tol = [&](double a, double b) { return std::abs(f(0.5 * (a + b))) < 1e-10 || std::abs(b - a) < 1e-15; };
    auto [a, b] = boost::math::tools::toms748_solve(f, std::log(lo), std::log(hi), tol, iters);
    m.beta = std::exp(0.5 * (a + b));
  }
  RVec p;
  if (std::isinf(m.beta)) {
    p = RVec::Zero(e.size());
    auto ground = group_levels(e, 1e-12).front();
    for (Eigen::Index k = ground.first; k < ground.second; ++k) p(k) = 1.0 / static_cast<double>(ground.second);
  } else {
    p = gibbs_populations(e, m.beta);
  }
  m.state = he.vectors * p.cast<cplx>().asDiagonal() * he.vectors.adjoint();
  m.energy = p.dot(e);
  return m;
}

ErgotropyReport ergotropy(const CMat& rho, const CMat& h) {
  ErgotropyReport r;
  r.passive_state = passive_state(rho, h);
  const double energy = trace_real(rho, h);
  r.passive_energy = trace_real(r.passive_state, h);
  r.ergotropy = energy - r.passive_energy;
  RVec p = sorted_spectrum_desc(rho).cwiseMax(0.0);
  EntropyMatch m = entropy_matched_gibbs(h, entropy_of(p / p.sum()));
  r.effective_beta = m.beta;
  r.thermal_bound = energy - m.energy;
  r.bound_gap = r.thermal_bound - r.ergotropy;
  return r;
}

double n_copy_passive_energy(const CMat& sigma, const CMat& h0, int n) {
  require(n >= 1, "copy number must be positive");
  if (sigma.rows() != h0.rows()) throw Error(ErrorKind::DimMismatch, "state and Hamiltonian dimensions differ");
  const Eigen::Index d = sigma.rows();
  if (ipow(d, n) > kMaxDimension) throw Error(ErrorKind::TooLarge, "n-copy space too large");
  RVec s = sorted_spectrum_desc(qcore::DensityMatrix(sigma, 1e-9).matrix());
  RVec e = eig(h0).values;
  std::vector<double> pops{1.0}, levels{0.0};
  for (int c = 0; c < n; ++c) {
    std::vector<double> np, nl;
    np.reserve(pops.size() * d);
    nl.reserve(pops.size() * d);
    for (size_t k = 0; k < pops.size(); ++k)
      for (Eigen::Index j = 0; j < d; ++j) {
        np.push_back(pops[k] * s(j));
        nl.push_back(levels[k] + e(j));
      }
    pops.swap(np);
    levels.swap(nl);
  }
  std::sort(pops.begin(), pops.end(), std::greater<>());
  std::sort(levels.begin(), levels.end());
  return std::inner_product(pops.begin(), pops.end(), levels.begin(), 0.0) / n;
}

double extractable_fraction(const CMat& rho, const CMat& h) {
  const double ground = eig(qcore::HermitianOperator(h).matrix()).values(0);
  CMat shifted = h - ground * CMat::Identity(h.rows(), h.cols());
  const double energy = trace_real(rho, shifted);
  if (energy <= 1e-14 * std::max(1.0, shifted.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::UndefinedFraction, "no energy stored above the ground state");
  return ergotropy(rho, shifted).ergotropy / energy;
}

QSLReport qsl_report(const std::vector<double>& times, const std::vector<CMat>& states,
                     const std::function<CMat(double)>& h_of_t) {
  require(times.size() >= 2 && times.size() == states.size(), "a trajectory needs at least two samples");
  QSLReport r;
  r.bures_distance = qcore::bures_angle(qcore::DensityMatrix(states.front(), 1e-8), qcore::DensityMatrix(states.back(), 1e-8));
  std::vector<double> spread(times.size()), above(times.size());
  for (size_t k = 0; k < times.size(); ++k) {
    CMat h = h_of_t(times[k]);
    const double mean = trace_real(states[k], h);
    spread[k] = std::sqrt(std::max(0.0, trace_real(states[k], h * h) - mean * mean));
    above[k] = mean - eig(h).values(0);
  }
  r.actual_tau = times.back() - times.front();
  r.time_averaged_variance = trapezoid_mean(times, spread, times.size() - 1);
  r.time_averaged_energy = trapezoid_mean(times, above, times.size() - 1);
  const double rate = std::min(r.time_averaged_variance, r.time_averaged_energy);
  if (r.bures_distance > kAngleResolution && rate <= 0.0)
    throw Error(ErrorKind::InconsistentTrajectory, "state moved without energy spread");
  if (r.bures_distance > kAngleResolution) {
    r.tau_mt = r.bures_distance / r.time_averaged_variance;
    r.tau_unified = r.bures_distance / rate;
  }
  r.mt_holds = r.actual_tau >= r.tau_mt - 1e-9;
  r.unified_holds = r.actual_tau >= r.tau_unified - 1e-9;
  return r;
}

EnergyLevels energy_levels(const CMat& h0, double tol) {
  qcore::EigenSystem es = eig(h0);
  EnergyLevels lv;
  auto groups = group_levels(es.values, tol);
  lv.energies.resize(static_cast<Eigen::Index>(groups.size()));
  for (size_t g = 0; g < groups.size(); ++g) {
    auto [a, b] = groups[g];
    lv.energies(static_cast<Eigen::Index>(g)) = es.values.segment(a, b - a).mean();
    lv.bases.push_back(es.vectors.middleCols(a, b - a));
  }
  return lv;
}

std::vector<double> energy_fisher(const std::vector<CMat>& states, const CMat& h0, double dt) {
  require(states.size() >= 3 && dt > 0, "energy Fisher information needs three samples on a uniform grid");
  EnergyLevels lv = energy_levels(h0);
  const size_t n = states.size(), m = lv.bases.size();
  std::vector<RVec> p(n, RVec(static_cast<Eigen::Index>(m)));
  for (size_t k = 0; k < n; ++k)
    for (size_t g = 0; g < m; ++g)
      p[k](static_cast<Eigen::Index>(g)) = (lv.bases[g].adjoint() * states[k] * lv.bases[g]).trace().real();
  std::vector<double> out(n);
  for (size_t k = 0; k < n; ++k) {
    RVec dp;
    if (k == 0)
      dp = (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * dt);
    else if (k == n - 1)
      dp = (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) / (2.0 * dt);
    else
      dp = (p[k + 1] - p[k - 1]) / (2.0 * dt);
    double acc = 0.0;
    for (Eigen::Index g = 0; g < dp.size(); ++g)
      if (p[k](g) >= kPopulationFloor) acc += dp(g) * dp(g) / p[k](g);
    out[k] = acc;
  }
  return out;
}

VarianceParts variance_decomposition(const CMat& rho, const BatterySpec& spec) {
  const int d = static_cast<int>(spec.cell_hamiltonian.rows());
  if (rho.rows() != ipow(d, spec.n_cells)) throw Error(ErrorKind::DimMismatch, "state does not live on the battery space");
  const int n = spec.n_cells;
  std::vector<CMat> applied(n);
  std::vector<double> mean(n);
  for (int i = 0; i < n; ++i) {
    applied[i] = apply_local(rho, spec.cell_hamiltonian, i, n, d);
    mean[i] = applied[i].trace().real();
  }
  VarianceParts v;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double second = apply_local(applied[j], spec.cell_hamiltonian, i, n, d).trace().real();
      (i == j ? v.local_sum : v.entanglement_part) += second - mean[i] * mean[j];
    }
  return v;
}

VarianceParts variance_decomposition(const CVec& psi, const BatterySpec& spec) {
  const int d = static_cast<int>(spec.cell_hamiltonian.rows());
  if (psi.size() != ipow(d, spec.n_cells)) throw Error(ErrorKind::DimMismatch, "state does not live on the battery space");
  const int n = spec.n_cells;
  std::vector<CVec> applied(n);
  std::vector<double> mean(n);
  for (int i = 0; i < n; ++i) {
    applied[i] = apply_local(psi, spec.cell_hamiltonian, i, n, d);
    mean[i] = psi.dot(applied[i]).real();
  }
  VarianceParts v;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      (i == j ? v.local_sum : v.entanglement_part) += applied[i].dot(applied[j]).real() - mean[i] * mean[j];
  return v;
}

double ChargeTrace::mean_power() const {
  if (optimal_index == 0) return 0.0;
  return (energies[optimal_index] - energies[0]) / (times[optimal_index] - times[0]);
}
double ChargeTrace::mean_variance() const { return trapezoid_mean(times, variances, optimal_index); }
double ChargeTrace::mean_fisher() const { return trapezoid_mean(times, energy_fisher, optimal_index); }
double ChargeTrace::mean_tightness() const { return trapezoid_mean(times, bound_tightness, optimal_index); }

double ChargeTrace::max_mean_power() const {
  double best = 0.0;
  for (size_t k = 1; k < times.size(); ++k) best = std::max(best, (energies[k] - energies[0]) / (times[k] - times[0]));
  return best;
}

double power_bound_check(ChargeTrace& trace) {
  double worst = -std::numeric_limits<double>::infinity();
  trace.bound_tightness.resize(trace.powers.size());
  for (size_t k = 0; k < trace.powers.size(); ++k) {
    const double p = trace.powers[k], rhs = trace.variances[k] * trace.energy_fisher[k];
    worst = std::max(worst, p * p - rhs);
    trace.bound_tightness[k] = rhs > 0.0 ? std::clamp(p / std::sqrt(rhs), -1.0, 1.0) : 0.0;
  }
  return worst;
}

ChargeTrace parallel_copies(const ChargeTrace& cell, int n) {
  require(n >= 1, "copy number must be positive");
  ChargeTrace t = cell;
  const double f = n;
  for (auto* series : {&t.energies, &t.powers, &t.variances, &t.energy_fisher, &t.local_variance})
    for (double& x : *series) x *= f;
  for (double& x : t.entanglement_variance) x = 0.0;
  t.capacity *= f;
  return t;
}

double quantum_advantage(const ChargeTrace& parallel, const ChargeTrace& collective, double target_fraction) {
  require(target_fraction > 0.0 && target_fraction <= 1.0, "target fraction must lie in (0, 1]");
  const double cap = parallel.capacity;
  require(std::abs(cap - collective.capacity) <= 1e-6 * cap, "protocols charge batteries of different capacity");
  require(std::abs(parallel.energies.front() - collective.energies.front()) <= 1e-6 * cap,
          "protocols start from different energies");
  const double target = parallel.energies.front() + target_fraction * cap;
  return first_passage(parallel, target) / first_passage(collective, target);
}

ChargeTrace charge_pure(const PureCharging& p) {
  const Eigen::Index dim = p.hamiltonian.rows();
  if (p.battery_hamiltonian.rows() != dim || p.initial.size() != dim)
    throw Error(ErrorKind::DimMismatch, "charging operators and state have different dimensions");
  require(p.tau > 0 && p.dt > 0, "charging time and step must be positive");
  qcore::HermitianOperator checked_h(p.hamiltonian), checked_h0(p.battery_hamiltonian);

  qcore::EigenSystem hs = eig(checked_h.matrix());
  const CMat& h0 = checked_h0.matrix();
  // A battery Hamiltonian diagonal in the working basis needs no change of basis;
  // the derivative then comes from a sparse H psi.
  const bool diagonal_h0 = (h0 - CMat(h0.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  qcore::EigenSystem bs;
  std::vector<Eigen::Index> order(static_cast<size_t>(dim));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (diagonal_h0) {
    const RVec d = h0.diagonal().real();
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return d(x) < d(y); });
    bs.values.resize(dim);
    for (Eigen::Index k = 0; k < dim; ++k) bs.values(k) = d(order[static_cast<size_t>(k)]);
  } else {
    bs = eig(h0);
  }
  auto groups = group_levels(bs.values, 1e-9);
  const double ground = bs.values(0);
  const MaybeReal to_state(hs.vectors);
  const MaybeReal to_battery(diagonal_h0 ? CMat() : CMat(bs.vectors.adjoint() * hs.vectors));
  const Eigen::SparseMatrix<cplx> h_sparse = diagonal_h0 ? checked_h.matrix().sparseView() : Eigen::SparseMatrix<cplx>();
  CVec c = hs.vectors.adjoint() * p.initial;
  c /= c.norm();

  ChargeTrace tr;
  tr.capacity = bs.values(dim - 1) - ground;
  const long steps = std::max(2L, std::lround(p.tau / p.dt));
  auto amplitudes = [&](double t) {
    CVec a(dim);
    for (Eigen::Index k = 0; k < dim; ++k) a(k) = std::exp(-I * hs.values(k) * t) * c(k);
    return a;
  };
  const RVec levels_all = bs.values;
  std::vector<double> levels(groups.size());
  for (size_t g = 0; g < groups.size(); ++g)
    levels[g] = levels_all.segment(groups[g].first, groups[g].second - groups[g].first).mean() - ground;
  const CVec rate = -I * hs.values.cast<cplx>();
  constexpr long kBatch = 128;
  for (long first = 0; first <= steps; first += kBatch) {
    const long count = std::min(kBatch, steps + 1 - first);
    CMat a(dim, count);
    for (long j = 0; j < count; ++j) a.col(j) = amplitudes((first + j) * p.dt);
    CMat phi, dphi, states;
    if (diagonal_h0) {
      states = to_state * a;
      const CMat moved = h_sparse * states;
      phi.resize(dim, count);
      dphi.resize(dim, count);
      for (Eigen::Index k = 0; k < dim; ++k) {
        phi.row(k) = states.row(order[static_cast<size_t>(k)]);
        dphi.row(k) = -I * moved.row(order[static_cast<size_t>(k)]);
      }
    } else {
      phi = to_battery * a;
      dphi = to_battery * (rate.asDiagonal() * a);
      if (p.observe) states = to_state * a;
    }
    for (long j = 0; j < count; ++j) {
      const long k = first + j;
      RVec pops(static_cast<Eigen::Index>(groups.size())), flows(pops.size());
      for (size_t g = 0; g < groups.size(); ++g) {
        auto [s, e] = groups[g];
        const auto gi = static_cast<Eigen::Index>(g);
        pops(gi) = phi.col(j).segment(s, e - s).squaredNorm();
        flows(gi) = 2.0 * phi.col(j).segment(s, e - s).dot(dphi.col(j).segment(s, e - s)).real();
      }
      // Centred sums keep the Cauchy-Schwarz structure of the bound intact in rounding.
      const double mean = pops.dot(Eigen::Map<const RVec>(levels.data(), pops.size()));
      const RVec centred = Eigen::Map<const RVec>(levels.data(), pops.size()).array() - mean;
      const double power = centred.dot(flows);
      const double variance = pops.dot(centred.cwiseAbs2());
      double fisher = 0.0;
      for (Eigen::Index g = 0; g < pops.size(); ++g)
        if (pops(g) >= kExactPopulationFloor) fisher += flows(g) * flows(g) / pops(g);
      tr.times.push_back(k * p.dt);
      tr.energies.push_back(mean);
      tr.powers.push_back(power);
      tr.variances.push_back(variance);
      tr.energy_fisher.push_back(fisher);
      if (p.observe) p.observe(static_cast<size_t>(k), CVec(states.col(j)));
    }
  }
  power_bound_check(tr);

  // First charging peak; the global maximum if the energy never turns over.
  const double rise = 1e-12 * std::max(1.0, tr.capacity);
  const auto& e = tr.energies;
  tr.optimal_index = static_cast<size_t>(std::max_element(e.begin(), e.end()) - e.begin());
  for (size_t k = 1; k + 1 < e.size(); ++k) {
    if (e[k] >= e[k - 1] && e[k] > e[k + 1] && e[k] > e[0] + rise) {
      tr.optimal_index = k;
      break;
    }
  }
  if (e[tr.optimal_index] <= e[0] + rise) tr.optimal_index = 0;

  const double t_opt = tr.optimal_time();
  CVec psi_opt = hs.vectors * amplitudes(t_opt);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (p.reduce) {
    auto [rho, h] = p.reduce(psi_opt);
    try {
      tr.final_fraction = extractable_fraction(rho, h);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::UndefinedFraction) throw;
      tr.final_fraction = nan;
    }
    tr.final_entanglement = entropy_of(sorted_spectrum_desc(rho).cwiseMax(0.0));
  } else {
    // A pure battery state has the ground state as its passive state.
    tr.final_fraction = e[tr.optimal_index] > rise ? 1.0 : nan;
  }

  QSLReport& q = tr.qsl;
  q.actual_tau = t_opt;
  const RVec weights = c.cwiseAbs2();
  const double h_mean = weights.dot(hs.values);
  q.time_averaged_variance = std::sqrt(std::max(0.0, weights.dot(hs.values.cwiseAbs2()) - h_mean * h_mean));
  q.time_averaged_energy = h_mean - hs.values(0);
  q.bures_distance = std::acos(std::clamp(std::abs(p.initial.normalized().dot(psi_opt)), 0.0, 1.0));
  if (q.bures_distance > kAngleResolution) {
    q.tau_mt = q.bures_distance / q.time_averaged_variance;
    q.tau_unified = q.bures_distance / std::min(q.time_averaged_variance, q.time_averaged_energy);
  }
  q.mt_holds = q.actual_tau >= q.tau_mt - 1e-9;
  q.unified_holds = q.actual_tau >= q.tau_unified - 1e-9;
  return tr;
}

namespace {

// Dense spin-chain operators in the computational basis; site 0 is the most
// significant bit and bit value 0 is spin up.
int spin_sign(long idx, int site, int n) { return ((idx >> (n - 1 - site)) & 1) ? -1 : 1; }

void check_chain(int n) {
  require(n >= 2, "spin chain needs at least two sites");
  if (n > 12) throw Error(ErrorKind::TooLarge, "spin chain longer than 12 sites");
}

}  // namespace

CMat xxz_field(int n, double b) {
  check_chain(n);
  const long dim = 1L << n;
  CMat h = CMat::Zero(dim, dim);
  for (long idx = 0; idx < dim; ++idx) {
    int total = 0;
    for (int i = 0; i < n; ++i) total += spin_sign(idx, i, n);
    h(idx, idx) = b * total;
  }
  return h;
}

CMat xxz_drive(int n, double omega) {
  check_chain(n);
  const long dim = 1L << n;
  CMat h = CMat::Zero(dim, dim);
  for (long idx = 0; idx < dim; ++idx)
    for (int i = 0; i < n; ++i) h(idx ^ (1L << (n - 1 - i)), idx) += omega;
  return h;
}

CMat xxz_interaction(const XXZParams& p) {
  check_chain(p.n);
  const int n = p.n;
  const long dim = 1L << n;
  CMat h = CMat::Zero(dim, dim);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double gij = 0.0;
      if (p.range == Range::NearestNeighbor)
        gij = j == i + 1 ? p.g : 0.0;
      else
        gij = p.g * std::pow(static_cast<double>(j - i), -p.nu);
      if (gij == 0.0) continue;
      const long flip = (1L << (n - 1 - i)) | (1L << (n - 1 - j));
      for (long idx = 0; idx < dim; ++idx) {
        const int si = spin_sign(idx, i, n), sj = spin_sign(idx, j, n);
        h(idx, idx) -= gij * si * sj;
        // sx sx + sy sy swaps antiparallel neighbours with amplitude 2.
        if (si != sj) h(idx ^ flip, idx) -= 2.0 * gij * p.alpha;
      }
    }
  return h;
}

ChargeTrace charge_spins_xxz(const XXZParams& p) {
  check_chain(p.n);
  CMat hg = xxz_interaction(p);
  PureCharging pc;
  pc.hamiltonian = hg + xxz_drive(p.n, p.omega);
  pc.battery_hamiltonian = xxz_field(p.n, p.b) + hg;
  pc.initial = CVec::Zero(pc.hamiltonian.rows());
  pc.initial(pc.initial.size() - 1) = 1.0;
  pc.tau = p.tau;
  pc.dt = p.dt;

  BatterySpec cells;
  cells.cell_hamiltonian = p.b * qcore::pauli_z();
  cells.cell_levels = RVec::LinSpaced(2, -p.b, p.b);
  cells.n_cells = p.n;
  std::vector<double> local, shared;
  pc.observe = [&](size_t, const CVec& psi) {
    VarianceParts v = variance_decomposition(psi, cells);
    local.push_back(v.local_sum);
    shared.push_back(v.entanglement_part);
  };
  ChargeTrace tr = charge_pure(pc);
  tr.local_variance = std::move(local);
  tr.entanglement_variance = std::move(shared);
  return tr;
}

ChargeTrace charge_lmg(const LMGParams& p) {
  require(p.n >= 1, "LMG battery needs at least one spin");
  if (p.n > 14) throw Error(ErrorKind::TooLarge, "LMG battery larger than 14 spins");
  const double n = p.n;
  qcore::SpinOps s = qcore::spin_operators(p.n);
  const CMat id = CMat::Identity(p.n + 1, p.n + 1);
  // sum_{i<j} s_a s_a = ((2 J_a)^2 - n) / 2 on the symmetric sector.
  CMat xx = 0.5 * (4.0 * s.jx * s.jx - n * id), yy = 0.5 * (4.0 * s.jy * s.jy - n * id);
  PureCharging pc;
  pc.battery_hamiltonian = 2.0 * p.b * s.jz;
  pc.hamiltonian = pc.battery_hamiltonian + p.lambda / n * (xx + p.gamma * yy);
  pc.hamiltonian = qcore::hermitian_part(pc.hamiltonian);
  pc.initial = CVec::Zero(p.n + 1);
  pc.initial(p.n) = 1.0;
  pc.tau = p.tau;
  pc.dt = p.dt;
  return charge_pure(pc);
}

ChargeTrace charge_dicke(const DickeParams& p) {
  require(p.n >= 1, "Dicke battery needs at least one atom");
  const int photons = p.n_photons < 0 ? p.n : p.n_photons;
  const int ds = p.n + 1;
  const double lam = p.rescale ? p.lambda / std::sqrt(static_cast<double>(p.n)) : p.lambda;
  qcore::SpinOps s = qcore::spin_operators(p.n);

  auto run = [&](int cutoff, double& tail, double dt) {
    const int dc = cutoff + 1;
    if (static_cast<long>(ds) * dc > kMaxDimension) throw Error(ErrorKind::TooLarge, "Dicke space too large");
    CMat a = qcore::annihilation(cutoff), idc = CMat::Identity(dc, dc), ids = CMat::Identity(ds, ds);
    PureCharging pc;
    pc.battery_hamiltonian = qcore::kron(p.omega * s.jz, idc);
    pc.hamiltonian = pc.battery_hamiltonian + qcore::kron(ids, p.omega_c * a.adjoint() * a) +
                     2.0 * p.omega_c * lam * qcore::kron(s.jx, CMat(a + a.adjoint()));
    pc.initial = CVec::Zero(ds * dc);
    pc.initial((ds - 1) * dc + photons) = 1.0;
    pc.tau = p.tau;
    pc.dt = dt;
    tail = 0.0;
    pc.observe = [&](size_t, const CVec& psi) {
      double top = 0.0;
      for (int m = 0; m < ds; ++m) top += std::norm(psi(m * dc + cutoff));
      tail = std::max(tail, top);
    };
    pc.reduce = [&](const CVec& psi) {
      Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> amp(psi.data(), ds, dc);
      CMat rho = amp * amp.adjoint();
      return std::make_pair(rho, CMat(p.omega * s.jz));
    };
    return charge_pure(pc);
  };

  double tail = 0.0;
  if (p.photon_cutoff > 0) {
    require(p.photon_cutoff > photons, "photon cutoff must exceed the initial photon number");
    ChargeTrace tr = run(p.photon_cutoff, tail, p.dt);
    if (tail >= 1e-8) throw Error(ErrorKind::CutoffTooSmall, "photon population reaches the cutoff");
    return tr;
  }
  // Grow the cutoff on a coarse time grid, then confirm on the requested one.
  const double coarse = std::max(p.dt, p.tau / 400.0);
  for (int cutoff = photons + p.n + 16;; cutoff += cutoff / 2) {
    if (coarse > p.dt) {
      run(cutoff, tail, coarse);
      if (tail >= 1e-8) continue;
    }
    ChargeTrace tr = run(cutoff, tail, p.dt);
    if (tail < 1e-8) return tr;
  }
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "slope needs at least two points");
  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t k = 0; k < n; ++k) {
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace qtherm::battery
