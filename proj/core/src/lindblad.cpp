#include "qtherm/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

namespace qtherm::lindblad {

using Eigen::Index;
using qcore::cplx;
using qcore::I;

bool FrequencyWindow::contains(double w) const {
  bool above = lo_inclusive ? w >= lo : w > lo;
  bool below = hi_inclusive ? w <= hi : w < hi;
  return above && below;
}

double SpectralFunction::operator()(double omega) const {
  double w = std::abs(omega);
  switch (family) {
    case SpectralFamily::Flat:
      return base_rate;
    case SpectralFamily::OhmicExpCutoff:
      return base_rate * (w / cutoff) * std::exp(-w / cutoff);
    case SpectralFamily::WindowedFlat:
      if (!window) return base_rate;
      return window->contains(w) ? base_rate : 0.0;
  }
  return 0.0;
}

SpectralFunction SpectralFunction::flat(double rate) {
  if (rate < 0) throw Error(ErrorKind::InvalidParams, "negative base rate");
  return SpectralFunction{SpectralFamily::Flat, rate, 1.0, std::nullopt};
}

SpectralFunction SpectralFunction::ohmic(double rate, double cutoff) {
  if (rate < 0 || cutoff <= 0) throw Error(ErrorKind::InvalidParams, "ohmic spectrum needs rate >= 0, cutoff > 0");
  return SpectralFunction{SpectralFamily::OhmicExpCutoff, rate, cutoff, std::nullopt};
}

SpectralFunction SpectralFunction::windowed(double rate, FrequencyWindow window) {
  if (rate < 0) throw Error(ErrorKind::InvalidParams, "negative base rate");
  return SpectralFunction{SpectralFamily::WindowedFlat, rate, 1.0, window};
}

double BathSpec::rate(double omega) const {
  if (!(temperature > 0)) throw Error(ErrorKind::InvalidParams, "bath temperature must be positive");
  if (omega >= 0) return spectral(omega);
  return std::exp(omega / temperature) * spectral(-omega);
}

double default_degeneracy_tol(const HermitianOperator& h) {
  qcore::EigenSystem es = qcore::hermitian_eig(h);
  double radius = es.values.cwiseAbs().maxCoeff();
  return 1e-9 * std::max(radius, 1.0);
}

namespace {

struct Levels {
  std::vector<double> energy;              // mean energy per cluster
  std::vector<std::vector<Index>> members;  // eigenvector indices
};

Levels cluster_levels(const RVec& values, double tol) {
  Levels lv;
  for (Index k = 0; k < values.size(); ++k) {
    if (!lv.energy.empty() && values(k) - values(lv.members.back().front()) <= tol) {
      lv.members.back().push_back(k);
      double n = static_cast<double>(lv.members.back().size());
      lv.energy.back() += (values(k) - lv.energy.back()) / n;
    } else {
      lv.energy.push_back(values(k));
      lv.members.push_back({k});
    }
  }
  return lv;
}

}  // namespace

std::vector<JumpTerm> decompose_coupling(const HermitianOperator& s, const HermitianOperator& h,
                                         double degeneracy_tol) {
  if (s.dim() != h.dim()) throw Error(ErrorKind::DimMismatch, "coupling and Hamiltonian dimensions differ");
  if (degeneracy_tol < 0) degeneracy_tol = default_degeneracy_tol(h);
  qcore::EigenSystem es = qcore::hermitian_eig(h);
  Levels lv = cluster_levels(es.values, degeneracy_tol);
  const Index nl = static_cast<Index>(lv.energy.size());
  const CMat s_eig = es.vectors.adjoint() * s.matrix() * es.vectors;

  // Every ordered level pair (a <- b) carries gap e_b - e_a; cluster those gaps.
  struct Pair {
    double gap;
    Index a, b;
  };
  std::vector<Pair> pairs;
  for (Index a = 0; a < nl; ++a)
    for (Index b = 0; b < nl; ++b) pairs.push_back({lv.energy[b] - lv.energy[a], a, b});
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.gap < y.gap; });

  // Each cluster is assembled in the eigenbasis, where the projections are
  // index masks, and only rotated back when its weight survives the cut.
  const double s_norm = s.matrix().norm();
  std::vector<JumpTerm> out;
  size_t k = 0;
  while (k < pairs.size()) {
    size_t start = k;
    double first = pairs[k].gap;
    std::vector<std::pair<Index, Index>> entries;
    double gap_sum = 0.0, weight = 0.0;
    while (k < pairs.size() && pairs[k].gap - first <= degeneracy_tol) {
      for (Index i : lv.members[pairs[k].a])
        for (Index j : lv.members[pairs[k].b]) {
          entries.emplace_back(i, j);
          weight += std::norm(s_eig(i, j));
        }
      gap_sum += pairs[k].gap;
      ++k;
    }
    double omega = gap_sum / static_cast<double>(k - start);
    if (std::abs(omega) <= degeneracy_tol) omega = 0.0;
    if (std::sqrt(weight) <= 1e-14 * std::max(s_norm, 1e-300)) continue;
    CMat masked = CMat::Zero(h.dim(), h.dim());
    for (auto [i, j] : entries) masked(i, j) = s_eig(i, j);
    out.push_back({omega, CMat(es.vectors * masked * es.vectors.adjoint()), 0.0});
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  Index find(Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct SparseCols {
  // For each column i, the rows k with m(k, i) != 0 and the values.
  std::vector<std::vector<std::pair<Index, cplx>>> cols;
};

SparseCols sparsify(const CMat& m, double thresh) {
  SparseCols sc;
  sc.cols.resize(m.cols());
  for (Index i = 0; i < m.cols(); ++i)
    for (Index k = 0; k < m.rows(); ++k)
      if (std::abs(m(k, i)) > thresh) sc.cols[i].push_back({k, m(k, i)});
  return sc;
}

std::shared_ptr<const LindbladGenerator::Structure> build_structure(const HermitianOperator& h,
                                                                    const std::vector<Channel>& channels) {
  auto st = std::make_shared<LindbladGenerator::Structure>();
  qcore::EigenSystem es = qcore::hermitian_eig(h);
  st->basis = es.vectors;
  st->energies = es.values;
  const Index d = h.dim();
  const Index n = d * d;

  std::vector<std::pair<double, SparseCols>> jumps;
  CMat anti = CMat::Zero(d, d);
  double max_entry = 0.0;
  std::vector<std::pair<double, CMat>> rotated;
  for (const auto& ch : channels)
    for (const auto& j : ch.jumps) {
      if (j.rate == 0.0) continue;
      CMat sr = es.vectors.adjoint() * j.op * es.vectors;
      max_entry = std::max(max_entry, sr.cwiseAbs().maxCoeff());
      rotated.push_back({j.rate, sr});
      anti += j.rate * sr.adjoint() * sr;
    }
  const double thresh = 1e-14 * std::max(max_entry, 1e-300);
  for (auto& [rate, sr] : rotated) jumps.push_back({rate, sparsify(sr, thresh)});
  const double anti_thresh = 1e-14 * std::max(anti.cwiseAbs().maxCoeff(), 1e-300);

  UnionFind uf(n);
  for (const auto& [rate, sc] : jumps)
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j)
        for (const auto& [k, ski] : sc.cols[i])
          for (const auto& [l, slj] : sc.cols[j]) uf.unite(i + d * j, k + d * l);
  for (Index k = 0; k < d; ++k)
    for (Index i = 0; i < d; ++i) {
      if (k == i || std::abs(anti(k, i)) <= anti_thresh) continue;
      for (Index j = 0; j < d; ++j) {
        uf.unite(i + d * j, k + d * j);
        uf.unite(j + d * i, j + d * k);
      }
    }

  std::map<Index, Index> root_to_block;
  std::vector<Index> block_of(n), pos_in_block(n);
  for (Index p = 0; p < n; ++p) {
    Index r = uf.find(p);
    auto it = root_to_block.find(r);
    if (it == root_to_block.end()) {
      it = root_to_block.emplace(r, static_cast<Index>(st->blocks.size())).first;
      st->blocks.emplace_back();
    }
    auto& blk = st->blocks[it->second];
    block_of[p] = it->second;
    pos_in_block[p] = static_cast<Index>(blk.pairs.size());
    blk.pairs.push_back(p);
  }
  for (auto& blk : st->blocks) {
    const Index m = static_cast<Index>(blk.pairs.size());
    blk.matrix = CMat::Zero(m, m);
    for (Index c = 0; c < m; ++c) {
      Index p = blk.pairs[c];
      Index i = p % d, j = p / d;
      blk.matrix(c, c) += -I * (es.values(i) - es.values(j));
      for (const auto& [rate, sc] : jumps)
        for (const auto& [k, ski] : sc.cols[i])
          for (const auto& [l, slj] : sc.cols[j])
            blk.matrix(pos_in_block[k + d * l], c) += rate * ski * std::conj(slj);
      // -1/2 K |i><j| - 1/2 |i><j| K
      for (Index k = 0; k < d; ++k) {
        if (std::abs(anti(k, i)) > anti_thresh) blk.matrix(pos_in_block[k + d * j], c) -= 0.5 * anti(k, i);
        if (std::abs(anti(j, k)) > anti_thresh) blk.matrix(pos_in_block[i + d * k], c) -= 0.5 * anti(j, k);
      }
    }
  }
  return st;
}

}  // namespace

LindbladGenerator::LindbladGenerator(HermitianOperator h, std::vector<Channel> channels)
    : h_(std::move(h)), channels_(std::move(channels)) {
  for (const auto& ch : channels_) {
    CMat k = CMat::Zero(h_.dim(), h_.dim());
    for (const auto& j : ch.jumps) {
      if (j.op.rows() != h_.dim() || j.op.cols() != h_.dim())
        throw Error(ErrorKind::DimMismatch, "jump operator dimension differs from Hamiltonian");
      if (j.rate < 0) throw Error(ErrorKind::InvalidParams, "negative jump rate");
      k += j.rate * j.op.adjoint() * j.op;
    }
    anti_.push_back(k);
  }
  structure_ = build_structure(h_, channels_);
}

std::vector<std::string> LindbladGenerator::labels() const {
  std::vector<std::string> out;
  for (const auto& c : channels_) out.push_back(c.label);
  return out;
}

const Channel& LindbladGenerator::channel(const std::string& label) const {
  for (const auto& c : channels_)
    if (c.label == label) return c;
  throw Error(ErrorKind::InvalidParams, "no bath labelled '" + label + "'");
}

CMat superop_hamiltonian(const CMat& h) {
  const Index d = h.rows();
  CMat id = CMat::Identity(d, d);
  return -I * (qcore::kron(id, h) - qcore::kron(h.transpose(), id));
}

CMat superop_dissipator(const CMat& s, double rate) {
  const Index d = s.rows();
  CMat id = CMat::Identity(d, d);
  CMat k = s.adjoint() * s;
  return rate * (qcore::kron(s.conjugate(), s) - 0.5 * qcore::kron(id, k) - 0.5 * qcore::kron(k.transpose(), id));
}

CMat LindbladGenerator::hamiltonian_part() const { return superop_hamiltonian(h_.matrix()); }

CMat LindbladGenerator::dissipator_part(const std::string& label) const {
  const Index d = dim();
  CMat out = CMat::Zero(d * d, d * d);
  for (const auto& j : channel(label).jumps)
    if (j.rate != 0.0) out += superop_dissipator(j.op, j.rate);
  return out;
}

CMat LindbladGenerator::total() const {
  CMat out = hamiltonian_part();
  for (const auto& c : channels_) out += dissipator_part(c.label);
  return out;
}

CMat LindbladGenerator::apply_hamiltonian(const CMat& rho) const {
  return -I * (h_.matrix() * rho - rho * h_.matrix());
}

CMat LindbladGenerator::apply_dissipator(const std::string& label, const CMat& rho) const {
  for (size_t c = 0; c < channels_.size(); ++c) {
    if (channels_[c].label != label) continue;
    CMat out = -0.5 * (anti_[c] * rho + rho * anti_[c]);
    for (const auto& j : channels_[c].jumps)
      if (j.rate != 0.0) out += j.rate * j.op * rho * j.op.adjoint();
    return out;
  }
  throw Error(ErrorKind::InvalidParams, "no bath labelled '" + label + "'");
}

CMat LindbladGenerator::apply(const CMat& rho) const {
  CMat out = apply_hamiltonian(rho);
  for (const auto& c : channels_) out += apply_dissipator(c.label, rho);
  return out;
}

LindbladGenerator build_generator(const HermitianOperator& h, const std::vector<BathSpec>& baths,
                                  double degeneracy_tol) {
  std::vector<Channel> channels;
  for (const auto& b : baths) {
    if (b.coupling.dim() != h.dim())
      throw Error(ErrorKind::DimMismatch, "bath '" + b.label + "' coupling has wrong dimension");
    if (!(b.temperature > 0)) throw Error(ErrorKind::InvalidParams, "bath '" + b.label + "' temperature <= 0");
    Channel ch{b.label, decompose_coupling(b.coupling, h, degeneracy_tol)};
    for (auto& j : ch.jumps) j.rate = b.rate(j.omega);
    channels.push_back(std::move(ch));
  }
  return LindbladGenerator(h, std::move(channels));
}

// ---------------------------------------------------------------------------

Propagator::Propagator(const LindbladGenerator& gen, double t) : s_(&gen.structure()), d_(gen.dim()) {
  if (t < 0) throw Error(ErrorKind::InvalidParams, "negative evolution time");
  exps_.reserve(s_->blocks.size());
  for (const auto& blk : s_->blocks) {
    if (blk.matrix.rows() == 1)
      exps_.push_back(CMat::Constant(1, 1, std::exp(blk.matrix(0, 0) * t)));
    else
      exps_.push_back(qcore::matrix_exp(blk.matrix, t));
  }
}

CMat Propagator::apply(const CMat& rho) const {
  if (rho.rows() != d_) throw Error(ErrorKind::DimMismatch, "state dimension differs from generator");
  CMat r = s_->basis.adjoint() * rho * s_->basis;
  CMat out = CMat::Zero(d_, d_);
  for (size_t b = 0; b < s_->blocks.size(); ++b) {
    const auto& pairs = s_->blocks[b].pairs;
    CVec x(pairs.size());
    for (size_t c = 0; c < pairs.size(); ++c) x(c) = r(pairs[c] % d_, pairs[c] / d_);
    CVec y = exps_[b] * x;
    for (size_t c = 0; c < pairs.size(); ++c) out(pairs[c] % d_, pairs[c] / d_) = y(c);
  }
  return s_->basis * out * s_->basis.adjoint();
}

CMat evolve_matrix(const LindbladGenerator& gen, const CMat& rho0, double t) {
  if (t == 0.0) return rho0;
  return Propagator(gen, t).apply(rho0);
}

namespace {

DensityMatrix checked_state(const CMat& m, double tol) {
  CMat herm = qcore::hermitian_part(m);
  double tr = herm.trace().real();
  if (std::abs(tr - 1.0) > tol)
    throw Error(ErrorKind::NumericalInstability, "evolved trace drifted to " + std::to_string(tr));
  try {
    return DensityMatrix(herm, tol);
  } catch (const Error& e) {
    throw Error(ErrorKind::NumericalInstability, std::string("evolved state left the state space: ") + e.what());
  }
}

}  // namespace

DensityMatrix evolve(const LindbladGenerator& gen, const DensityMatrix& rho0, double t) {
  if (t == 0.0) return rho0;
  return checked_state(evolve_matrix(gen, rho0.matrix(), t), std::max(rho0.tolerance(), 1e-9));
}

DensityMatrix steady_state(const LindbladGenerator& gen) {
  const auto& st = gen.structure();
  const Index d = gen.dim();
  std::vector<CMat> kernel;
  double scale = 0.0;
  for (const auto& blk : st.blocks) scale = std::max(scale, blk.matrix.cwiseAbs().maxCoeff());
  scale = std::max(scale, 1e-300);

  for (const auto& blk : st.blocks) {
    const Index m = blk.matrix.rows();
    std::vector<CVec> null_vecs;
    if (m <= 256) {
      Eigen::BDCSVD<CMat> svd(blk.matrix, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      for (Index k = 0; k < m; ++k)
        if (sv(k) <= 1e-11 * scale) null_vecs.push_back(svd.matrixV().col(k));
    } else {
      // Kernel of B is the orthogonal complement of range(B^dagger).
      Eigen::ColPivHouseholderQR<CMat> qr(blk.matrix.adjoint());
      qr.setThreshold(1e-11);
      Index rank = qr.rank();
      CMat q = qr.householderQ();
      for (Index k = rank; k < m; ++k) null_vecs.push_back(q.col(k));
    }
    for (const auto& v : null_vecs) {
      CMat km = CMat::Zero(d, d);
      for (size_t c = 0; c < blk.pairs.size(); ++c) km(blk.pairs[c] % d, blk.pairs[c] / d) = v(c);
      kernel.push_back(st.basis * km * st.basis.adjoint());
    }
  }
  if (kernel.size() != 1) throw DegenerateSteadyStateError(std::move(kernel));

  CMat rho = kernel.front();
  cplx tr = rho.trace();
  if (std::abs(tr) < 1e-12) throw DegenerateSteadyStateError(std::move(kernel));
  rho /= tr;
  rho = qcore::hermitian_part(rho);
  double residual = gen.apply(rho).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * std::max(1.0, scale))
    throw Error(ErrorKind::NumericalInstability, "steady-state residual " + std::to_string(residual));
  return DensityMatrix(rho, 1e-9);
}

double heat_current(const CMat& gen_part, const DensityMatrix& rho, const HermitianOperator& h) {
  const Index d = rho.dim();
  if (gen_part.rows() != d * d || h.dim() != d) throw Error(ErrorKind::DimMismatch, "heat_current dimensions");
  CMat drho = qcore::devectorize(gen_part * qcore::vectorize(rho.matrix()), d);
  return (drho * h.matrix()).trace().real();
}

double heat_current(const LindbladGenerator& gen, const std::string& label, const DensityMatrix& rho,
                    const HermitianOperator& h) {
  if (h.dim() != rho.dim() || gen.dim() != rho.dim()) throw Error(ErrorKind::DimMismatch, "heat_current dimensions");
  return (gen.apply_dissipator(label, rho.matrix()) * h.matrix()).trace().real();
}

double entropy_production(const LindbladGenerator& gen, const DensityMatrix& rho,
                          const std::vector<BathSpec>& baths) {
  // ln of eigenvalues below 1e-16 is evaluated at 1e-16.
  CMat log_rho = qcore::hermitian_function(rho.matrix(), [](double x) { return std::log(std::max(x, 1e-16)); });
  double ds_dt = -(gen.apply(rho.matrix()) * log_rho).trace().real();
  double flux = 0.0;
  for (const auto& b : baths) flux += heat_current(gen, b.label, rho, gen.hamiltonian()) / b.temperature;
  return ds_dt - flux;
}

double bath_action(const std::function<CMat(double)>& dissipator_of_t, double tau_cyc,
                   std::vector<double> breakpoints) {
  if (tau_cyc < 0) throw Error(ErrorKind::InvalidParams, "negative cycle time");
  auto norm_at = [&](double t) {
    CMat dm = dissipator_of_t(t);
    if (dm.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMat> svd(dm);
    return svd.singularValues()(0);
  };
  breakpoints.push_back(0.0);
  breakpoints.push_back(tau_cyc);
  std::sort(breakpoints.begin(), breakpoints.end());
  double total = 0.0;
  for (size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    double a = std::clamp(breakpoints[k], 0.0, tau_cyc), b = std::clamp(breakpoints[k + 1], 0.0, tau_cyc);
    if (b - a <= 0) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(norm_at, a, b, 10, 1e-12);
  }
  return total;
}

// ---------------------------------------------------------------------------

CMat integrate_master_equation(const std::function<CMat(double, const CMat&)>& rhs, const CMat& rho0, double t0,
                               double t1, double tol) {
  namespace ode = boost::numeric::odeint;
  using State = std::vector<cplx>;
  const Index d = rho0.rows();
  State x(rho0.data(), rho0.data() + rho0.size());
  auto system = [&](const State& in, State& out, double t) {
    Eigen::Map<const CMat> r(in.data(), d, d);
    CMat dr = rhs(t, CMat(r));
    out.assign(dr.data(), dr.data() + dr.size());
  };
  if (t1 > t0) {
    auto stepper = ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<State>());
    ode::integrate_adaptive(stepper, system, x, t0, t1, (t1 - t0) / 100.0);
  }
  return Eigen::Map<const CMat>(x.data(), d, d);
}

DensityMatrix evolve_time_dependent(const std::function<LindbladGenerator(double)>& gen_of_t,
                                    const DensityMatrix& rho0, double t0, double t1, double tol) {
  auto rhs = [&](double t, const CMat& r) { return gen_of_t(t).apply(r); };
  return checked_state(integrate_master_equation(rhs, rho0.matrix(), t0, t1, tol), std::max(rho0.tolerance(), 1e-9));
}

DensityMatrix evolve_quasistatic(const std::function<LindbladGenerator(double)>& gen_of_t,
                                 const DensityMatrix& rho0, double t0, double t1, int slices) {
  if (slices < 1) throw Error(ErrorKind::InvalidParams, "need at least one slice");
  CMat r = rho0.matrix();
  double dt = (t1 - t0) / slices;
  for (int k = 0; k < slices; ++k) r = evolve_matrix(gen_of_t(t0 + (k + 0.5) * dt), r, dt);
  return checked_state(r, std::max(rho0.tolerance(), 1e-9));
}

}  // namespace qtherm::lindblad
