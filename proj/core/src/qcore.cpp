#include "qtherm/qcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/MatrixFunctions>

namespace qtherm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::InvalidState: return "InvalidState";
    case ErrorKind::InvalidSubsystem: return "InvalidSubsystem";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::NumericalInstability: return "NumericalInstability";
    case ErrorKind::DegenerateSteadyState: return "DegenerateSteadyState";
    case ErrorKind::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorKind::NoCoupling: return "NoCoupling";
    case ErrorKind::UnclassifiableState: return "UnclassifiableState";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::CutoffTooSmall: return "CutoffTooSmall";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::SingularState: return "SingularState";
    case ErrorKind::InvalidPOVM: return "InvalidPOVM";
    case ErrorKind::NullNotBracketed: return "NullNotBracketed";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::TargetUnreached: return "TargetUnreached";
    case ErrorKind::UndefinedFraction: return "UndefinedFraction";
    case ErrorKind::InconsistentTrajectory: return "InconsistentTrajectory";
    case ErrorKind::InvariantBreach: return "InvariantBreach";
  }
  return "Unknown";
}

}  // namespace qtherm

namespace qtherm::qcore {

namespace {

double max_abs(const CMat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

bool is_hermitian(const CMat& m) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + max_abs(m));
}

// Eigenvalues below this fraction of the largest one are treated as exact
// zeros inside matrix square roots; they are dominated by rounding noise and
// their square roots would otherwise leak O(1e-8) weight into fidelities.
constexpr double kSqrtFloor = 1e-14;

CMat psd_sqrt(const CMat& rho) {
  EigenSystem es = hermitian_eig(rho);
  const double top = std::max(es.values.maxCoeff(), 0.0);
  RVec s = es.values.unaryExpr([top](double x) { return x > kSqrtFloor * top ? std::sqrt(x) : 0.0; });
  return es.vectors * s.asDiagonal() * es.vectors.adjoint();
}

}  // namespace

HermitianOperator::HermitianOperator(CMat m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw Error(ErrorKind::NotHermitian, "matrix is not square");
  if (!is_hermitian(m_)) throw Error(ErrorKind::NotHermitian, "A differs from its adjoint");
}

DensityMatrix::DensityMatrix(CMat m, double tol) : m_(std::move(m)), tol_(tol) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) throw Error(ErrorKind::InvalidState, "density matrix must be square");
  if (!is_hermitian(m_)) throw Error(ErrorKind::InvalidState, "density matrix is not Hermitian");
  const double tr = m_.trace().real();
  if (std::abs(tr - 1.0) > 1e-10) throw Error(ErrorKind::InvalidState, "trace deviates from 1 by " + std::to_string(tr - 1.0));
  Eigen::SelfAdjointEigenSolver<CMat> es(m_, Eigen::EigenvaluesOnly);
  min_eig_ = es.eigenvalues()(0);
  if (min_eig_ < -tol_) throw Error(ErrorKind::InvalidState, "negative eigenvalue " + std::to_string(min_eig_));
}

DensityMatrix DensityMatrix::pure(const CVec& psi) {
  CVec v = psi / psi.norm();
  return DensityMatrix(v * v.adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed(Eigen::Index d) {
  return DensityMatrix(CMat::Identity(d, d) / static_cast<double>(d));
}

Eigen::Index CompositeSpace::total_dim() const {
  Eigen::Index t = 1;
  for (int d : factor_dims) t *= d;
  return t;
}

CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CMat kron_all(const std::vector<CMat>& factors) {
  CMat out = CMat::Identity(1, 1);
  for (const auto& f : factors) out = kron(out, f);
  return out;
}

CMat partial_trace_matrix(const CMat& m, const CompositeSpace& space, const std::vector<int>& keep) {
  const int n = static_cast<int>(space.factor_dims.size());
  if (m.rows() != space.total_dim() || m.cols() != m.rows())
    throw Error(ErrorKind::DimMismatch, "state dimension differs from the composite space");
  std::vector<char> kept(n, 0);
  for (int k : keep) {
    if (k < 0 || k >= n) throw Error(ErrorKind::InvalidSubsystem, "keep index " + std::to_string(k) + " out of range");
    kept[k] = 1;
  }
  // Strides of the row-major multi-index (first factor is most significant).
  std::vector<Eigen::Index> stride(n, 1);
  for (int i = n - 2; i >= 0; --i) stride[i] = stride[i + 1] * space.factor_dims[i + 1];

  std::vector<int> kdims, tdims;
  std::vector<Eigen::Index> kstride, tstride;
  for (int i = 0; i < n; ++i) {
    if (kept[i]) { kdims.push_back(space.factor_dims[i]); kstride.push_back(stride[i]); }
    else { tdims.push_back(space.factor_dims[i]); tstride.push_back(stride[i]); }
  }
  auto offsets = [](const std::vector<int>& dims, const std::vector<Eigen::Index>& strides) {
    std::vector<Eigen::Index> off{0};
    for (size_t f = 0; f < dims.size(); ++f) {
      std::vector<Eigen::Index> next;
      next.reserve(off.size() * dims[f]);
      for (Eigen::Index o : off)
        for (int x = 0; x < dims[f]; ++x) next.push_back(o + x * strides[f]);
      off.swap(next);
    }
    return off;
  };
  const auto koff = offsets(kdims, kstride);
  const auto toff = offsets(tdims, tstride);
  const Eigen::Index dk = static_cast<Eigen::Index>(koff.size());
  CMat out = CMat::Zero(dk, dk);
  for (Eigen::Index r = 0; r < dk; ++r)
    for (Eigen::Index c = 0; c < dk; ++c) {
      cplx s = 0.0;
      for (Eigen::Index t : toff) s += m(koff[r] + t, koff[c] + t);
      out(r, c) = s;
    }
  return out;
}

DensityMatrix partial_trace(const DensityMatrix& rho, const CompositeSpace& space, const std::vector<int>& keep) {
  CMat out = partial_trace_matrix(rho.matrix(), space, keep);
  return DensityMatrix(hermitian_part(out), rho.tolerance());
}

EigenSystem hermitian_eig(const HermitianOperator& h) { return hermitian_eig(h.matrix()); }

EigenSystem hermitian_eig(const CMat& h) {
  if (h.rows() != h.cols()) throw Error(ErrorKind::NotHermitian, "matrix is not square");
  if (!is_hermitian(h)) throw Error(ErrorKind::NotHermitian, "eigendecomposition requires a Hermitian matrix");
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::NumericalInstability, "eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

CMat matrix_exp(const CMat& a, cplx scale) {
  CMat s = scale * a;
  return s.exp();
}

double fidelity(const DensityMatrix& rho1, const DensityMatrix& rho2) {
  if (rho1.dim() != rho2.dim()) throw Error(ErrorKind::DimMismatch, "fidelity of states with different dimensions");
  // Nuclear norm of sqrt(rho1) sqrt(rho2) equals Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))
  // and is symmetric in its arguments by construction.
  CMat prod = psd_sqrt(rho1.matrix()) * psd_sqrt(rho2.matrix());
  Eigen::JacobiSVD<CMat> svd(prod);
  return std::clamp(svd.singularValues().sum(), 0.0, 1.0);
}

double bures_angle(const DensityMatrix& rho1, const DensityMatrix& rho2) {
  return std::acos(std::clamp(fidelity(rho1, rho2), 0.0, 1.0));
}

double von_neumann_entropy(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<CMat> es(rho.matrix(), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double p = es.eigenvalues()(i);
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

double trace_distance(const CMat& a, const CMat& b) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(a - b), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

CVec vectorize(const CMat& m) {
  return Eigen::Map<const CVec>(m.data(), m.size());
}

CMat devectorize(const CVec& v, Eigen::Index d) {
  return Eigen::Map<const CMat>(v.data(), d, d);
}

CMat commutator(const CMat& a, const CMat& b) { return a * b - b * a; }

CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

double expectation(const CMat& rho, const CMat& op) { return (rho * op).trace().real(); }

CMat pauli_x() {
  CMat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

CMat pauli_y() {
  CMat m(2, 2);
  m << 0, -I, I, 0;
  return m;
}

CMat pauli_z() {
  CMat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

CMat sigma_minus() {
  CMat m = CMat::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

CMat sigma_plus() { return sigma_minus().adjoint(); }

CMat annihilation(int n_max) {
  CMat a = CMat::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

CMat number_operator(int n_max) {
  CMat m = CMat::Zero(n_max + 1, n_max + 1);
  for (int n = 0; n <= n_max; ++n) m(n, n) = n;
  return m;
}

SpinOps spin_operators(int two_j) {
  const int d = two_j + 1;
  const double j = 0.5 * two_j;
  CMat jz = CMat::Zero(d, d), jp = CMat::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    const double m = j - k;
    jz(k, k) = m;
    if (k > 0) jp(k - 1, k) = std::sqrt(j * (j + 1) - m * (m + 1));
  }
  CMat jm = jp.adjoint();
  return {0.5 * (jp + jm), -0.5 * I * (jp - jm), jz};
}

CMat embed(const CMat& op, int site, int n, int d) {
  std::vector<CMat> f(n, CMat::Identity(d, d));
  f[site] = op;
  return kron_all(f);
}

CMat gibbs_matrix(const CMat& h, double temperature) {
  EigenSystem es = hermitian_eig(h);
  const double e0 = es.values(0);
  RVec w = es.values.unaryExpr([&](double e) { return std::exp(-(e - e0) / temperature); });
  w /= w.sum();
  return es.vectors * w.asDiagonal() * es.vectors.adjoint();
}

CMat random_hermitian(Eigen::Index d, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMat g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = cplx(n(rng), n(rng));
  return scale * 0.5 * (g + g.adjoint());
}

CMat random_unitary(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMat g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = cplx(n(rng), n(rng));
  Eigen::HouseholderQR<CMat> qr(g);
  CMat q = qr.householderQ();
  CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < d; ++i) {
    const cplx ph = r(i, i) / std::abs(r(i, i));
    q.col(i) *= ph;
  }
  return q;
}

CVec random_pure(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CVec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = cplx(n(rng), n(rng));
  return v / v.norm();
}

DensityMatrix random_density(Eigen::Index d, std::mt19937_64& rng, Eigen::Index rank) {
  if (rank <= 0) rank = d;
  std::normal_distribution<double> n(0.0, 1.0);
  CMat g(d, rank);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < rank; ++j) g(i, j) = cplx(n(rng), n(rng));
  CMat rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(hermitian_part(rho));
}

CMat unitary_step(const CMat& k, double dt) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(k));
  CVec phases = (-I * dt * es.eigenvalues().cast<cplx>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

CMat magnus4_propagator(const std::function<CMat(double)>& h_of_t, double t0, double t1, int steps) {
  if (steps < 1) throw Error(ErrorKind::InvalidParams, "propagator needs at least one step");
  static const double c1 = 0.5 - std::sqrt(3.0) / 6.0, c2 = 0.5 + std::sqrt(3.0) / 6.0;
  static const double a1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0, a2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
  const double h = (t1 - t0) / steps;
  CMat u;
  for (int n = 0; n < steps; ++n) {
    const double t = t0 + n * h;
    CMat h1 = h_of_t(t + c1 * h), h2 = h_of_t(t + c2 * h);
    CMat step = unitary_step(a1 * h1 + a2 * h2, h) * unitary_step(a2 * h1 + a1 * h2, h);
    u = (n == 0) ? step : CMat(step * u);
  }
  return u;
}

CMat time_ordered_propagator(const std::function<CMat(double)>& h_of_t, double t0, double t1,
                             std::vector<double> breakpoints, double tol, int min_steps) {
  breakpoints.push_back(t0);
  breakpoints.push_back(t1);
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
  CMat u;
  for (size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    double a = breakpoints[k], b = breakpoints[k + 1];
    if (a < t0 || b > t1 || b <= a) continue;
    int n = std::max(1, min_steps);
    CMat coarse = magnus4_propagator(h_of_t, a, b, n);
    CMat fine;
    double previous = std::numeric_limits<double>::infinity();
    for (;;) {
      fine = magnus4_propagator(h_of_t, a, b, 2 * n);
      double diff = (fine - coarse).cwiseAbs().maxCoeff();
      if (diff < tol) break;
      // A fourth-order scheme shrinks the difference 16-fold per doubling; once
      // it stops shrinking near machine precision the rounding floor is reached.
      if (diff < 1e-10 && diff > 0.25 * previous) break;
      previous = diff;
      n *= 2;
      if (n > (1 << 18)) throw Error(ErrorKind::NumericalInstability, "propagator did not converge");
      coarse = fine;
    }
    u = (u.size() == 0) ? fine : CMat(fine * u);
  }
  if (u.size() == 0) u = CMat::Identity(h_of_t(t0).rows(), h_of_t(t0).rows());
  return u;
}

}  // namespace qtherm::qcore
