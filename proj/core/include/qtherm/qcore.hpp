#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qtherm/errors.hpp"

namespace qtherm::qcore {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr cplx I{0.0, 1.0};

class HermitianOperator {
 public:
  HermitianOperator() = default;
  // Throws NotHermitian unless max|A - A^dagger| <= 1e-12 (1 + max|A|).
  explicit HermitianOperator(CMat m);

  const CMat& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  CMat m_;
};

class DensityMatrix {
 public:
  DensityMatrix() = default;
  // Validates Hermiticity, unit trace and positivity (smallest eigenvalue >= -tol).
  explicit DensityMatrix(CMat m, double tol = 1e-10);

  static DensityMatrix pure(const CVec& psi);
  static DensityMatrix maximally_mixed(Eigen::Index d);

  const CMat& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  double tolerance() const { return tol_; }
  // Smallest eigenvalue found during validation; slightly negative values are
  // accepted but reported.
  double min_eigenvalue() const { return min_eig_; }

 private:
  CMat m_;
  double tol_ = 1e-10;
  double min_eig_ = 0.0;
};

struct CompositeSpace {
  std::vector<int> factor_dims;

  Eigen::Index total_dim() const;
};

struct EigenSystem {
  RVec values;   // ascending
  CMat vectors;  // columns
};

CMat kron(const CMat& a, const CMat& b);
CMat kron_all(const std::vector<CMat>& factors);

DensityMatrix partial_trace(const DensityMatrix& rho, const CompositeSpace& space,
                            const std::vector<int>& keep);
// Unvalidated variant for intermediate matrices that need not be states.
CMat partial_trace_matrix(const CMat& m, const CompositeSpace& space, const std::vector<int>& keep);

EigenSystem hermitian_eig(const HermitianOperator& h);
EigenSystem hermitian_eig(const CMat& h);

CMat matrix_exp(const CMat& a, cplx scale = 1.0);

double fidelity(const DensityMatrix& rho1, const DensityMatrix& rho2);
double bures_angle(const DensityMatrix& rho1, const DensityMatrix& rho2);
double von_neumann_entropy(const DensityMatrix& rho);
double trace_distance(const CMat& a, const CMat& b);

// f applied to the spectrum of a Hermitian matrix.
template <class F>
CMat hermitian_function(const CMat& h, F&& f) {
  EigenSystem es = hermitian_eig(h);
  RVec fv = es.values.unaryExpr(f);
  return es.vectors * fv.asDiagonal() * es.vectors.adjoint();
}

// Column-stacking vectorization used by every superoperator in the project:
// vec(A X B) = (B^T kron A) vec(X).
CVec vectorize(const CMat& m);
CMat devectorize(const CVec& v, Eigen::Index d);

CMat commutator(const CMat& a, const CMat& b);
CMat hermitian_part(const CMat& a);
double expectation(const CMat& rho, const CMat& op);

// Two-level and spin algebra. Basis order is (|0>, |1>) with sigma_z = diag(1, -1).
CMat pauli_x();
CMat pauli_y();
CMat pauli_z();
CMat sigma_minus();  // |1><0|
CMat sigma_plus();   // |0><1|

// Truncated bosonic ladder (dimension n_max + 1).
CMat annihilation(int n_max);
CMat number_operator(int n_max);

// Collective spin-j operators in the |j, m> basis ordered m = j, j-1, ..., -j.
struct SpinOps {
  CMat jx, jy, jz;
};
SpinOps spin_operators(int two_j);

// Operator acting as `op` on factor `site` of a register of n factors of dimension d.
CMat embed(const CMat& op, int site, int n, int d);

CMat gibbs_matrix(const CMat& h, double temperature);

// exp(-i k dt) for Hermitian k through its eigendecomposition.
CMat unitary_step(const CMat& k, double dt);

// Time-ordered propagator U(t1, t0) of i dU/dt = H(t) U built from fixed-step
// fourth-order commutator-free Magnus steps.
CMat magnus4_propagator(const std::function<CMat(double)>& h_of_t, double t0, double t1, int steps);

// Same scheme with step doubling on each smooth piece until successive
// propagators agree to `tol` (max-entry). Breakpoints mark discontinuities.
CMat time_ordered_propagator(const std::function<CMat(double)>& h_of_t, double t0, double t1,
                             std::vector<double> breakpoints = {}, double tol = 1e-11, int min_steps = 8);

// Random instances for tests, sweeps and benchmarks.
CMat random_hermitian(Eigen::Index d, std::mt19937_64& rng, double scale = 1.0);
CMat random_unitary(Eigen::Index d, std::mt19937_64& rng);
CVec random_pure(Eigen::Index d, std::mt19937_64& rng);
DensityMatrix random_density(Eigen::Index d, std::mt19937_64& rng, Eigen::Index rank = -1);

}  // namespace qtherm::qcore
