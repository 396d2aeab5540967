#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qtherm/qcore.hpp"

namespace qtherm::lindblad {

using qcore::CMat;
using qcore::CVec;
using qcore::DensityMatrix;
using qcore::HermitianOperator;
using qcore::RVec;

enum class SpectralFamily { Flat, OhmicExpCutoff, WindowedFlat };

struct FrequencyWindow {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_inclusive = true;
  bool hi_inclusive = true;

  bool contains(double w) const;
};

// Emission-side rate gamma(omega) for omega >= 0. Absorption rates come from
// the KMS completion inside BathSpec::rate and are never stored.
struct SpectralFunction {
  SpectralFamily family = SpectralFamily::Flat;
  double base_rate = 1.0;
  double cutoff = 1.0;
  std::optional<FrequencyWindow> window;

  double operator()(double omega) const;

  static SpectralFunction flat(double rate);
  static SpectralFunction ohmic(double rate, double cutoff);
  static SpectralFunction windowed(double rate, FrequencyWindow window);
};

struct BathSpec {
  std::string label;
  double temperature = 1.0;
  SpectralFunction spectral;
  HermitianOperator coupling;

  // gamma(omega) for omega >= 0 and gamma(-|omega|) = exp(-|omega|/T) gamma(|omega|).
  double rate(double omega) const;
};

struct JumpTerm {
  double omega = 0.0;
  CMat op;
  double rate = 0.0;
};

double default_degeneracy_tol(const HermitianOperator& h);

// Splits s into eigen-operators S(omega) of [h, .] with [h, S(omega)] = -omega S(omega).
// Gaps closer than degeneracy_tol are merged; a negative tolerance selects the default.
std::vector<JumpTerm> decompose_coupling(const HermitianOperator& s, const HermitianOperator& h,
                                         double degeneracy_tol = -1.0);

struct Channel {
  std::string label;
  std::vector<JumpTerm> jumps;
};

// GKSL generator  L rho = -i[H, rho] + sum_channels sum_jumps rate (S rho S^dag - {S^dag S, rho}/2).
//
// The superoperator matrices are produced on demand (they are d^2 x d^2); time
// evolution and steady states work on the connected blocks of the generator in
// the eigenbasis of H, which for secular generators are the Bohr-frequency
// sectors and stay small even for truncated oscillators.
class LindbladGenerator {
 public:
  LindbladGenerator(HermitianOperator h, std::vector<Channel> channels);

  Eigen::Index dim() const { return h_.dim(); }
  const HermitianOperator& hamiltonian() const { return h_; }
  const std::vector<Channel>& channels() const { return channels_; }
  std::vector<std::string> labels() const;
  const Channel& channel(const std::string& label) const;

  CMat hamiltonian_part() const;
  CMat dissipator_part(const std::string& label) const;
  CMat total() const;

  CMat apply(const CMat& rho) const;
  CMat apply_hamiltonian(const CMat& rho) const;
  CMat apply_dissipator(const std::string& label, const CMat& rho) const;

  struct Block {
    std::vector<Eigen::Index> pairs;  // column-stacked indices i + d*j in the eigenbasis
    CMat matrix;
  };
  struct Structure {
    CMat basis;   // eigenvectors of H (columns)
    RVec energies;
    std::vector<Block> blocks;
  };
  const Structure& structure() const { return *structure_; }

 private:
  HermitianOperator h_;
  std::vector<Channel> channels_;
  std::vector<CMat> anti_;  // per channel: sum rate S^dag S
  std::shared_ptr<const Structure> structure_;
};

LindbladGenerator build_generator(const HermitianOperator& h, const std::vector<BathSpec>& baths,
                                  double degeneracy_tol = -1.0);

// exp(L t) applied block by block; reusable for many states at fixed t.
class Propagator {
 public:
  Propagator(const LindbladGenerator& gen, double t);
  CMat apply(const CMat& rho) const;

 private:
  const LindbladGenerator::Structure* s_;
  std::vector<CMat> exps_;
  Eigen::Index d_;
};

DensityMatrix evolve(const LindbladGenerator& gen, const DensityMatrix& rho0, double t);
CMat evolve_matrix(const LindbladGenerator& gen, const CMat& rho0, double t);

class DegenerateSteadyStateError : public Error {
 public:
  DegenerateSteadyStateError(std::vector<CMat> kernel)
      : Error(ErrorKind::DegenerateSteadyState,
              "generator kernel has dimension " + std::to_string(kernel.size())),
        kernel_(std::move(kernel)) {}
  const std::vector<CMat>& kernel() const { return kernel_; }

 private:
  std::vector<CMat> kernel_;
};

DensityMatrix steady_state(const LindbladGenerator& gen);

// J = Tr((L_j rho) H); positive when energy flows into the system.
double heat_current(const CMat& gen_part, const DensityMatrix& rho, const HermitianOperator& h);
double heat_current(const LindbladGenerator& gen, const std::string& label, const DensityMatrix& rho,
                    const HermitianOperator& h);

// dS/dt - sum_j J_j / T_j with dS/dt = -Tr((L rho) ln rho).
double entropy_production(const LindbladGenerator& gen, const DensityMatrix& rho,
                          const std::vector<BathSpec>& baths);

// Integral over one cycle of the largest singular value of a dissipative
// superoperator. Breakpoints split the interval where the integrand jumps.
double bath_action(const std::function<CMat(double)>& dissipator_of_t, double tau_cyc,
                   std::vector<double> breakpoints = {});

CMat superop_hamiltonian(const CMat& h);
CMat superop_dissipator(const CMat& s, double rate);

// Adaptive Dormand-Prince integration of d rho/dt = rhs(t, rho).
CMat integrate_master_equation(const std::function<CMat(double, const CMat&)>& rhs, const CMat& rho0,
                               double t0, double t1, double tol = 1e-10);
DensityMatrix evolve_time_dependent(const std::function<LindbladGenerator(double)>& gen_of_t,
                                    const DensityMatrix& rho0, double t0, double t1, double tol = 1e-10);

// Rebuilds the generator at the midpoint of each slice and propagates exactly
// within it. Whether the slow-driving assumption holds is left to the caller.
DensityMatrix evolve_quasistatic(const std::function<LindbladGenerator(double)>& gen_of_t,
                                 const DensityMatrix& rho0, double t0, double t1, int slices);

}  // namespace qtherm::lindblad
