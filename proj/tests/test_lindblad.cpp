#include <cmath>
#include <random>

#include "doctest.h"
#include "qtherm/lindblad.hpp"

using namespace qtherm;
using namespace qtherm::qcore;
using namespace qtherm::lindblad;

namespace {

HermitianOperator qubit_h(double w0) { return HermitianOperator(0.5 * w0 * pauli_z()); }

BathSpec flat_bath(const std::string& label, double temperature, double rate, const CMat& coupling) {
  return BathSpec{label, temperature, SpectralFunction::flat(rate), HermitianOperator(coupling)};
}

// Superoperator of a linear map assembled column by column from its action on |i><j|.
template <class Map>
CMat superop_from_map(Map&& f, Eigen::Index d) {
  CMat out(d * d, d * d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      CMat e = CMat::Zero(d, d);
      e(i, j) = 1.0;
      CMat img = f(e);
      out.col(i + d * j) = Eigen::Map<const CVec>(img.data(), d * d);
    }
  return out;
}

CMat dense_evolve(const LindbladGenerator& gen, const CMat& rho, double t) {
  CMat big = matrix_exp(gen.total(), t);
  return devectorize(big * vectorize(rho), gen.dim());
}

struct RandomModel {
  LindbladGenerator gen;
  std::vector<BathSpec> baths;
};

RandomModel random_two_bath_model(std::mt19937_64& rng, Eigen::Index d) {
  std::uniform_real_distribution<double> u(0.3, 2.0);
  HermitianOperator h(random_hermitian(d, rng));
  std::vector<BathSpec> baths{flat_bath("hot", u(rng) * 2.0, u(rng) * 0.3, random_hermitian(d, rng)),
                              flat_bath("cold", u(rng) * 0.5, u(rng) * 0.3, random_hermitian(d, rng))};
  return {build_generator(h, baths), baths};
}

}  // namespace

TEST_CASE("decompose_coupling of sigma_x on a qubit") {
  auto terms = decompose_coupling(HermitianOperator(pauli_x()), qubit_h(1.3));
  REQUIRE(terms.size() == 2);
  CHECK(terms[0].omega == doctest::Approx(-1.3));
  CHECK((terms[0].op - sigma_plus()).norm() < 1e-12);
  CHECK(terms[1].omega == doctest::Approx(1.3));
  CHECK((terms[1].op - sigma_minus()).norm() < 1e-12);
}

TEST_CASE("decompose_coupling of a commuting coupling is pure dephasing") {
  auto terms = decompose_coupling(HermitianOperator(pauli_z()), qubit_h(1.0));
  REQUIRE(terms.size() == 1);
  CHECK(terms[0].omega == 0.0);
  CHECK((terms[0].op - pauli_z()).norm() < 1e-12);
}

TEST_CASE("decompose_coupling on random four-level systems") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    CMat hm = random_hermitian(4, rng), sm = random_hermitian(4, rng);
    auto terms = decompose_coupling(HermitianOperator(sm), HermitianOperator(hm));
    CMat sum = CMat::Zero(4, 4);
    for (const auto& t : terms) {
      sum += t.op;
      CHECK((commutator(hm, t.op) + t.omega * t.op).norm() < 1e-10);
      // partner at -omega is the adjoint
      bool found = false;
      for (const auto& u : terms)
        if (std::abs(u.omega + t.omega) < 1e-9) {
          found = true;
          CHECK((u.op - t.op.adjoint()).norm() < 1e-12);
        }
      CHECK(found);
    }
    CHECK((sum - sm).norm() < 1e-12);
  }
}

TEST_CASE("qubit generator matches hand-built superoperator") {
  const double g0 = 0.4, temp = 1.0;
  auto gen = build_generator(qubit_h(1.0), {flat_bath("b", temp, g0, pauli_x())});
  const CMat sm = sigma_minus(), sp = sigma_plus();
  const double up = g0 * std::exp(-1.0 / temp);
  auto lind = [&](const CMat& r) {
    CMat h = 0.5 * pauli_z();
    CMat out = -I * (h * r - r * h);
    out += g0 * (sm * r * sp - 0.5 * (sp * sm * r + r * sp * sm));
    out += up * (sp * r * sm - 0.5 * (sm * sp * r + r * sm * sp));
    return out;
  };
  CMat oracle = superop_from_map(lind, 2);
  CHECK((gen.total() - oracle).cwiseAbs().maxCoeff() < 1e-12);

  int active = 0;
  for (const auto& j : gen.channel("b").jumps)
    if (j.rate > 0) ++active;
  CHECK(active == 2);
  for (const auto& j : gen.channel("b").jumps) {
    if (j.omega > 0) CHECK(j.rate == doctest::Approx(g0));
    if (j.omega < 0) CHECK(j.rate == doctest::Approx(up));
  }
}

TEST_CASE("generator structure invariants") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto m = random_two_bath_model(rng, 3);
    CMat total = m.gen.total();
    CMat parts = m.gen.hamiltonian_part() + m.gen.dissipator_part("hot") + m.gen.dissipator_part("cold");
    CHECK((total - parts).cwiseAbs().maxCoeff() < 1e-12);
    CVec tr_row = vectorize(CMat::Identity(3, 3));
    CHECK((tr_row.adjoint() * total).cwiseAbs().maxCoeff() < 1e-12);
    DensityMatrix r = random_density(3, rng);
    CMat via_super = devectorize(total * vectorize(r.matrix()), 3);
    CHECK((via_super - m.gen.apply(r.matrix())).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("zero coupling leaves the commutator") {
  auto gen = build_generator(qubit_h(1.0), {flat_bath("b", 1.0, 0.0, pauli_x())});
  CHECK((gen.total() - gen.hamiltonian_part()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two baths add") {
  std::mt19937_64 rng(8);
  HermitianOperator h(random_hermitian(3, rng));
  BathSpec a = flat_bath("a", 1.5, 0.2, random_hermitian(3, rng));
  BathSpec b = flat_bath("b", 0.5, 0.1, random_hermitian(3, rng));
  CMat both = build_generator(h, {a, b}).total();
  CMat sum = build_generator(h, {a}).total() + build_generator(h, {b}).total() -
             build_generator(h, {}).total();
  CHECK((both - sum).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dimension mismatch") {
  try {
    build_generator(qubit_h(1.0), {flat_bath("b", 1.0, 0.1, CMat::Identity(3, 3))});
    FAIL("expected DimMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimMismatch);
  }
}

TEST_CASE("block propagation agrees with the dense superoperator exponential") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ut(0.0, 5.0);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_two_bath_model(rng, 4);
    DensityMatrix r = random_density(4, rng);
    double t = ut(rng);
    CHECK((evolve_matrix(m.gen, r.matrix(), t) - dense_evolve(m.gen, r.matrix(), t)).cwiseAbs().maxCoeff() < 1e-10);
  }
  // A degenerate oscillator-like ladder exercises non-trivial blocks.
  CMat a = annihilation(5);
  HermitianOperator h(number_operator(5));
  auto gen = build_generator(h, {flat_bath("b", 0.8, 0.3, a + a.adjoint())});
  CHECK(gen.structure().blocks.size() > 1);
  DensityMatrix r = random_density(6, rng);
  CHECK((evolve_matrix(gen, r.matrix(), 2.0) - dense_evolve(gen, r.matrix(), 2.0)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("evolve basics") {
  auto gen = build_generator(qubit_h(1.0), {flat_bath("b", 0.7, 0.5, pauli_x())});
  std::mt19937_64 rng(1);
  DensityMatrix r0 = random_density(2, rng);
  CHECK(evolve(gen, r0, 0.0).matrix() == r0.matrix());
  DensityMatrix late = evolve(gen, r0, 200.0);
  CHECK(trace_distance(late.matrix(), gibbs_matrix(0.5 * pauli_z(), 0.7)) < 1e-8);
}

TEST_CASE("evolution properties over random triples") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ut(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto m = random_two_bath_model(rng, 3);
    DensityMatrix r = random_density(3, rng);
    double t1 = ut(rng), t2 = ut(rng);
    DensityMatrix out = evolve(m.gen, r, t1 + t2);
    CHECK(std::abs(out.matrix().trace().real() - 1.0) < 1e-10);
    CHECK(out.min_eigenvalue() >= -1e-9);
    DensityMatrix two_step = evolve(m.gen, evolve(m.gen, r, t1), t2);
    CHECK((two_step.matrix() - out.matrix()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("steady state of a single thermal bath") {
  const double temp = 0.6;
  auto gen = build_generator(qubit_h(1.0), {flat_bath("b", temp, 0.3, pauli_x())});
  DensityMatrix ss = steady_state(gen);
  double ratio = ss.matrix()(0, 0).real() / ss.matrix()(1, 1).real();
  CHECK(std::abs(ratio - std::exp(-1.0 / temp)) < 1e-10);
  CHECK(gen.apply(ss.matrix()).cwiseAbs().maxCoeff() < 1e-10);

  auto hot = build_generator(qubit_h(1.0), {flat_bath("b", 1e6, 0.3, pauli_x())});
  CHECK((steady_state(hot).matrix() - CMat::Identity(2, 2) * 0.5).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("detailed balance on random multilevel systems") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    CMat hm = random_hermitian(4, rng);
    const double temp = 0.9;
    auto gen = build_generator(HermitianOperator(hm), {flat_bath("b", temp, 0.2, random_hermitian(4, rng))});
    DensityMatrix ss = steady_state(gen);
    EigenSystem es = hermitian_eig(hm);
    CMat in_eig = es.vectors.adjoint() * ss.matrix() * es.vectors;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double ratio = in_eig(i, i).real() / in_eig(j, j).real();
        CHECK(std::abs(ratio - std::exp(-(es.values(i) - es.values(j)) / temp)) < 1e-9 * std::max(1.0, ratio));
      }
  }
}

TEST_CASE("pure dephasing has a degenerate kernel") {
  auto gen = build_generator(qubit_h(1.0), {flat_bath("b", 1.0, 0.3, pauli_z())});
  try {
    steady_state(gen);
    FAIL("expected DegenerateSteadyState");
  } catch (const DegenerateSteadyStateError& e) {
    CHECK(e.kind() == ErrorKind::DegenerateSteadyState);
    CHECK(e.kernel().size() == 2);
    for (const auto& k : e.kernel()) CHECK(gen.apply(k).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("heat current") {
  const double w0 = 1.0, g0 = 0.3, temp = 0.5;
  auto bath = flat_bath("b", temp, g0, pauli_x());
  auto gen = build_generator(qubit_h(w0), {bath});
  HermitianOperator h = qubit_h(w0);
  CHECK(std::abs(heat_current(gen, "b", steady_state(gen), h)) < 1e-10);

  // Qubit at a higher temperature than the bath: populations relax, energy leaves.
  DensityMatrix hotter(gibbs_matrix(h.matrix(), 2.0));
  double pe = hotter.matrix()(0, 0).real(), pg = hotter.matrix()(1, 1).real();
  double oracle = w0 * (g0 * std::exp(-w0 / temp) * pg - g0 * pe);
  double j = heat_current(gen, "b", hotter, h);
  CHECK(j < 0);
  CHECK(j == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(heat_current(gen.dissipator_part("b"), hotter, h) == doctest::Approx(j).epsilon(1e-12));
}

TEST_CASE("static first law at the joint steady state") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto m = random_two_bath_model(rng, 3);
    DensityMatrix ss = steady_state(m.gen);
    double jh = heat_current(m.gen, "hot", ss, m.gen.hamiltonian());
    double jc = heat_current(m.gen, "cold", ss, m.gen.hamiltonian());
    CHECK(std::abs(jh + jc) < 1e-10);
  }
}

TEST_CASE("entropy production") {
  const double temp = 0.8;
  auto bath = flat_bath("b", temp, 0.3, pauli_x());
  auto gen = build_generator(qubit_h(1.0), {bath});
  DensityMatrix gibbs(gibbs_matrix(0.5 * pauli_z(), temp));
  CHECK(std::abs(entropy_production(gen, gibbs, {bath})) < 1e-10);

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    auto m = random_two_bath_model(rng, 3);
    DensityMatrix ss = steady_state(m.gen);
    double sigma = entropy_production(m.gen, ss, m.baths);
    double reduced = 0.0;
    for (const auto& b : m.baths) reduced -= heat_current(m.gen, b.label, ss, m.gen.hamiltonian()) / b.temperature;
    CHECK(sigma == doctest::Approx(reduced).epsilon(1e-8));
    CHECK(sigma >= -1e-9);
  }
  auto m = random_two_bath_model(rng, 3);
  for (int trial = 0; trial < 100; ++trial) CHECK(entropy_production(m.gen, random_density(3, rng), m.baths) >= -1e-9);
}

TEST_CASE("bath action") {
  auto gen = build_generator(qubit_h(1.0), {flat_bath("b", 1.0, 0.4, pauli_x())});
  CMat d = gen.dissipator_part("b");
  Eigen::JacobiSVD<CMat> svd(d);
  double norm = svd.singularValues()(0);
  CHECK(bath_action([](double) { return CMat::Zero(4, 4).eval(); }, 3.0) == 0.0);
  CHECK(bath_action([&](double) { return d; }, 3.0) == doctest::Approx(norm * 3.0).epsilon(1e-10));
  auto half = [&](double t) { return t < 1.5 ? d : CMat::Zero(4, 4).eval(); };
  CHECK(bath_action(half, 3.0, {1.5}) == doctest::Approx(norm * 1.5).epsilon(1e-10));
}

TEST_CASE("time-dependent and quasistatic integrators reduce to the exact propagator") {
  std::mt19937_64 rng(77);
  auto m = random_two_bath_model(rng, 3);
  DensityMatrix r = random_density(3, rng);
  auto constant = [&](double) { return m.gen; };
  DensityMatrix exact = evolve(m.gen, r, 1.7);
  CHECK((evolve_time_dependent(constant, r, 0.0, 1.7).matrix() - exact.matrix()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((evolve_quasistatic(constant, r, 0.0, 1.7, 4).matrix() - exact.matrix()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("spectral functions") {
  CHECK(SpectralFunction::flat(0.5)(3.0) == 0.5);
  auto oh = SpectralFunction::ohmic(2.0, 4.0);
  CHECK(oh(4.0) == doctest::Approx(2.0 * std::exp(-1.0)));
  auto win = SpectralFunction::windowed(1.0, FrequencyWindow{1.0, 2.0, false, true});
  CHECK(win(1.0) == 0.0);
  CHECK(win(1.5) == 1.0);
  CHECK(win(2.0) == 1.0);
  CHECK(win(2.1) == 0.0);
  BathSpec b{"b", 0.5, SpectralFunction::flat(1.0), HermitianOperator(pauli_x())};
  CHECK(b.rate(-1.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(b.rate(-1.0) / b.rate(1.0) == doctest::Approx(std::exp(-1.0 / 0.5)));
}
