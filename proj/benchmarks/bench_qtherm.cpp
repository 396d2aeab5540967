#include <random>

#include <benchmark/benchmark.h>

#include "qtherm/battery.hpp"
#include "qtherm/cycles.hpp"
#include "qtherm/floquet.hpp"
#include "qtherm/lindblad.hpp"
#include "qtherm/metrology.hpp"
#include "qtherm/sta.hpp"

using namespace qtherm;
using qcore::CMat;

namespace {

lindblad::BathSpec flat_bath(const std::string& label, double temp, const CMat& s) {
  return {label, temp, lindblad::SpectralFunction::flat(0.3), qcore::HermitianOperator(s)};
}

void BM_PartialTrace(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  qcore::DensityMatrix rho = qcore::random_density(1L << n, rng);
  qcore::CompositeSpace space{std::vector<int>(static_cast<size_t>(n), 2)};
  for (auto _ : state) benchmark::DoNotOptimize(qcore::partial_trace(rho, space, {0, 1}));
}
BENCHMARK(BM_PartialTrace)->Arg(6)->Arg(8)->Arg(10);

void BM_LindbladEvolve(benchmark::State& state) {
  const int n_max = static_cast<int>(state.range(0));
  CMat a = qcore::annihilation(n_max);
  auto gen = lindblad::build_generator(qcore::HermitianOperator(qcore::number_operator(n_max)),
                                       {flat_bath("b", 2.0, CMat(a + a.adjoint()))});
  std::mt19937_64 rng(2);
  qcore::DensityMatrix rho = qcore::random_density(n_max + 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(lindblad::evolve(gen, rho, 1.5));
}
BENCHMARK(BM_LindbladEvolve)->Arg(10)->Arg(30)->Arg(60);

void BM_SteadyState(benchmark::State& state) {
  const auto d = state.range(0);
  std::mt19937_64 rng(3);
  auto gen = lindblad::build_generator(qcore::HermitianOperator(qcore::random_hermitian(d, rng)),
                                       {flat_bath("hot", 3.0, qcore::random_hermitian(d, rng)),
                                        flat_bath("cold", 0.5, qcore::random_hermitian(d, rng))});
  for (auto _ : state) benchmark::DoNotOptimize(lindblad::steady_state(gen));
}
BENCHMARK(BM_SteadyState)->Arg(4)->Arg(8)->Arg(16);

void BM_SidebandWeights(benchmark::State& state) {
  floquet::PeriodicModulation mod{10, floquet::Waveform::PiecewiseAsymmetric, 0.02, 0.3, 2};
  for (auto _ : state) benchmark::DoNotOptimize(floquet::sideband_weights(mod, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_SidebandWeights)->Arg(40)->Arg(160);

void BM_CTMCurrents(benchmark::State& state) {
  floquet::PeriodicModulation mod{10, floquet::Waveform::Sinusoidal, 1.0, 0.5, 3};
  auto cfg = floquet::ctm_separated_preset(mod, 4, 1, 1, 1, 40);
  for (auto _ : state) benchmark::DoNotOptimize(floquet::ctm_currents(cfg));
}
BENCHMARK(BM_CTMCurrents);

void BM_OttoNumeric(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(cycles::otto_numeric(2, 1, 4, 1, 40, 200, 60));
}
BENCHMARK(BM_OttoNumeric)->Unit(benchmark::kMillisecond);

void BM_Ergotropy(benchmark::State& state) {
  const auto d = state.range(0);
  std::mt19937_64 rng(4);
  CMat rho = qcore::random_density(d, rng).matrix(), h = qcore::random_hermitian(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(battery::ergotropy(rho, h));
}
BENCHMARK(BM_Ergotropy)->Arg(4)->Arg(16)->Arg(64);

void BM_ChargeLMG(benchmark::State& state) {
  battery::LMGParams p;
  p.n = static_cast<int>(state.range(0));
  p.dt = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(battery::charge_lmg(p));
}
BENCHMARK(BM_ChargeLMG)->Arg(8)->Arg(14)->Unit(benchmark::kMillisecond);

void BM_ChargeXXZ(benchmark::State& state) {
  battery::XXZParams p;
  p.n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(battery::charge_spins_xxz(p));
}
BENCHMARK(BM_ChargeXXZ)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_ThermometerCurrent(benchmark::State& state) {
  metrology::ThermometerModel m;
  for (auto _ : state) benchmark::DoNotOptimize(metrology::thermometer_current(m, 2.5, 0.3, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_ThermometerCurrent)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_QFI(benchmark::State& state) {
  metrology::ParamFamily f{[](double t) { return qcore::gibbs_matrix(CMat(qcore::pauli_z()), t); }};
  for (auto _ : state) benchmark::DoNotOptimize(metrology::qfi(f, 0.7));
}
BENCHMARK(BM_QFI);

void BM_CDPropagator(benchmark::State& state) {
  sta::HamiltonianPath h = [](double t) { return CMat(qcore::pauli_x() + (-5.0 + 100.0 * t) * qcore::pauli_z()); };
  sta::CDProtocol p{h, 1e-5};
  for (auto _ : state) benchmark::DoNotOptimize(sta::cd_propagator(p, 0, 0.1));
}
BENCHMARK(BM_CDPropagator)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
