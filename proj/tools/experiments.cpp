#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "cli.hpp"
#include "qtherm/battery.hpp"
#include "qtherm/cycles.hpp"
#include "qtherm/floquet.hpp"
#include "qtherm/metrology.hpp"
#include "qtherm/sta.hpp"

namespace qtherm::cli {

namespace {

using qcore::CMat;
using qcore::CVec;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = std::numbers::pi;

ParamSpec positive(const std::string& name, std::optional<std::string> fallback, const std::string& help) {
  ParamSpec p{name, ParamType::Number, std::move(fallback), 0.0, 1e300, true, {}, help};
  return p;
}

ParamSpec number(const std::string& name, std::optional<std::string> fallback, double lo, double hi,
                 const std::string& help) {
  return ParamSpec{name, ParamType::Number, std::move(fallback), lo, hi, false, {}, help};
}

ParamSpec integer(const std::string& name, std::optional<std::string> fallback, double lo, double hi,
                  const std::string& help) {
  return ParamSpec{name, ParamType::Integer, std::move(fallback), lo, hi, false, {}, help};
}

ParamSpec choice(const std::string& name, std::string fallback, std::vector<std::string> options,
                 const std::string& help) {
  return ParamSpec{name, ParamType::Choice, std::move(fallback), -1e300, 1e300, false, std::move(options), help};
}

ParamSpec boolean(const std::string& name, std::string fallback, const std::string& help) {
  return ParamSpec{name, ParamType::Boolean, std::move(fallback), -1e300, 1e300, false, {}, help};
}

ParamSpec list(const std::string& name, double lo, const std::string& help) {
  return ParamSpec{name, ParamType::List, std::nullopt, lo, 1e300, false, {}, help};
}

double opt(const std::optional<double>& x) { return x ? *x : kNaN; }

const std::vector<std::string> kCycleColumns{"net_work_output", "q_hot",         "q_cold",
                                             "efficiency",      "cop",           "mode",
                                             "carnot_margin",   "first_law_residual"};

std::vector<Cell> cycle_cells(const cycles::CycleReport& r) {
  return {r.net_work_output, r.q_hot,           r.q_cold,
          opt(r.efficiency), opt(r.cop),        floquet::to_string(r.mode),
          r.carnot_margin,   r.first_law_residual()};
}

Table cycle_table(const cycles::CycleReport& r, std::vector<std::string> extra_columns = {},
                  std::vector<Cell> extra = {}) {
  Table t;
  t.columns = kCycleColumns;
  t.columns.insert(t.columns.end(), extra_columns.begin(), extra_columns.end());
  std::vector<Cell> row = cycle_cells(r);
  row.insert(row.end(), extra.begin(), extra.end());
  t.add(std::move(row));
  return t;
}

std::vector<double> grid(double from, double to, long steps) {
  std::vector<double> g(static_cast<size_t>(steps));
  for (long k = 0; k < steps; ++k) g[static_cast<size_t>(k)] = from + (to - from) * k / static_cast<double>(steps - 1);
  return g;
}

CMat diagonal_state(const Params& p) {
  const auto& levels = p.list("levels");
  const auto& pops = p.list("populations");
  if (levels.size() != pops.size())
    throw Error(ErrorKind::DimMismatch, "levels and populations have different lengths");
  double total = 0.0;
  for (double x : pops) total += x;
  if (total <= 0) throw Error(ErrorKind::InvalidState, "populations sum to zero");
  const auto d = static_cast<Eigen::Index>(pops.size());
  CMat rho = CMat::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) rho(k, k) = pops[static_cast<size_t>(k)] / total;
  return rho;
}

CMat level_hamiltonian(const Params& p) {
  const auto& levels = p.list("levels");
  const auto d = static_cast<Eigen::Index>(levels.size());
  CMat h = CMat::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) h(k, k) = levels[static_cast<size_t>(k)];
  return h;
}

const std::vector<std::string> kSummaryColumns{
    "n",             "capacity",        "optimal_time",   "energy_at_optimum", "mean_power",
    "max_mean_power", "mean_variance",  "mean_fisher",    "mean_tightness",    "bound_violation",
    "final_fraction", "final_entanglement", "tau_mt",     "tau_unified"};

Table charge_table(battery::ChargeTrace t, long n, const std::string& output) {
  const double violation = battery::power_bound_check(t);
  Table out;
  if (output == "trace") {
    out.columns = {"time", "energy", "power", "variance", "energy_fisher", "tightness", "local_variance",
                   "entanglement_variance"};
    for (size_t k = 0; k < t.times.size(); ++k) {
      const double local = k < t.local_variance.size() ? t.local_variance[k] : kNaN;
      const double ent = k < t.entanglement_variance.size() ? t.entanglement_variance[k] : kNaN;
      out.add({t.times[k], t.energies[k], t.powers[k], t.variances[k], t.energy_fisher[k], t.bound_tightness[k],
               local, ent});
    }
    return out;
  }
  out.columns = kSummaryColumns;
  out.add({n, t.capacity, t.optimal_time(), t.energies[t.optimal_index], t.mean_power(), t.max_mean_power(),
           t.mean_variance(), t.mean_fisher(), t.mean_tightness(), violation, t.final_fraction,
           t.final_entanglement, t.qsl.tau_mt, t.qsl.tau_unified});
  return out;
}

floquet::Waveform waveform_of(const std::string& s) {
  if (s == "constant") return floquet::Waveform::Constant;
  if (s == "asymmetric") return floquet::Waveform::PiecewiseAsymmetric;
  return floquet::Waveform::Sinusoidal;
}

std::vector<Experiment> build_catalog() {
  std::vector<Experiment> c;

  c.push_back({"maser", "three-level maser: population inversion and operating mode",
               {positive("omega_h", std::nullopt, "hot transition frequency"),
                positive("omega_c", std::nullopt, "cold transition frequency"),
                positive("t_hot", std::nullopt, "hot bath temperature"),
                positive("t_cold", std::nullopt, "cold bath temperature")},
               [](const Params& p, std::uint64_t) {
                 auto r = cycles::maser_analyze(p.number("omega_h"), p.number("omega_c"), p.number("t_hot"),
                                                p.number("t_cold"));
                 Table t;
                 t.columns = {"inversion", "mode", "efficiency", "cop"};
                 t.add({r.inversion, floquet::to_string(r.mode), opt(r.efficiency), opt(r.cop)});
                 return t;
               }});

  c.push_back({"box-carnot", "two-level particle-in-a-box Carnot cycle between box lengths",
               {positive("length_a", std::nullopt, "larger box length (L_A > L_B)"),
                positive("length_b", std::nullopt, "smaller box length"),
                positive("mass", "1", "particle mass")},
               [](const Params& p, std::uint64_t) {
                 return cycle_table(cycles::box_carnot(p.number("length_a"), p.number("length_b"), p.number("mass")));
               }});

  c.push_back({"otto", "ideal harmonic-oscillator Otto cycle in closed form",
               {positive("omega_a", std::nullopt, "frequency on the hot isochore"),
                positive("omega_b", std::nullopt, "frequency on the cold isochore"),
                positive("t_hot", std::nullopt, "hot bath temperature"),
                positive("t_cold", std::nullopt, "cold bath temperature")},
               [](const Params& p, std::uint64_t) {
                 return cycle_table(cycles::otto_qho(p.number("omega_a"), p.number("omega_b"), p.number("t_hot"),
                                                     p.number("t_cold")));
               }});

  c.push_back({"otto-squeezed", "Otto cycle with a squeezed hot bath",
               {positive("omega_a", std::nullopt, "frequency on the hot isochore"),
                positive("omega_b", std::nullopt, "frequency on the cold isochore"),
                positive("t_hot", std::nullopt, "hot bath temperature"),
                positive("t_cold", std::nullopt, "cold bath temperature"),
                number("squeezing", std::nullopt, 0.0, 1e300, "squeezing parameter r of the hot bath")},
               [](const Params& p, std::uint64_t) {
                 auto r = cycles::otto_squeezed(p.number("omega_a"), p.number("omega_b"), p.number("t_hot"),
                                                p.number("t_cold"), p.number("squeezing"));
                 return cycle_table(r.cycle, {"efficiency_at_max_power", "generalized_carnot"},
                                    {r.efficiency_at_max_power, r.generalized_carnot});
               }});

  c.push_back({"otto-numeric", "finite-time Otto cycle: unitary frequency ramps and Lindblad isochores",
               {positive("omega_a", std::nullopt, "frequency on the hot isochore"),
                positive("omega_b", std::nullopt, "frequency on the cold isochore"),
                positive("t_hot", std::nullopt, "hot bath temperature"),
                positive("t_cold", std::nullopt, "cold bath temperature"),
                positive("ramp_time", std::nullopt, "duration of each frequency ramp"),
                positive("thermalization_time", "200", "duration of each isochore"),
                integer("n_max", "60", 2, 400, "Fock-space cutoff"),
                positive("bath_rate", "1", "bath coupling rate")},
               [](const Params& p, std::uint64_t) {
                 cycles::OttoNumericOptions o;
                 o.bath_rate = p.number("bath_rate");
                 auto r = cycles::otto_numeric(p.number("omega_a"), p.number("omega_b"), p.number("t_hot"),
                                               p.number("t_cold"), p.number("ramp_time"),
                                               p.number("thermalization_time"), static_cast<int>(p.integer("n_max")), o);
                 return cycle_table(r.cycle, {"ideal_work_output", "friction"}, {r.ideal_work_output, r.friction});
               }});

  c.push_back({"two-stroke", "two-stroke engine with a partial swap between two qubits",
               {positive("omega_k", std::nullopt, "known gap (omega_k > omega_un)"),
                positive("omega_un", std::nullopt, "second qubit gap"),
                positive("t_hot", std::nullopt, "hot bath temperature"),
                positive("t_cold", std::nullopt, "cold bath temperature"),
                number("theta", std::nullopt, 0.0, kPi, "swap angle in [0, pi]")},
               [](const Params& p, std::uint64_t) {
                 return cycle_table(cycles::two_stroke(p.number("omega_k"), p.number("omega_un"), p.number("t_hot"),
                                                       p.number("t_cold"), p.number("theta")));
               }});

  c.push_back({"ctm", "continuous thermal machine: periodically modulated qubit between two baths",
               {positive("omega0", std::nullopt, "mean qubit gap"),
                positive("drive_frequency", std::nullopt, "modulation frequency"),
                positive("t_hot", std::nullopt, "hot bath temperature"),
                positive("t_cold", std::nullopt, "cold bath temperature"),
                choice("waveform", "sinusoidal", {"constant", "sinusoidal", "asymmetric"}, "modulation shape"),
                number("amplitude_ratio", "0.001", 0.0, 1e300, "modulation amplitude over drive frequency"),
                ParamSpec{"up_fraction", ParamType::Number, "0.5", 0.0, 1.0, true, {}, "asymmetric: raised fraction"},
                positive("rate_hot", "1", "hot bath rate"), positive("rate_cold", "1", "cold bath rate"),
                integer("m_max", "40", 1, 2560, "sideband truncation")},
               [](const Params& p, std::uint64_t) {
                 floquet::PeriodicModulation mod;
                 mod.mean_gap = p.number("omega0");
                 mod.drive_frequency = p.number("drive_frequency");
                 mod.waveform = waveform_of(p.text("waveform"));
                 mod.amplitude = p.number("amplitude_ratio") * mod.drive_frequency;
                 mod.up_fraction = p.number("up_fraction");
                 const int m_max = static_cast<int>(p.integer("m_max"));
                 const double th = p.number("t_hot"), tc = p.number("t_cold");
                 auto cfg = floquet::ctm_separated_preset(mod, th, tc, p.number("rate_hot"), p.number("rate_cold"), m_max);
                 auto r = floquet::ctm_currents(cfg, m_max);
                 Table t;
                 t.columns = {"r", "j_hot", "j_cold", "power", "mode", "efficiency", "cop", "omega_cr", "entropy_flux",
                              "m_max_used"};
                 t.add({r.r, r.j_hot, r.j_cold, r.power, floquet::to_string(r.mode), opt(r.efficiency), opt(r.cop),
                        r.omega_cr, r.j_hot / th + r.j_cold / tc, static_cast<long>(r.m_max_used)});
                 return t;
               }});

  c.push_back({"sta-ermakov", "oscillator frequency change along an invariant-based shortcut",
               {positive("omega_i", std::nullopt, "initial frequency"),
                positive("omega_f", std::nullopt, "final frequency"),
                positive("tau", std::nullopt, "protocol duration"),
                integer("n_max", "80", 4, 400, "Fock-space cutoff"),
                positive("temperature", "0.5", "temperature of the initial thermal state"),
                integer("samples", "50", 2, 100000, "invariant samples along the protocol")},
               [](const Params& p, std::uint64_t) {
                 auto s = sta::ermakov_schedule(p.number("omega_i"), p.number("omega_f"), p.number("tau"));
                 auto tr = sta::ermakov_transport(s, static_cast<int>(p.integer("n_max")), p.number("temperature"),
                                                  static_cast<int>(p.integer("samples")));
                 Table t;
                 t.columns = {"boundary_residual", "trap_inversion", "min_omega_sq", "invariant_drift",
                              "population_error"};
                 t.add({s.boundary_residual(), s.trap_inversion, s.min_omega_sq, tr.max_drift, tr.population_error});
                 return t;
               }});

  c.push_back({"sta-cd", "counterdiabatic driving of a Landau-Zener sweep",
               {positive("delta", "1", "fixed transverse field"),
                number("sweep_from", "-5", -1e300, 1e300, "initial longitudinal field"),
                number("sweep_to", "5", -1e300, 1e300, "final longitudinal field"),
                positive("tau", std::nullopt, "sweep duration")},
               [](const Params& p, std::uint64_t) {
                 const double delta = p.number("delta"), a = p.number("sweep_from"), b = p.number("sweep_to"),
                              tau = p.number("tau");
                 sta::HamiltonianPath h = [=](double t) {
                   return CMat(delta * qcore::pauli_x() + (a + (b - a) * t / tau) * qcore::pauli_z());
                 };
                 sta::CDProtocol cd{h, 1e-4 * tau};
                 CVec start = qcore::hermitian_eig(h(0)).vectors.col(0);
                 CVec target = qcore::hermitian_eig(h(tau)).vectors.col(0);
                 CVec with = sta::cd_propagator(cd, 0, tau) * start;
                 CVec without = qcore::time_ordered_propagator(h, 0, tau) * start;
                 Table t;
                 t.columns = {"infidelity_cd", "infidelity_bare", "cd_cost", "adiabatic_ratio"};
                 t.add({1.0 - std::norm(target.dot(with)), 1.0 - std::norm(target.dot(without)), cd.cd_cost(0, tau),
                        std::abs(b - a) / tau / (delta * delta)});
                 return t;
               }});

  c.push_back({"outcoupled", "Otto engine kicking an external oscillator over many cycles",
               {positive("delta", "1", "engine energy scale"),
                integer("cycles", "10", 1, 200, "number of engine cycles"),
                positive("coupling", "0.02", "kick strength"),
                integer("cutoff", "30", 4, 400, "oscillator Fock cutoff")},
               [](const Params& p, std::uint64_t) {
                 auto op = cycles::OutcoupledParams::reference(p.number("delta"));
                 op.coupling = p.number("coupling");
                 op.cutoff = static_cast<int>(p.integer("cutoff"));
                 Table t;
                 t.columns = {"cycle", "work_coherent", "work_dephased", "work_projective"};
                 for (long n = 1; n <= p.integer("cycles"); ++n) {
                   const int k = static_cast<int>(n);
                   t.add({n, cycles::outcoupled_multicycle(op, k, false), cycles::outcoupled_multicycle(op, k, true),
                          cycles::outcoupled_projective_work(op, k)});
                 }
                 return t;
               }});

  c.push_back({"qfi", "quantum and classical Fisher information of a qubit family",
               {choice("family", "thermal", {"thermal", "phase"},
                       "thermal: Gibbs qubit at temperature theta; phase: dephased equator state at angle theta"),
                number("theta", std::nullopt, -1e300, 1e300, "parameter value"),
                positive("omega", "1", "qubit gap (thermal family)"),
                ParamSpec{"dephasing", ParamType::Number, "0", 0.0, 1.0, false, {}, "white-noise weight (phase family)"}},
               [](const Params& p, std::uint64_t) {
                 const double omega = p.number("omega"), noise = p.number("dephasing"), theta = p.number("theta");
                 metrology::ParamFamily fam;
                 std::vector<CMat> povm;
                 if (p.text("family") == "thermal") {
                   if (theta <= 0) throw Error(ErrorKind::InvalidParams, "temperature must be positive");
                   fam.generator = [omega](double temp) { return qcore::gibbs_matrix(0.5 * omega * qcore::pauli_z(), temp); };
                   povm = {CMat(CVec::Unit(2, 0) * CVec::Unit(2, 0).adjoint()),
                           CMat(CVec::Unit(2, 1) * CVec::Unit(2, 1).adjoint())};
                 } else {
                   fam.generator = [noise](double phi) {
                     CVec psi(2);
                     psi << 1.0, std::exp(qcore::I * phi);
                     psi /= std::sqrt(2.0);
                     return CMat((1.0 - noise) * psi * psi.adjoint() + noise * CMat::Identity(2, 2) / 2.0);
                   };
                   CVec plus(2), minus(2);
                   plus << 1.0, 1.0;
                   minus << 1.0, -1.0;
                   povm = {CMat(plus * plus.adjoint() / 2.0), CMat(minus * minus.adjoint() / 2.0)};
                 }
                 auto r = metrology::qfi(fam, theta, povm);
                 Table t;
                 t.columns = {"qfi", "cfi", "fidelity_susceptibility", "cramer_rao_floor"};
                 t.add({r.qfi, opt(r.cfi), metrology::fidelity_susceptibility(fam, theta), r.cramer_rao_floor});
                 return t;
               }});

  c.push_back({"thermometry", "null-current thermometry with two coupled cavities",
               {positive("t_cold", std::nullopt, "cold temperature to estimate"),
                positive("t_hot_from", std::nullopt, "lowest probe temperature"),
                positive("t_hot_to", std::nullopt, "highest probe temperature"),
                integer("t_hot_steps", "41", 2, 100000, "probe temperature grid size"),
                positive("omega_h", "8.5", "hot cavity frequency"), positive("omega_c", "1", "cold cavity frequency"),
                positive("kappa_h", "0.06", "hot cavity damping"), positive("kappa_c", "0.06", "cold cavity damping"),
                positive("g", "0.05", "exchange rate"),
                positive("current_resolution", "1e-6", "smallest resolvable current"),
                integer("n_max", "0", 0, 400, "Fock cutoff; 0 chooses one from the hottest probe")},
               [](const Params& p, std::uint64_t) {
                 metrology::ThermometerModel m{p.number("omega_h"), p.number("omega_c"), p.number("kappa_h"),
                                               p.number("kappa_c"), p.number("g")};
                 auto g = grid(p.number("t_hot_from"), p.number("t_hot_to"), p.integer("t_hot_steps"));
                 auto r = metrology::thermometry_simulate(m, p.number("t_cold"), g, static_cast<int>(p.integer("n_max")));
                 auto err = metrology::thermometry_error(m, r.estimated_parameter, p.number("current_resolution"),
                                                         g[1] - g[0]);
                 Table t;
                 t.columns = {"null_t_hot", "t_cold_estimate", "grid_error", "delta_t_cold", "c1", "c2", "c1_over_c2"};
                 t.add({r.null_location, r.estimated_parameter, r.error_estimate, err.delta_tc, err.c1, err.c2,
                        err.c1_over_c2});
                 return t;
               }});

  c.push_back({"magnetometry", "two-stroke null magnetometry of an unknown field",
               {positive("omega_un", std::nullopt, "true unknown gap"),
                positive("t_hot", std::nullopt, "hot bath temperature"),
                positive("t_cold", std::nullopt, "cold bath temperature"),
                ParamSpec{"theta", ParamType::Number, "1.5707963267948966", 0.0, kPi, true, {}, "swap angle"},
                positive("omega_k_from", std::nullopt, "lowest known gap"),
                positive("omega_k_to", std::nullopt, "highest known gap"),
                integer("omega_k_steps", "101", 2, 1000000, "known gap grid size"),
                number("omega_k_error", "0", 0.0, 1e300, "error of the null location; 0 uses the grid spacing")},
               [](const Params& p, std::uint64_t) {
                 auto g = grid(p.number("omega_k_from"), p.number("omega_k_to"), p.integer("omega_k_steps"));
                 auto r = metrology::magnetometry_null(p.number("omega_un"), p.number("t_hot"), p.number("t_cold"),
                                                       p.number("theta"), g, p.number("omega_k_error"));
                 Table t;
                 t.columns = {"null_omega_k", "omega_un_estimate", "error_estimate"};
                 t.add({r.null_location, r.estimated_parameter, r.error_estimate});
                 return t;
               }});

  c.push_back({"ergotropy", "ergotropy and passive state of a level-diagonal state with optional coherence",
               {list("levels", -1e300, "comma-separated energies"),
                list("populations", 0.0, "comma-separated populations, normalised on input"),
                number("coherence", "0", 0.0, 1.0, "weight of the uniform superposition mixed in")},
               [](const Params& p, std::uint64_t) {
                 CMat rho = diagonal_state(p), h = level_hamiltonian(p);
                 const double c = p.number("coherence");
                 if (c > 0) {
                   CVec u = CVec::Ones(rho.rows()) / std::sqrt(static_cast<double>(rho.rows()));
                   rho = (1 - c) * rho + c * u * u.adjoint();
                 }
                 auto r = battery::ergotropy(rho, h);
                 double fraction = kNaN;
                 try {
                   fraction = battery::extractable_fraction(rho, h);
                 } catch (const Error& e) {
                   if (e.kind() != ErrorKind::UndefinedFraction) throw;
                 }
                 Table t;
                 t.columns = {"energy", "ergotropy", "passive_energy", "thermal_bound", "bound_gap", "effective_beta",
                              "extractable_fraction"};
                 t.add({qcore::expectation(rho, h), r.ergotropy, r.passive_energy, r.thermal_bound, r.bound_gap,
                        r.effective_beta, fraction});
                 return t;
               }});

  c.push_back({"n-copy", "per-copy passive energy of N copies of a cell",
               {list("levels", -1e300, "comma-separated energies"),
                list("populations", 0.0, "comma-separated populations, normalised on input"),
                integer("copies", "5", 1, 12, "largest number of copies")},
               [](const Params& p, std::uint64_t) {
                 CMat rho = diagonal_state(p), h = level_hamiltonian(p);
                 const double floor =
                     battery::entropy_matched_gibbs(h, qcore::von_neumann_entropy(qcore::DensityMatrix(rho, 1e-9))).energy;
                 Table t;
                 t.columns = {"copies", "energy_per_copy", "thermal_floor"};
                 for (long n = 1; n <= p.integer("copies"); ++n)
                   t.add({n, battery::n_copy_passive_energy(rho, h, static_cast<int>(n)), floor});
                 return t;
               }});

  c.push_back({"qsl", "speed limits on random driven-qubit trajectories",
               {integer("trajectories", "100", 1, 100000, "number of random trajectories"),
                positive("omega", "1", "static qubit gap scale"),
                number("amplitude_max", "2", 0.0, 1e300, "largest drive amplitude"),
                positive("tau_min", "0.5", "shortest evolution time"),
                positive("tau_max", "4.5", "longest evolution time"),
                choice("start", "random", {"random", "ground"}, "initial state: Haar random or instantaneous ground"),
                integer("samples", "200", 2, 100000, "time samples per trajectory")},
               [](const Params& p, std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 std::uniform_real_distribution<double> u(0.0, 1.0);
                 const long samples = p.integer("samples");
                 Table t;
                 t.columns = {"trajectory", "actual_tau", "tau_mt", "tau_unified", "bures_angle", "mt_holds",
                              "unified_holds"};
                 for (long k = 0; k < p.integer("trajectories"); ++k) {
                   const double w = p.number("omega") * (0.5 + u(rng)), amp = p.number("amplitude_max") * u(rng),
                                nu = 3.0 * u(rng), phase = 2 * kPi * u(rng);
                   const double tau = p.number("tau_min") + (p.number("tau_max") - p.number("tau_min")) * u(rng);
                   auto h = [=](double s) {
                     return CMat(0.5 * w * qcore::pauli_z() + amp * std::cos(nu * s + phase) * qcore::pauli_x());
                   };
                   CVec psi = p.text("start") == "ground" ? CVec(qcore::hermitian_eig(h(0)).vectors.col(0))
                                                          : qcore::random_pure(2, rng);
                   std::vector<double> times;
                   std::vector<CMat> states;
                   for (long j = 0; j <= samples; ++j) {
                     const double s = tau * j / samples;
                     if (j > 0) psi = qcore::magnus4_propagator(h, tau * (j - 1) / samples, s, 4) * psi;
                     times.push_back(s);
                     states.push_back(psi * psi.adjoint());
                   }
                   auto r = battery::qsl_report(times, states, h);
                   t.add({k, r.actual_tau, r.tau_mt, r.tau_unified, r.bures_distance, r.mt_holds, r.unified_holds});
                 }
                 return t;
               }});

  const ParamSpec output_kind = choice("output", "summary", {"summary", "trace"}, "one summary row or the time series");

  c.push_back({"charge-xxz", "charging an XXZ spin-chain battery",
               {integer("n", "6", 2, 12, "number of spins"), number("b", "1", -1e300, 1e300, "cell field"),
                number("g", "0.1", -1e300, 1e300, "interaction strength"),
                number("alpha", "0.5", -1e300, 1e300, "XY anisotropy"),
                number("nu", "1", 0.0, 1e300, "power-law decay exponent"),
                choice("range", "nearest", {"nearest", "power"}, "interaction range"),
                number("omega", "1", -1e300, 1e300, "charging field"), positive("tau", "3", "charging window"),
                positive("dt", "0.01", "sample spacing"), output_kind},
               [](const Params& p, std::uint64_t) {
                 battery::XXZParams x;
                 x.n = static_cast<int>(p.integer("n"));
                 x.b = p.number("b");
                 x.g = p.number("g");
                 x.alpha = p.number("alpha");
                 x.nu = p.number("nu");
                 x.range = p.text("range") == "power" ? battery::Range::PowerLaw : battery::Range::NearestNeighbor;
                 x.omega = p.number("omega");
                 x.tau = p.number("tau");
                 x.dt = p.number("dt");
                 return charge_table(battery::charge_spins_xxz(x), x.n, p.text("output"));
               }});

  c.push_back({"charge-lmg", "charging a battery through an LMG interaction",
               {integer("n", "8", 1, 14, "number of spins"), number("lambda", "20", -1e300, 1e300, "coupling"),
                number("gamma", "-1", -1e300, 1e300, "anisotropy"), number("b", "1", -1e300, 1e300, "cell field"),
                positive("tau", "1", "charging window"), positive("dt", "0.001", "sample spacing"), output_kind},
               [](const Params& p, std::uint64_t) {
                 battery::LMGParams x;
                 x.n = static_cast<int>(p.integer("n"));
                 x.lambda = p.number("lambda");
                 x.gamma = p.number("gamma");
                 x.b = p.number("b");
                 x.tau = p.number("tau");
                 x.dt = p.number("dt");
                 return charge_table(battery::charge_lmg(x), x.n, p.text("output"));
               }});

  const std::vector<ParamSpec> dicke_params{
      integer("n", "4", 1, 64, "number of atoms"),
      integer("photons", "-1", -1, 4096, "initial photon number; -1 uses n"),
      number("lambda", "0.5", -1e300, 1e300, "atom-cavity coupling"),
      boolean("rescale", "false", "divide the coupling by sqrt(n)"),
      positive("omega", "1", "atomic frequency"),
      positive("omega_c", "1", "cavity frequency"),
      integer("cutoff", "0", 0, 4096, "photon cutoff; 0 grows it until the tail is below 1e-8"),
      positive("tau", "10", "charging window"),
      positive("dt", "0.01", "sample spacing")};
  auto dicke_of = [](const Params& p) {
    battery::DickeParams d;
    d.n = static_cast<int>(p.integer("n"));
    d.n_photons = static_cast<int>(p.integer("photons"));
    d.lambda = p.number("lambda");
    d.rescale = p.boolean("rescale");
    d.omega = p.number("omega");
    d.omega_c = p.number("omega_c");
    d.photon_cutoff = static_cast<int>(p.integer("cutoff"));
    d.tau = p.number("tau");
    d.dt = p.number("dt");
    return d;
  };

  auto with_output = dicke_params;
  with_output.push_back(output_kind);
  c.push_back({"charge-dicke", "charging atoms through a single cavity mode", with_output,
               [dicke_of](const Params& p, std::uint64_t) {
                 battery::DickeParams d = dicke_of(p);
                 return charge_table(battery::charge_dicke(d), d.n, p.text("output"));
               }});

  auto adv = dicke_params;
  adv.push_back(ParamSpec{"fraction", ParamType::Number, "0.5", 0.0, 1.0, true, {}, "target share of the capacity"});
  c.push_back({"advantage", "collective over parallel Dicke charging time at a target energy", adv,
               [dicke_of](const Params& p, std::uint64_t) {
                 battery::DickeParams d = dicke_of(p), cell = d;
                 cell.n = 1;
                 cell.n_photons = 1;
                 cell.photon_cutoff = 0;
                 auto single = battery::charge_dicke(cell);
                 auto collective = battery::charge_dicke(d);
                 Table t;
                 t.columns = {"n", "advantage"};
                 t.add({static_cast<long>(d.n),
                        battery::quantum_advantage(battery::parallel_copies(single, d.n), collective,
                                                   p.number("fraction"))});
                 return t;
               }});
  return c;
}

}  // namespace

const std::vector<Experiment>& catalog() {
  static const std::vector<Experiment> c = build_catalog();
  return c;
}

}  // namespace qtherm::cli
