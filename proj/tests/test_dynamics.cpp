#include "doctest.h"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "spinopt/dynamics.hpp"
#include "spinopt/noise.hpp"
#include "spinopt/pulse.hpp"
#include "spinopt/rng.hpp"
#include "spinopt/units.hpp"

using namespace spinopt;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

NoiseTrace zero_trace(std::size_t n, double dt) {
  NoiseTrace tr;
  tr.times.resize(n);
  tr.values.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) tr.times[k] = double(k) * dt;
  return tr;
}

double final_sigma_z(const std::vector<DensityMatrix>& states) {
  const auto& rho = states.back();
  return (rho(0, 0) - rho(1, 1)).real();
}

DensityMatrix bloch_state(double x, double y, double z) {
  DensityMatrix rho;
  rho(0, 0) = 0.5 * (1.0 + z);
  rho(1, 1) = 0.5 * (1.0 - z);
  rho(0, 1) = std::complex<double>(0.5 * x, -0.5 * y);
  rho(1, 0) = std::conj(rho(0, 1));
  return rho;
}

Waveform wiggly_pulse() {
  Waveform w;
  w.omega1 = kTwoPi;
  w.dt = 0.025;
  w.f.resize(20);
  w.phi.resize(20);
  for (std::size_t k = 0; k < 20; ++k) {
    w.f[k] = 0.5 + 0.4 * std::sin(double(k));
    w.phi[k] = std::fmod(0.3 * double(k), kTwoPi);
  }
  return w;
}

}  // namespace

TEST_CASE("basis states and density validation") {
  const auto up = ket1_density();
  const auto down = ket0_density();
  CHECK(up(0, 0).real() == 1.0);
  CHECK(down(1, 1).real() == 1.0);
  CHECK_NOTHROW(validate_density(up));
  CHECK_NOTHROW(validate_density(down));
  CHECK_NOTHROW(validate_density(bloch_state(0.6, 0.0, 0.8)));

  DensityMatrix bad = up;
  bad(0, 1) = 0.3;  // not hermitian
  CHECK_THROWS_AS(validate_density(bad), std::invalid_argument);
  bad = up * 1.2;  // trace off
  CHECK_THROWS_AS(validate_density(bad), std::invalid_argument);
  bad.setZero();
  bad(0, 0) = 1.2;  // negative eigenvalue
  bad(1, 1) = -0.2;
  CHECK_THROWS_AS(validate_density(bad), std::invalid_argument);
}

TEST_CASE("bin propagators are unitary and compose") {
  RngStream rng(17, {stream_ctx::test, 30});
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  for (int i = 0; i < 500; ++i) {
    const double delta = rng.uniform(-30.0, 30.0);
    const double omega = rng.uniform(0.0, 30.0);
    const double phi = rng.uniform(0.0, kTwoPi);
    const double dt = rng.uniform(1e-4, 0.5);
    const auto u = bin_propagator(delta, omega, phi, dt);
    CHECK((u.adjoint() * u - id).cwiseAbs().maxCoeff() <= 1e-12);
    const auto whole = bin_propagator(delta, omega, phi, 2.0 * dt);
    CHECK((u * u - whole).cwiseAbs().maxCoeff() <= 1e-12);
  }
  // zero Hamiltonian is the identity
  CHECK((bin_propagator(0.0, 0.0, 0.0, 0.1) - id).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("resonant pi pulse inverts the ground state") {
  const double T = 0.5;
  const auto pulse = rectangular_pulse(kPi / T, 1.0, kPi / 2, T, 1);
  const auto states =
      evolve_sample(pulse, zero_trace(1, T), nullptr, ket0_density());
  REQUIRE(states.size() == 2);
  CHECK((states.back() - ket1_density()).cwiseAbs().maxCoeff() <= 1e-12);

  // boundary-grid trace (n + 1 values) is accepted, last value ignored
  const auto states2 =
      evolve_sample(pulse, zero_trace(2, T), nullptr, ket0_density());
  CHECK((states2.back() - states.back()).cwiseAbs().maxCoeff() == 0.0);

  NoiseTrace bad = zero_trace(3, T);
  CHECK_THROWS_AS(evolve_sample(pulse, bad, nullptr, ket0_density()),
                  std::invalid_argument);
}

TEST_CASE("clean constant drive matches the analytic inversion curve") {
  RngStream rng(19, {stream_ctx::test, 31});
  for (int i = 0; i < 100; ++i) {
    const double omega = rng.uniform(1.0, 30.0);
    const double delta = rng.uniform(-20.0, 20.0);
    const double t = rng.uniform(0.05, 2.0);
    const auto pulse = rectangular_pulse(omega, 1.0, 0.0, t, 1);
    NoiseTrace tr = zero_trace(1, t);
    tr.values[0] = delta;
    const auto states = evolve_sample(pulse, tr, nullptr, ket0_density());
    CHECK(final_sigma_z(states) ==
          doctest::Approx(rabi_analytic(omega, delta, t)).epsilon(1e-9));
  }
  // splitting the same constant drive into many bins is exact at boundaries
  const double omega = 9.7, delta = -4.2, t = 1.3;
  const auto pulse = rectangular_pulse(omega, 1.0, 0.0, t, 97);
  NoiseTrace tr = zero_trace(97, t / 97.0);
  for (auto& v : tr.values) v = delta;
  const auto states = evolve_sample(pulse, tr, nullptr, ket0_density());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const double z = (states[k](0, 0) - states[k](1, 1)).real();
    const double tk = t * double(k) / 97.0;
    CHECK(z == doctest::Approx(rabi_analytic(omega, delta, tk)).epsilon(1e-9));
  }
}

TEST_CASE("unitary evolution preserves trace and purity") {
  RngStream rng(23, {stream_ctx::test, 32});
  Waveform pulse;
  pulse.omega1 = kTwoPi;
  pulse.dt = 0.01;
  pulse.f.resize(200);
  pulse.phi.resize(200);
  for (std::size_t k = 0; k < 200; ++k) {
    pulse.f[k] = rng.uniform(-3.0, 3.0);
    pulse.phi[k] = rng.uniform(0.0, kTwoPi);
  }
  const OuParams p{12.0, 0.3};
  RngStream noise_rng(23, {stream_ctx::test, 33});
  NoiseTrace tr;
  tr.times.resize(200);
  for (std::size_t k = 0; k < 200; ++k) tr.times[k] = 0.01 * double(k);
  tr.values = ou_sample_trace(p, 200, 0.01, noise_rng);

  const auto states = evolve_sample(pulse, tr, nullptr, ket0_density());
  REQUIRE(states.size() == 201);
  for (const auto& rho : states) {
    CHECK_NOTHROW(validate_density(rho, 1e-9));
    const double purity = (rho * rho).trace().real();
    CHECK(purity == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(rho.trace().real() - 1.0) <= 1e-12);
  }
}

TEST_CASE("fidelity closed form") {
  const auto up = ket1_density();
  CHECK(fidelity(up, up) == doctest::Approx(1.0).epsilon(1e-14));
  const auto mixed = (DensityMatrix() << 0.5, 0, 0, 0.5).finished();
  CHECK(fidelity(mixed, up) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

  RngStream rng(29, {stream_ctx::test, 34});
  for (int i = 0; i < 200; ++i) {
    double x = rng.uniform(-1.0, 1.0), y = rng.uniform(-1.0, 1.0),
           z = rng.uniform(-1.0, 1.0);
    const double r = std::sqrt(x * x + y * y + z * z);
    if (r > 0.99) {
      x *= 0.99 / r;
      y *= 0.99 / r;
      z *= 0.99 / r;
    }
    const auto rho = bloch_state(x, y, z);
    // pure-target reduction
    CHECK(fidelity(rho, up) ==
          doctest::Approx(std::sqrt(rho(0, 0).real())).epsilon(1e-10));
    const auto sigma = bloch_state(-0.3 * x, 0.5 * y, 0.2);
    CHECK(fidelity(rho, sigma) ==
          doctest::Approx(fidelity(sigma, rho)).epsilon(1e-12));
    CHECK(fidelity(rho, sigma) <= 1.0);
    CHECK(fidelity(rho, sigma) >= 0.0);
  }
}

TEST_CASE("set infidelity") {
  const auto up = ket1_density();
  const auto mixed = (DensityMatrix() << 0.5, 0, 0, 0.5).finished();
  std::vector<DensityMatrix> finals(4, mixed);
  CHECK(state_infidelity(finals, up) ==
        doctest::Approx(1.0 - std::sqrt(0.5)).epsilon(1e-12));
  finals.assign(3, up);
  CHECK(state_infidelity(finals, up) == doctest::Approx(0.0));
  CHECK_THROWS_AS(state_infidelity({}, up), std::invalid_argument);
}

TEST_CASE("ensemble statistics are schedule-invariant and reproducible") {
  const auto pulse = wiggly_pulse();
  const auto tgt = ket1_density();
  SimulationConfig cfg;
  cfg.delta_params = OuParams{5.0, 0.5};
  cfg.eps_params = OuParams{0.05, kInf};
  cfg.n_sample = 8;
  cfg.n_rep = 3;
  cfg.seed = 77;
  EnsembleOptions opt;
  opt.retain_rep_curves = true;
  opt.target = &tgt;

  cfg.jobs = 1;
  const auto a = ensemble_average(pulse, cfg, opt);
  const auto b = ensemble_average(pulse, cfg, opt);
  cfg.jobs = 3;
  const auto c = ensemble_average(pulse, cfg, opt);

  REQUIRE(a.times.size() == pulse.n_bins() + 1);
  REQUIRE(a.mean_sigma_z.size() == a.times.size());
  REQUIRE(a.rep_curves.size() == cfg.n_rep);
  REQUIRE(a.j_per_rep.size() == cfg.n_rep);
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    CHECK(a.times[k] == doctest::Approx(double(k) * pulse.dt).epsilon(1e-14));
    CHECK(a.mean_sigma_z[k] == b.mean_sigma_z[k]);
    CHECK(a.mean_sigma_z[k] == c.mean_sigma_z[k]);
    CHECK(a.std_sigma_z[k] == c.std_sigma_z[k]);
  }
  for (std::size_t r = 0; r < cfg.n_rep; ++r) {
    CHECK(a.j_per_rep[r] == c.j_per_rep[r]);
    for (std::size_t k = 0; k < a.times.size(); ++k)
      CHECK(a.rep_curves[r][k] == c.rep_curves[r][k]);
  }
  CHECK(a.j_mean == c.j_mean);
  CHECK(a.j_std == c.j_std);
}

TEST_CASE("single-sample ensemble agrees with direct propagation") {
  const auto pulse = wiggly_pulse();
  SimulationConfig cfg;
  cfg.delta_params = OuParams{5.0, 0.5};
  cfg.eps_params = OuParams{0.05, kInf};
  cfg.n_sample = 1;
  cfg.n_rep = 1;
  cfg.seed = 31;
  EnsembleOptions opt;
  const auto res = ensemble_average(pulse, cfg, opt);

  const std::size_t n = pulse.n_bins();
  RngStream dstream(cfg.seed, {stream_ctx::ensemble, 0, 0, kKindDetuning});
  RngStream estream(cfg.seed, {stream_ctx::ensemble, 0, 0, kKindAmplitude});
  NoiseTrace dtr = zero_trace(n, pulse.dt);
  dtr.values = ou_sample_trace(cfg.delta_params, n, pulse.dt, dstream);
  NoiseTrace etr = zero_trace(n, pulse.dt);
  etr.values = ou_sample_trace(*cfg.eps_params, n, pulse.dt, estream);

  const auto states = evolve_sample(pulse, dtr, &etr, ket0_density());
  REQUIRE(res.mean_sigma_z.size() == states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const double z = (states[k](0, 0) - states[k](1, 1)).real();
    CHECK(res.mean_sigma_z[k] == doctest::Approx(z).epsilon(1e-10));
  }
}

TEST_CASE("noise-free ensemble of a pi pulse reaches the target") {
  const double T = 0.5;
  const auto pulse = rectangular_pulse(kPi / T, 1.0, kPi / 2, T, 50);
  const auto tgt = ket1_density();
  SimulationConfig cfg;
  cfg.delta_params = OuParams{0.0, 1.0};
  cfg.eps_params.reset();
  cfg.n_sample = 4;
  cfg.n_rep = 3;
  EnsembleOptions opt;
  opt.record_trajectory = false;
  opt.target = &tgt;
  const auto res = ensemble_average(pulse, cfg, opt);
  CHECK(res.j_mean <= 1e-12);
  CHECK(res.j_std <= 1e-12);

  CHECK(inversion_infidelity_set(pulse, cfg, stream_ctx::test, 0) <= 1e-12);
}

TEST_CASE("realization-set infidelity is keyed deterministically") {
  const auto pulse = wiggly_pulse();
  SimulationConfig cfg;
  cfg.delta_params = OuParams{8.0, 0.2};
  cfg.eps_params = OuParams{0.05, kInf};
  cfg.n_sample = 16;
  const double j1 = inversion_infidelity_set(pulse, cfg, stream_ctx::test, 3);
  const double j2 = inversion_infidelity_set(pulse, cfg, stream_ctx::test, 3);
  const double j3 = inversion_infidelity_set(pulse, cfg, stream_ctx::test, 4);
  CHECK(j1 == j2);
  CHECK(j1 != j3);
  CHECK(j1 > 0.0);
  CHECK(j1 < 1.0);
}

TEST_CASE("analytic inversion curve") {
  CHECK(rabi_analytic(kTwoPi, 0.0, 0.0) == doctest::Approx(-1.0));
  CHECK(rabi_analytic(kTwoPi, 0.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rabi_analytic(0.0, 0.0, 1.0) == -1.0);
  const double om = 7.0;
  const double t = kPi / (std::sqrt(2.0) * om);
  CHECK(rabi_analytic(om, om, t) == doctest::Approx(0.0).epsilon(1e-12));
  // detuned drive never fully inverts
  double peak = -1.0;
  for (int i = 0; i <= 400; ++i)
    peak = std::max(peak, rabi_analytic(om, 3.0, i * 0.005));
  CHECK(peak < 1.0);
  CHECK(peak == doctest::Approx(2.0 * om * om / (om * om + 9.0) - 1.0).epsilon(1e-3));
}

TEST_CASE("free and echo coherence track their envelopes") {
  SimulationConfig cfg;
  cfg.delta_params = predict_from_tau(1.0, 0.1).params;
  cfg.n_sample = 300;
  cfg.n_rep = 8;
  cfg.seed = 5;
  const double t_max = 0.3;
  const auto ram = simulate_ramsey(cfg, t_max, 40);
  const auto hahn = simulate_hahn(cfg, t_max, 40);
  REQUIRE(ram.times.size() == 41);
  REQUIRE(hahn.times.size() == 41);
  CHECK(ram.times.front() == 0.0);
  CHECK(ram.times.back() == doctest::Approx(t_max));
  CHECK(ram.mean[0] == doctest::Approx(1.0));
  CHECK(hahn.mean[0] == doctest::Approx(1.0));

  for (std::size_t i = 0; i <= 40; ++i) {
    const double t = ram.times[i];
    CHECK(std::abs(ram.mean[i] - free_coherence(cfg.delta_params, t)) <=
          3.0 * ram.stddev[i] + 0.02);
    CHECK(std::abs(hahn.mean[i] - hahn_coherence(cfg.delta_params, t)) <=
          3.0 * hahn.stddev[i] + 0.02);
    CHECK(hahn.mean[i] >= ram.mean[i] - 3.0 * (ram.stddev[i] + hahn.stddev[i]) - 0.02);
  }
  CHECK(ram.mean.back() < 0.5);

  // zero noise: coherence stays exactly 1
  SimulationConfig clean = cfg;
  clean.delta_params = OuParams{0.0, 1.0};
  clean.n_sample = 4;
  clean.n_rep = 2;
  const auto flat = simulate_ramsey(clean, 1.0, 10);
  for (double m : flat.mean) CHECK(m == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("short weak pulses are noise-robust, long or strong ones are not") {
  SimulationConfig cfg;
  cfg.delta_params = predict_from_tau(0.1, 0.1).params;
  cfg.eps_params = OuParams{0.05, kInf};
  cfg.n_sample = 150;
  cfg.n_rep = 5;
  cfg.seed = 9;
  const std::vector<DominancePanel> panels{
      {"fast_many_cycles", 0.05, 6.0 * kPi},
      {"slow_pi", 1.0, kPi / 2},
  };
  const auto rows = noise_dominance_study(panels, cfg);
  REQUIRE(rows.size() == 6);

  auto find = [&](const std::string& panel, const std::string& noise) {
    for (const auto& r : rows)
      if (r.panel == panel && r.noise == noise) return r;
    throw std::runtime_error("row missing");
  };
  // many cycles in a short window: amplitude noise dominates
  CHECK(find("fast_many_cycles", "eps").dev_mean_curve >
        4.0 * find("fast_many_cycles", "delta").dev_mean_curve);
  // slow small rotation: detuning noise dominates
  CHECK(find("slow_pi", "delta").dev_mean_curve >
        10.0 * find("slow_pi", "eps").dev_mean_curve);
  for (const auto& r : rows) {
    CHECK(r.dev_mean_curve >= 0.0);
    CHECK(r.dev_rep_std >= 0.0);
    // the mean curve cannot deviate more than repetitions do on average
    CHECK(r.dev_rep_mean + 1e-9 >= r.dev_mean_curve);
  }
}
