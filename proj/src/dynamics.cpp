#include "spinopt/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <thread>

namespace spinopt {

namespace {

using cplx = std::complex<double>;

struct Bloch {
  double x = 0.0, y = 0.0, z = 0.0;
};

Bloch bloch_from_density(const DensityMatrix& rho) {
  Bloch r;
  r.x = 2.0 * rho(0, 1).real();
  r.y = -2.0 * rho(0, 1).imag();
  r.z = (rho(0, 0) - rho(1, 1)).real();
  return r;
}

DensityMatrix density_from_bloch(const Bloch& r) {
  DensityMatrix rho;
  rho(0, 0) = cplx(0.5 * (1.0 + r.z), 0.0);
  rho(1, 1) = cplx(0.5 * (1.0 - r.z), 0.0);
  rho(0, 1) = cplx(0.5 * r.x, -0.5 * r.y);
  rho(1, 0) = cplx(0.5 * r.x, 0.5 * r.y);
  return rho;
}

// Unitary conjugation of rho is a rotation of the Bloch vector by
// theta = dt sqrt(delta^2 + omega^2) about the unit drive axis
// (omega cos phi, omega sin phi, delta) / |.|  (Rodrigues form).
inline void advance_bin(Bloch& r, double delta, double omega, double cphi,
                        double sphi, double dt) {
  const double wtot2 = delta * delta + omega * omega;
  if (wtot2 == 0.0) return;
  const double wtot = std::sqrt(wtot2);
  const double inv = 1.0 / wtot;
  const double nx = omega * cphi * inv;
  const double ny = omega * sphi * inv;
  const double nz = delta * inv;
  const double theta = wtot * dt;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = ny * r.z - nz * r.y;
  const double cy = nz * r.x - nx * r.z;
  const double cz = nx * r.y - ny * r.x;
  const double d = (nx * r.x + ny * r.y + nz * r.z) * (1.0 - c);
  r = Bloch{r.x * c + cx * s + nx * d, r.y * c + cy * s + ny * d,
            r.z * c + cz * s + nz * d};
}

// Pulse unpacked for the inner loop: per-bin drive rate and phase factors.
struct PulseTables {
  double dt = 0.0;
  std::vector<double> w0, cphi, sphi;

  std::size_t n_bins() const { return w0.size(); }
};

PulseTables make_tables(const Waveform& w) {
  validate(w);
  PulseTables t;
  t.dt = w.dt;
  const std::size_t n = w.n_bins();
  t.w0.resize(n);
  t.cphi.resize(n);
  t.sphi.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    t.w0[k] = w.omega1 * w.f[k];
    t.cphi[k] = std::cos(w.phi[k]);
    t.sphi[k] = std::sin(w.phi[k]);
  }
  return t;
}

// Per-bin noise values held at the bin's left edge, advanced by the exact
// update between bins. Draws nothing when the noise is absent or silent.
struct OuChain {
  bool off = true;
  bool stat = false;
  double sigma = 0.0;
  double decay = 0.0, innov = 0.0;
  double x = 0.0;
  bool started = false;

  OuChain(const OuParams* p, double dt) {
    if (p == nullptr || p->sigma == 0.0) return;
    validate(*p);
    off = false;
    sigma = p->sigma;
    stat = p->static_noise();
    if (!stat) {
      decay = std::exp(-dt / p->tau);
      innov = p->sigma * std::sqrt(-std::expm1(-2.0 * dt / p->tau));
    }
  }

  double next(RngStream& rng) {
    if (off) return 0.0;
    if (!started) {
      started = true;
      x = sigma * rng.normal();
      return x;
    }
    if (stat) return x;
    x = x * decay + innov * rng.normal();
    return x;
  }
};

Bloch run_sample(const PulseTables& tb, const OuParams& delta_params,
                 const OuParams* eps_params, RngStream& delta_rng,
                 RngStream& eps_rng, Bloch r, double* z_out) {
  OuChain dchain(&delta_params, tb.dt);
  OuChain echain(eps_params, tb.dt);
  if (z_out != nullptr) z_out[0] = r.z;
  const std::size_t n = tb.n_bins();
  for (std::size_t k = 0; k < n; ++k) {
    const double delta = dchain.next(delta_rng);
    const double eps = echain.next(eps_rng);
    advance_bin(r, delta, tb.w0[k] * (1.0 + eps), tb.cphi[k], tb.sphi[k],
                tb.dt);
    if (z_out != nullptr) z_out[k + 1] = r.z;
  }
  return r;
}

void parallel_over(std::size_t n, int jobs,
                   const std::function<void(std::size_t, std::size_t)>& fn) {
  std::size_t workers;
  if (jobs <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    workers = hw == 0 ? 1 : hw;
  } else {
    workers = static_cast<std::size_t>(jobs);
  }
  workers = std::min(workers, n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

void mean_and_std(const std::vector<double>& v, double& mean, double& sd) {
  const std::size_t n = v.size();
  mean = n == 0 ? 0.0 : pairwise_sum(v.data(), n) / static_cast<double>(n);
  if (n < 2) {
    sd = 0.0;
    return;
  }
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  sd = std::sqrt(acc / static_cast<double>(n - 1));
}

double pure_upper_fidelity(double z) {
  return std::sqrt(std::max(0.0, 0.5 * (1.0 + z)));
}

}  // namespace

DensityMatrix ket0_density() {
  DensityMatrix rho = DensityMatrix::Zero();
  rho(1, 1) = 1.0;
  return rho;
}

DensityMatrix ket1_density() {
  DensityMatrix rho = DensityMatrix::Zero();
  rho(0, 0) = 1.0;
  return rho;
}

void validate_density(const DensityMatrix& rho, double tol) {
  const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (!(herm <= tol)) throw std::invalid_argument("matrix is not Hermitian");
  const cplx tr = rho.trace();
  if (!(std::abs(tr - 1.0) <= tol)) {
    throw std::invalid_argument("matrix trace is not 1");
  }
  const double det = rho.determinant().real();
  const double half = 0.5 * tr.real();
  const double disc = std::sqrt(std::max(0.0, half * half - det));
  const double lambda_min = half - disc;
  if (!(lambda_min >= -std::max(tol, 1e-10))) {
    throw std::invalid_argument("matrix has a negative eigenvalue");
  }
}

Eigen::Matrix2cd bin_propagator(double delta, double omega_eff, double phi,
                                double dt) {
  const double wtot2 = delta * delta + omega_eff * omega_eff;
  if (wtot2 == 0.0) return Eigen::Matrix2cd::Identity();
  const double wtot = std::sqrt(wtot2);
  const double inv = 1.0 / wtot;
  const double nx = omega_eff * std::cos(phi) * inv;
  const double ny = omega_eff * std::sin(phi) * inv;
  const double nz = delta * inv;
  const double half = 0.5 * wtot * dt;
  const double c = std::cos(half);
  const double s = std::sin(half);
  Eigen::Matrix2cd u;
  u(0, 0) = cplx(c, -s * nz);
  u(0, 1) = cplx(-s * ny, -s * nx);
  u(1, 0) = cplx(s * ny, -s * nx);
  u(1, 1) = cplx(c, s * nz);
  return u;
}

std::vector<DensityMatrix> evolve_sample(const Waveform& pulse,
                                         const NoiseTrace& delta_trace,
                                         const NoiseTrace* eps_trace,
                                         const DensityMatrix& initial) {
  const PulseTables tb = make_tables(pulse);
  const std::size_t n = tb.n_bins();
  const auto check = [n](const NoiseTrace& tr, const char* what) {
    if (tr.values.size() != n && tr.values.size() != n + 1) {
      throw std::invalid_argument(std::string(what) +
                                  " trace does not match the pulse bins");
    }
    if (!tr.times.empty() && tr.times.size() != tr.values.size()) {
      throw std::invalid_argument(std::string(what) +
                                  " trace times/values lengths differ");
    }
  };
  check(delta_trace, "detuning");
  if (eps_trace != nullptr) check(*eps_trace, "amplitude");
  validate_density(initial);

  Bloch r = bloch_from_density(initial);
  std::vector<DensityMatrix> traj;
  traj.reserve(n + 1);
  traj.push_back(density_from_bloch(r));
  for (std::size_t k = 0; k < n; ++k) {
    const double delta = delta_trace.values[k];
    const double eps = eps_trace != nullptr ? eps_trace->values[k] : 0.0;
    advance_bin(r, delta, tb.w0[k] * (1.0 + eps), tb.cphi[k], tb.sphi[k],
                tb.dt);
    traj.push_back(density_from_bloch(r));
  }
  return traj;
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& target) {
  const double cross = (rho * target).trace().real();
  const double dr = std::max(0.0, rho.determinant().real());
  const double ds = std::max(0.0, target.determinant().real());
  const double f2 = cross + 2.0 * std::sqrt(dr * ds);
  return std::min(1.0, std::sqrt(std::max(0.0, f2)));
}

double state_infidelity(const std::vector<DensityMatrix>& finals,
                        const DensityMatrix& target) {
  if (finals.empty()) throw std::invalid_argument("no states to score");
  validate_density(target);
  std::vector<double> f(finals.size());
  for (std::size_t j = 0; j < finals.size(); ++j) {
    f[j] = fidelity(finals[j], target);
  }
  const double mean =
      pairwise_sum(f.data(), f.size()) / static_cast<double>(f.size());
  return std::clamp(1.0 - mean, 0.0, 1.0);
}

EnsembleResult ensemble_average(const Waveform& pulse,
                                const SimulationConfig& cfg,
                                const EnsembleOptions& opt) {
  if (cfg.n_sample < 1 || cfg.n_rep < 1) {
    throw std::invalid_argument("need at least one sample and one repetition");
  }
  validate_density(cfg.initial);
  const PulseTables tb = make_tables(pulse);
  const std::size_t n_bins = tb.n_bins();
  const std::size_t n_t = n_bins + 1;
  const std::size_t ns = cfg.n_sample;
  const bool record = opt.record_trajectory || opt.retain_rep_curves;
  const Bloch r0 = bloch_from_density(cfg.initial);
  const OuParams* ep = cfg.eps_params ? &*cfg.eps_params : nullptr;

  EnsembleResult out;
  if (record) {
    out.times.resize(n_t);
    for (std::size_t t = 0; t < n_t; ++t) {
      out.times[t] = static_cast<double>(t) * tb.dt;
    }
  }

  std::vector<double> zbuf;  // sample-major: zbuf[s * n_t + t]
  if (record) zbuf.resize(ns * n_t);
  std::vector<double> fbuf;
  if (opt.target != nullptr) fbuf.resize(ns);
  std::vector<Bloch> finals;
  if (opt.retain_final_states || opt.target != nullptr) finals.resize(ns);
  std::vector<std::vector<double>> rep_curves(record ? cfg.n_rep : 0);
  std::vector<double> scratch(ns);

  for (std::size_t r = 0; r < cfg.n_rep; ++r) {
    parallel_over(ns, cfg.jobs, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t s = lo; s < hi; ++s) {
        RngStream dr(cfg.seed, {stream_ctx::ensemble, r, s, kKindDetuning});
        RngStream er(cfg.seed, {stream_ctx::ensemble, r, s, kKindAmplitude});
        double* zcol = record ? zbuf.data() + s * n_t : nullptr;
        const Bloch fin =
            run_sample(tb, cfg.delta_params, ep, dr, er, r0, zcol);
        if (!finals.empty()) finals[s] = fin;
      }
    });

    if (record) {
      auto& curve = rep_curves[r];
      curve.resize(n_t);
      for (std::size_t t = 0; t < n_t; ++t) {
        for (std::size_t s = 0; s < ns; ++s) scratch[s] = zbuf[s * n_t + t];
        curve[t] = pairwise_sum(scratch.data(), ns) / static_cast<double>(ns);
      }
    }
    if (opt.target != nullptr) {
      for (std::size_t s = 0; s < ns; ++s) {
        fbuf[s] = fidelity(density_from_bloch(finals[s]), *opt.target);
      }
      const double mean_f =
          pairwise_sum(fbuf.data(), ns) / static_cast<double>(ns);
      out.j_per_rep.push_back(std::clamp(1.0 - mean_f, 0.0, 1.0));
    }
    if (opt.retain_final_states && r == cfg.n_rep - 1) {
      out.final_states.resize(ns);
      for (std::size_t s = 0; s < ns; ++s) {
        out.final_states[s] = density_from_bloch(finals[s]);
      }
    }
  }

  if (record) {
    out.mean_sigma_z.resize(n_t);
    out.std_sigma_z.resize(n_t);
    std::vector<double> reps(cfg.n_rep);
    for (std::size_t t = 0; t < n_t; ++t) {
      for (std::size_t r = 0; r < cfg.n_rep; ++r) reps[r] = rep_curves[r][t];
      mean_and_std(reps, out.mean_sigma_z[t], out.std_sigma_z[t]);
    }
  }
  if (opt.target != nullptr) {
    mean_and_std(out.j_per_rep, out.j_mean, out.j_std);
  }
  if (opt.retain_rep_curves) {
    out.rep_curves = std::move(rep_curves);
  }
  return out;
}

double inversion_infidelity_set(const Waveform& pulse,
                                const SimulationConfig& sim, std::uint64_t ctx,
                                std::uint64_t key) {
  if (sim.n_sample < 1) throw std::invalid_argument("need at least one sample");
  validate_density(sim.initial);
  const PulseTables tb = make_tables(pulse);
  const std::size_t ns = sim.n_sample;
  const Bloch r0 = bloch_from_density(sim.initial);
  const OuParams* ep = sim.eps_params ? &*sim.eps_params : nullptr;

  std::vector<double> f(ns);
  parallel_over(ns, sim.jobs, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      RngStream dr(sim.seed, {ctx, key, s, kKindDetuning});
      RngStream er(sim.seed, {ctx, key, s, kKindAmplitude});
      const Bloch fin =
          run_sample(tb, sim.delta_params, ep, dr, er, r0, nullptr);
      f[s] = pure_upper_fidelity(fin.z);
    }
  });
  const double mean_f = pairwise_sum(f.data(), ns) / static_cast<double>(ns);
  return std::clamp(1.0 - mean_f, 0.0, 1.0);
}

double rabi_analytic(double omega1, double delta, double t) {
  const double w2 = omega1 * omega1 + delta * delta;
  if (w2 == 0.0) return -1.0;
  const double half = 0.5 * std::sqrt(w2) * t;
  const double s = std::sin(half);
  const double c = std::cos(half);
  return ((omega1 * omega1 - delta * delta) / w2) * s * s - c * c;
}

namespace {

// Shared machinery for the free-evolution and echo curves. The detuning
// phase integral S(t) = sum delta_k h is accumulated with the exact OU
// update on a grid refined so that h <= tau / 5; the coherence read-out per
// repetition is |mean_s exp(-i phase_s)|.
CoherenceCurve phase_curve(const SimulationConfig& cfg, double t_max,
                           std::size_t n_points, bool echo) {
  if (n_points == 0) throw std::invalid_argument("need at least one point");
  if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  if (cfg.n_sample < 1 || cfg.n_rep < 1) {
    throw std::invalid_argument("need at least one sample and one repetition");
  }
  validate(cfg.delta_params);

  const double step = t_max / static_cast<double>(n_points);
  const double seg = echo ? 0.5 * step : step;
  std::size_t refine = 1;
  if (!cfg.delta_params.static_noise() && cfg.delta_params.sigma != 0.0) {
    const double target = cfg.delta_params.tau / 5.0;
    refine = static_cast<std::size_t>(std::max(1.0, std::ceil(seg / target)));
    // The echo subtracts two strongly correlated phase sums, cancelling the
    // leading order; the leftover variance from a piecewise-frozen walk only
    // converges ~ 1/refine^2 (a single step per arm overshoots it by half).
    // Free evolution has no such cancellation and needs no floor.
    if (echo) refine = std::max<std::size_t>(refine, 8);
  }
  const double h = seg / static_cast<double>(refine);
  const std::size_t marks = echo ? 2 * n_points : n_points;
  const std::size_t n_out = n_points + 1;
  const std::size_t ns = cfg.n_sample;

  std::vector<double> re(n_out * ns), im(n_out * ns);
  std::vector<double> curve_r(n_out), scr(ns), sci(ns);
  std::vector<std::vector<double>> rep_curves(cfg.n_rep);

  for (std::size_t r = 0; r < cfg.n_rep; ++r) {
    parallel_over(ns, cfg.jobs, [&](std::size_t lo, std::size_t hi) {
      std::vector<double> s_at_mark(marks + 1);
      for (std::size_t s = lo; s < hi; ++s) {
        RngStream dr(cfg.seed, {stream_ctx::ensemble, r, s, kKindDetuning});
        OuChain chain(&cfg.delta_params, h);
        double acc = 0.0;
        s_at_mark[0] = 0.0;
        for (std::size_t mrk = 1; mrk <= marks; ++mrk) {
          for (std::size_t k = 0; k < refine; ++k) {
            acc += chain.next(dr) * h;
          }
          s_at_mark[mrk] = acc;
        }
        for (std::size_t i = 0; i < n_out; ++i) {
          const double phase = echo
                                   ? s_at_mark[2 * i] - 2.0 * s_at_mark[i]
                                   : s_at_mark[i];
          re[i * ns + s] = std::cos(phase);
          im[i * ns + s] = std::sin(phase);
        }
      }
    });
    auto& curve = rep_curves[r];
    curve.resize(n_out);
    for (std::size_t i = 0; i < n_out; ++i) {
      for (std::size_t s = 0; s < ns; ++s) {
        scr[s] = re[i * ns + s];
        sci[s] = im[i * ns + s];
      }
      const double mr = pairwise_sum(scr.data(), ns) / static_cast<double>(ns);
      const double mi = pairwise_sum(sci.data(), ns) / static_cast<double>(ns);
      curve[i] = std::hypot(mr, mi);
    }
  }

  CoherenceCurve out;
  out.times.resize(n_out);
  out.mean.resize(n_out);
  out.stddev.resize(n_out);
  std::vector<double> reps(cfg.n_rep);
  for (std::size_t i = 0; i < n_out; ++i) {
    out.times[i] = static_cast<double>(i) * step;
    for (std::size_t r = 0; r < cfg.n_rep; ++r) reps[r] = rep_curves[r][i];
    mean_and_std(reps, out.mean[i], out.stddev[i]);
  }
  return out;
}

}  // namespace

CoherenceCurve simulate_ramsey(const SimulationConfig& cfg, double t_max,
                               std::size_t n_points) {
  return phase_curve(cfg, t_max, n_points, false);
}

CoherenceCurve simulate_hahn(const SimulationConfig& cfg, double t_max,
                             std::size_t n_points) {
  return phase_curve(cfg, t_max, n_points, true);
}

std::vector<DominanceRow> noise_dominance_study(
    const std::vector<DominancePanel>& panels, const SimulationConfig& cfg) {
  std::vector<DominanceRow> rows;
  for (const auto& panel : panels) {
    if (!(panel.duration > 0.0) || !(panel.rotation_phase > 0.0)) {
      throw std::invalid_argument("panel duration and phase must be positive");
    }
    const double omega1 = panel.rotation_phase / panel.duration;
    const std::size_t bins = std::max<std::size_t>(
        50, static_cast<std::size_t>(std::llround(panel.duration / 0.01)));
    const Waveform pulse =
        rectangular_pulse(omega1, 1.0, 0.5 * kPi, panel.duration, bins);

    for (const char* which : {"delta", "eps", "both"}) {
      SimulationConfig run = cfg;
      if (std::string(which) == "delta") run.eps_params.reset();
      if (std::string(which) == "eps") run.delta_params.sigma = 0.0;

      EnsembleOptions opt;
      opt.record_trajectory = true;
      opt.retain_rep_curves = true;
      const EnsembleResult res = ensemble_average(pulse, run, opt);

      DominanceRow row;
      row.panel = panel.name;
      row.duration = panel.duration;
      row.rotation_phase = panel.rotation_phase;
      row.noise = which;
      std::vector<double> devs(res.rep_curves.size());
      for (std::size_t r = 0; r < res.rep_curves.size(); ++r) {
        double d = 0.0;
        for (std::size_t t = 0; t < res.times.size(); ++t) {
          const double ideal = -std::cos(omega1 * res.times[t]);
          d = std::max(d, std::abs(res.rep_curves[r][t] - ideal));
        }
        devs[r] = d;
      }
      double dev_mean_curve = 0.0;
      for (std::size_t t = 0; t < res.times.size(); ++t) {
        const double ideal = -std::cos(omega1 * res.times[t]);
        dev_mean_curve =
            std::max(dev_mean_curve, std::abs(res.mean_sigma_z[t] - ideal));
      }
      row.dev_mean_curve = dev_mean_curve;
      mean_and_std(devs, row.dev_rep_mean, row.dev_rep_std);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace spinopt
