#include "spinopt/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "spinopt/io.hpp"

namespace spinopt {

namespace {

constexpr double kInfTau = std::numeric_limits<double>::infinity();

std::uint64_t code_key(const std::string& code) {
  std::uint64_t k = 0;
  for (char c : code) k = k * 131 + static_cast<unsigned char>(c);
  return k;
}

std::string tau_label(double tau) { return io::fmt_g(tau); }

nlohmann::json panels_json(const std::vector<DominancePanel>& panels) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : panels) {
    arr.push_back({{"name", p.name},
                   {"duration_us", p.duration},
                   {"rotation_phase_rad", p.rotation_phase}});
  }
  return arr;
}

nlohmann::json config_json(const HarnessConfig& cfg) {
  return {{"profile",
           {{"name", cfg.profile.name},
            {"n_sample", cfg.profile.n_sample},
            {"n_rep", cfg.profile.n_rep},
            {"budget", cfg.profile.budget}}},
          {"t2_star_us", cfg.t2_star},
          {"tau_rows_us", cfg.tau_rows},
          {"omega1_rad_per_us", cfg.omega1},
          {"pulse_duration_us", cfg.pulse_duration},
          {"pulse_bins", cfg.pulse_bins},
          {"pulse_phi_rad", cfg.pulse_phi},
          {"narrow_duration_us", cfg.narrow_duration},
          {"narrow_bins", cfg.narrow_bins},
          {"narrow_f", cfg.narrow_f},
          {"eps_sigma", cfg.eps_sigma},
          {"eps_enabled", cfg.eps_enabled},
          {"delta_sigma_override", cfg.delta_sigma_override},
          {"rabi_periods", cfg.rabi_periods},
          {"dominance_tau_us", cfg.dominance_tau},
          {"dominance_t2_star_us", cfg.dominance_t2_star},
          {"dominance_panels", panels_json(cfg.dominance_panels)},
          {"seed", cfg.seed},
          {"jobs", cfg.jobs}};
}

nlohmann::json base_meta(const RunContext& ctx, const std::string& command) {
  return {{"tool", "spinopt"},
          {"command", command},
          {"seed", ctx.cfg.seed},
          {"config", config_json(ctx.cfg)}};
}

}  // namespace

Profile paper_profile() { return Profile{"paper", 1500, 100, 2000}; }

Profile ci_profile() { return Profile{"ci", 200, 10, 400}; }

Profile profile_by_name(const std::string& name) {
  if (name == "paper") return paper_profile();
  if (name == "ci") return ci_profile();
  throw std::invalid_argument("unknown profile '" + name + "'");
}

std::vector<DominancePanel> default_dominance_panels() {
  return {{"a", 0.01, 0.5 * kPi},
          {"b", 0.05, 6.0 * kPi},
          {"c", 1.0, 0.5 * kPi},
          {"d", 1.0, 6.0 * kPi}};
}

void apply_config_file(HarnessConfig& cfg, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  nlohmann::json j;
  in >> j;
  if (!j.is_object()) {
    throw std::invalid_argument("config root must be a JSON object");
  }
  // the profile preset is applied first so explicit keys can override its
  // fields no matter where they sit in the file (JSON objects are unordered)
  if (j.contains("profile")) {
    cfg.profile = profile_by_name(j.at("profile").get<std::string>());
  }
  for (const auto& [key, val] : j.items()) {
    if (key == "profile") {
      continue;
    } else if (key == "n_sample") {
      cfg.profile.n_sample = val.get<std::size_t>();
    } else if (key == "n_rep") {
      cfg.profile.n_rep = val.get<std::size_t>();
    } else if (key == "budget") {
      cfg.profile.budget = val.get<std::size_t>();
    } else if (key == "t2_star_us") {
      cfg.t2_star = val.get<double>();
    } else if (key == "tau_rows_us") {
      cfg.tau_rows = val.get<std::vector<double>>();
    } else if (key == "omega1_rad_per_us") {
      cfg.omega1 = val.get<double>();
    } else if (key == "pulse_duration_us") {
      cfg.pulse_duration = val.get<double>();
    } else if (key == "pulse_bins") {
      cfg.pulse_bins = val.get<std::size_t>();
    } else if (key == "pulse_phi_rad") {
      cfg.pulse_phi = val.get<double>();
    } else if (key == "narrow_duration_us") {
      cfg.narrow_duration = val.get<double>();
    } else if (key == "narrow_bins") {
      cfg.narrow_bins = val.get<std::size_t>();
    } else if (key == "narrow_f") {
      cfg.narrow_f = val.get<double>();
    } else if (key == "eps_sigma") {
      cfg.eps_sigma = val.get<double>();
    } else if (key == "eps_enabled") {
      cfg.eps_enabled = val.get<bool>();
    } else if (key == "delta_sigma_override") {
      cfg.delta_sigma_override = val.get<double>();
    } else if (key == "rabi_periods") {
      cfg.rabi_periods = val.get<std::size_t>();
    } else if (key == "dominance_tau_us") {
      cfg.dominance_tau = val.get<double>();
    } else if (key == "dominance_t2_star_us") {
      cfg.dominance_t2_star = val.get<double>();
    } else if (key == "dominance_panels") {
      cfg.dominance_panels.clear();
      for (const auto& p : val) {
        cfg.dominance_panels.push_back({p.at("name").get<std::string>(),
                                        p.at("duration_us").get<double>(),
                                        p.at("rotation_phase_rad").get<double>()});
      }
    } else if (key == "seed") {
      cfg.seed = val.get<std::uint64_t>();
    } else if (key == "jobs") {
      cfg.jobs = val.get<int>();
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
}

CalibratedNoise noise_row(const HarnessConfig& cfg, double tau) {
  if (cfg.delta_sigma_override >= 0.0) {
    CalibratedNoise row;
    row.params = OuParams{cfg.delta_sigma_override, tau};
    row.t2_star = std::numeric_limits<double>::quiet_NaN();
    row.t2_he = std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  return predict_from_tau(tau, cfg.t2_star);
}

SimulationConfig sim_for_row(const HarnessConfig& cfg,
                             const CalibratedNoise& row) {
  SimulationConfig sim;
  sim.delta_params = row.params;
  if (cfg.eps_enabled && cfg.eps_sigma > 0.0) {
    sim.eps_params = OuParams{cfg.eps_sigma, kInfTau};
  }
  sim.n_sample = cfg.profile.n_sample;
  sim.n_rep = cfg.profile.n_rep;
  sim.seed = cfg.seed;
  sim.jobs = cfg.jobs;
  return sim;
}

Waveform initial_pulse(const HarnessConfig& cfg) {
  return rectangular_pulse(cfg.omega1, 1.0, cfg.pulse_phi, cfg.pulse_duration,
                           cfg.pulse_bins);
}

Waveform narrow_pulse(const HarnessConfig& cfg) {
  return rectangular_pulse(cfg.omega1, cfg.narrow_f, cfg.pulse_phi,
                           cfg.narrow_duration, cfg.narrow_bins);
}

std::vector<Table1Row> table1_rows(const HarnessConfig& cfg) {
  std::vector<Table1Row> rows;
  for (double tau : cfg.tau_rows) {
    Table1Row row;
    row.t2_star = cfg.t2_star;
    row.tau = tau;
    try {
      const CalibratedNoise cal = predict_from_tau(tau, cfg.t2_star);
      row.sigma = cal.params.sigma;
      row.t2_he = cal.t2_he;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

EnsembleResult rabi_curve(const HarnessConfig& cfg, std::optional<double> tau) {
  const double period = kTwoPi / cfg.omega1;  // at f = 1
  const double duration = static_cast<double>(cfg.rabi_periods) * period;
  const auto bins =
      static_cast<std::size_t>(std::llround(duration / 0.01));
  const Waveform pulse =
      rectangular_pulse(cfg.omega1, 1.0, cfg.pulse_phi, duration, bins);

  SimulationConfig sim;
  sim.delta_params = tau ? noise_row(cfg, *tau).params : OuParams{0.0, 1.0};
  sim.n_sample = cfg.profile.n_sample;
  sim.n_rep = cfg.profile.n_rep;
  sim.seed = cfg.seed;
  sim.jobs = cfg.jobs;

  EnsembleOptions opt;
  opt.record_trajectory = true;
  return ensemble_average(pulse, sim, opt);
}

double rabi_contrast(const EnsembleResult& res, double period, std::size_t k) {
  const double lo = static_cast<double>(k) * period - 1e-12;
  const double hi = static_cast<double>(k + 1) * period + 1e-12;
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  for (std::size_t i = 0; i < res.times.size(); ++i) {
    if (res.times[i] < lo || res.times[i] > hi) continue;
    vmin = std::min(vmin, res.mean_sigma_z[i]);
    vmax = std::max(vmax, res.mean_sigma_z[i]);
  }
  if (!(vmax >= vmin)) throw std::invalid_argument("period window is empty");
  return 0.5 * (vmax - vmin);
}

std::vector<BaselineRow> baseline_table(const HarnessConfig& cfg) {
  const DensityMatrix target = ket1_density();
  std::vector<BaselineRow> rows;
  for (const char* kind : {"initial", "narrow"}) {
    const Waveform pulse = std::string(kind) == "initial"
                               ? initial_pulse(cfg)
                               : narrow_pulse(cfg);
    for (double tau : cfg.tau_rows) {
      const SimulationConfig sim = sim_for_row(cfg, noise_row(cfg, tau));
      EnsembleOptions opt;
      opt.record_trajectory = false;
      opt.target = &target;
      const EnsembleResult res = ensemble_average(pulse, sim, opt);
      rows.push_back(BaselineRow{kind, tau, res.j_mean, res.j_std});
    }
  }
  return rows;
}

std::vector<GridCase> enumerate_grid() {
  const PhiMode modes[] = {PhiMode::kFixed, PhiMode::kConstant,
                           PhiMode::kTimeVarying};
  const std::size_t counts[] = {5, 10};
  const double betas[] = {3.0, 8.0};
  const char* mode_tag[] = {"1", "2", "3"};
  const char* count_tag[] = {"a", "b"};
  const char* beta_tag[] = {"i", "ii"};
  std::vector<GridCase> grid;
  for (int m = 0; m < 3; ++m) {
    for (int c = 0; c < 2; ++c) {
      for (int b = 0; b < 2; ++b) {
        GridCase gc;
        gc.code = std::string(mode_tag[m]) + "." + count_tag[c] + "." +
                  beta_tag[b];
        gc.phi_mode = modes[m];
        gc.n_c = counts[c];
        gc.beta_max = betas[b];
        grid.push_back(std::move(gc));
      }
    }
  }
  return grid;
}

GridCase parse_case(const std::string& code) {
  for (const GridCase& gc : enumerate_grid()) {
    if (gc.code == code) return gc;
  }
  throw std::invalid_argument("unknown grid case '" + code + "'");
}

DcrabConfig dcrab_for_case(const HarnessConfig& cfg, const GridCase& gc,
                           std::uint64_t run_seed) {
  DcrabConfig dc;
  dc.n_c = gc.n_c;
  dc.beta_max = gc.beta_max;
  dc.phi_mode = gc.phi_mode;
  dc.n_iter_total = cfg.profile.budget;
  dc.seed = run_seed;
  return dc;
}

OptimizationRecord run_grid_case(const HarnessConfig& cfg, const GridCase& gc,
                                 double tau, std::uint64_t seed_salt) {
  const std::uint64_t run_seed = derive_seed(
      cfg.seed, {seed_salt, code_key(gc.code), std::bit_cast<std::uint64_t>(tau)});
  SimulationConfig sim = sim_for_row(cfg, noise_row(cfg, tau));
  sim.seed = run_seed;
  const DcrabConfig dc = dcrab_for_case(cfg, gc, run_seed);
  return dcrab_optimize(initial_pulse(cfg), dc, sim);
}

std::vector<DominanceRow> dominance_table(const HarnessConfig& cfg) {
  SimulationConfig sim;
  if (cfg.delta_sigma_override >= 0.0) {
    sim.delta_params = OuParams{cfg.delta_sigma_override, cfg.dominance_tau};
  } else {
    sim.delta_params =
        predict_from_tau(cfg.dominance_tau, cfg.dominance_t2_star).params;
  }
  if (cfg.eps_enabled && cfg.eps_sigma > 0.0) {
    sim.eps_params = OuParams{cfg.eps_sigma, kInfTau};
  }
  sim.n_sample = cfg.profile.n_sample;
  sim.n_rep = cfg.profile.n_rep;
  sim.seed = cfg.seed;
  sim.jobs = cfg.jobs;
  return noise_dominance_study(cfg.dominance_panels, sim);
}

int cmd_table1(const RunContext& ctx) {
  const auto rows = table1_rows(ctx.cfg);
  std::string text = "t2_star_us,tau_us,sigma_rad_per_us,sigma_over_2pi_MHz,t2_he_us\n";
  bool any_failed = false;
  for (const auto& row : rows) {
    if (!row.ok) {
      any_failed = true;
      std::fprintf(stderr, "table1: tau=%s failed: %s\n",
                   io::fmt_g(row.tau).c_str(), row.error.c_str());
      continue;
    }
    text += io::fmt_g(row.t2_star) + "," + io::fmt_g(row.tau) + "," +
            io::fmt_g(row.sigma) + "," + io::fmt_g(row.sigma / kTwoPi) + "," +
            io::fmt_g(row.t2_he) + "\n";
  }
  const auto file = ctx.out_dir / "table1.csv";
  io::write_text(file, text);
  io::write_sidecar(file, base_meta(ctx, "table1"));
  std::fputs(text.c_str(), stdout);
  return any_failed ? 2 : 0;
}

int cmd_calibrate(const RunContext& ctx, double t2_star, double t2_he) {
  const OuParams p = calibrate_from_coherence(CoherencePair{t2_star, t2_he});
  std::string text = "t2_star_us,t2_he_us,sigma_rad_per_us,sigma_over_2pi_MHz,tau_us\n";
  text += io::fmt_g(t2_star) + "," + io::fmt_g(t2_he) + "," +
          io::fmt_g(p.sigma) + "," + io::fmt_g(p.sigma / kTwoPi) + "," +
          io::fmt_g(p.tau) + "\n";
  const auto file = ctx.out_dir / "calibrate.csv";
  io::write_text(file, text);
  auto meta = base_meta(ctx, "calibrate");
  meta["t2_star_us"] = t2_star;
  meta["t2_he_us"] = t2_he;
  io::write_sidecar(file, meta);
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_rabi(const RunContext& ctx) {
  auto emit = [&](const EnsembleResult& res, const std::string& label) {
    const auto file = ctx.out_dir / ("rabi_" + label + ".csv");
    io::write_curve_csv(file, res.times, res.mean_sigma_z, res.std_sigma_z);
    auto meta = base_meta(ctx, "rabi");
    meta["row"] = label;
    meta["amplitude_noise"] = false;
    io::write_sidecar(file, meta);
    std::printf("wrote %s\n", file.string().c_str());
  };
  for (double tau : ctx.cfg.tau_rows) {
    emit(rabi_curve(ctx.cfg, tau), "tau_" + tau_label(tau));
  }
  emit(rabi_curve(ctx.cfg, std::nullopt), "nonoise");
  return 0;
}

int cmd_baselines(const RunContext& ctx) {
  const auto rows = baseline_table(ctx.cfg);
  std::string text = "pulse,tau_us,j_mean,j_std\n";
  for (const auto& row : rows) {
    text += row.pulse + "," + io::fmt_g(row.tau) + "," +
            io::fmt_g(row.j_mean) + "," + io::fmt_g(row.j_std) + "\n";
  }
  const auto file = ctx.out_dir / "baselines.csv";
  io::write_text(file, text);
  io::write_sidecar(file, base_meta(ctx, "baselines"));
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_optimize(const RunContext& ctx, const std::vector<std::string>& cases,
                 const std::vector<double>& rows,
                 std::optional<std::size_t> budget_override) {
  HarnessConfig cfg = ctx.cfg;
  if (budget_override) cfg.profile.budget = *budget_override;

  std::vector<GridCase> grid;
  if (cases.empty()) {
    grid = enumerate_grid();
  } else {
    for (const auto& code : cases) grid.push_back(parse_case(code));
  }
  const std::vector<double> taus = rows.empty() ? cfg.tau_rows : rows;

  std::string summary = "case,tau_us,j_initial,best_j,j_opt_mean,j_opt_std,"
                        "n_evaluations,n_superiterations\n";
  bool any_failed = false;
  for (const auto& gc : grid) {
    std::string slug = gc.code;
    std::replace(slug.begin(), slug.end(), '.', '-');
    for (double tau : taus) {
      try {
        const OptimizationRecord rec = run_grid_case(cfg, gc, tau);
        const std::string stem = "case_" + slug + "_tau_" + tau_label(tau);
        const auto rec_file = ctx.out_dir / (stem + ".json");
        io::write_record(rec_file, rec);
        const auto pulse_file = ctx.out_dir / (stem + "_best.csv");
        io::write_waveform_csv(pulse_file, rec.best_pulse);
        auto meta = base_meta(ctx, "optimize");
        meta["case"] = gc.code;
        meta["tau_us"] = tau;
        meta["record"] = rec_file.filename().string();
        io::write_sidecar(pulse_file, meta);
        summary += gc.code + "," + io::fmt_g(tau) + "," +
                   io::fmt_g(rec.j_initial) + "," + io::fmt_g(rec.best_j) +
                   "," + io::fmt_g(rec.j_opt_mean) + "," +
                   io::fmt_g(rec.j_opt_std) + "," +
                   std::to_string(rec.j_history.size()) + "," +
                   std::to_string(rec.superiterations.size()) + "\n";
        std::printf("case %s tau %s: j_opt %s (init %s)\n", gc.code.c_str(),
                    io::fmt_g(tau).c_str(), io::fmt_g(rec.j_opt_mean).c_str(),
                    io::fmt_g(rec.j_initial).c_str());
      } catch (const std::exception& e) {
        any_failed = true;
        std::fprintf(stderr, "optimize: case %s tau %s failed: %s\n",
                     gc.code.c_str(), io::fmt_g(tau).c_str(), e.what());
      }
    }
  }
  const auto file = ctx.out_dir / "optimize_summary.csv";
  io::write_text(file, summary);
  auto meta = base_meta(ctx, "optimize");
  if (budget_override) meta["budget_override"] = *budget_override;
  io::write_sidecar(file, meta);
  return any_failed ? 2 : 0;
}

int cmd_dominance(const RunContext& ctx) {
  const auto rows = dominance_table(ctx.cfg);
  std::string text = "panel,duration_us,rotation_phase_rad,noise,"
                     "dev_mean_curve,dev_rep_mean,dev_rep_std\n";
  for (const auto& row : rows) {
    text += row.panel + "," + io::fmt_g(row.duration) + "," +
            io::fmt_g(row.rotation_phase) + "," + row.noise + "," +
            io::fmt_g(row.dev_mean_curve) + "," + io::fmt_g(row.dev_rep_mean) +
            "," + io::fmt_g(row.dev_rep_std) + "\n";
  }
  const auto file = ctx.out_dir / "dominance.csv";
  io::write_text(file, text);
  io::write_sidecar(file, base_meta(ctx, "dominance"));
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_compare(const RunContext& ctx, const std::filesystem::path& numeric,
                const std::filesystem::path& measured) {
  const Waveform w = io::read_waveform_csv(numeric);
  const MeasuredTrace tr = io::read_measured_csv(measured);
  const AlignmentResult res = align_and_mae(w, tr);

  std::string text = "t_us,f_numeric_abs,f_measured_aligned\n";
  for (std::size_t k = 0; k < res.numeric_abs.size(); ++k) {
    text += io::fmt_g(w.bin_midpoint(k), 17) + "," +
            io::fmt_g(res.numeric_abs[k], 17) + "," +
            io::fmt_g(res.aligned[k], 17) + "\n";
  }
  const auto file = ctx.out_dir / "compare_overlay.csv";
  io::write_text(file, text);
  auto meta = base_meta(ctx, "compare");
  meta["numeric_file"] = numeric.string();
  meta["measured_file"] = measured.string();
  meta["mae"] = res.mae;
  meta["offset_bins"] = res.offset_bins;
  io::write_sidecar(file, meta);
  std::printf("mae %s at offset %d bins\n", io::fmt_g(res.mae).c_str(),
              res.offset_bins);
  return 0;
}

}  // namespace spinopt
