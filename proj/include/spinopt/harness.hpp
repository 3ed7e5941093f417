#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spinopt/dynamics.hpp"
#include "spinopt/noise.hpp"
#include "spinopt/optimizer.hpp"

namespace spinopt {

// Sampling scale. "paper" runs the full-size ensembles; "ci" is a reduced
// profile for fast runs, with statistical tolerances widened by the square
// root of the sample-count ratio.
struct Profile {
  std::string name = "paper";
  std::size_t n_sample = 1500;
  std::size_t n_rep = 100;
  std::size_t budget = 2000;
};

Profile paper_profile();
Profile ci_profile();
Profile profile_by_name(const std::string& name);  // throws on unknown names

std::vector<DominancePanel> default_dominance_panels();

struct HarnessConfig {
  Profile profile;
  double t2_star = 0.1;  // us, shared by all detuning-noise rows
  std::vector<double> tau_rows = {100.0, 10.0, 1.0, 0.1, 0.01};
  double omega1 = kTwoPi;  // rad/us
  double pulse_duration = 0.5;
  std::size_t pulse_bins = 50;
  double pulse_phi = 0.5 * kPi;
  double narrow_duration = 0.1;
  std::size_t narrow_bins = 10;
  double narrow_f = 5.0;
  double eps_sigma = 0.05;  // relative amplitude noise, one draw per sample
  bool eps_enabled = true;
  double delta_sigma_override = -1.0;  // >= 0 pins sigma instead of calibrating
  std::size_t rabi_periods = 5;
  double dominance_tau = 0.1;
  double dominance_t2_star = 0.1;
  std::vector<DominancePanel> dominance_panels = default_dominance_panels();
  std::uint64_t seed = 1;
  int jobs = 1;
};

// Applies overrides from a JSON file onto defaults; unknown keys throw.
void apply_config_file(HarnessConfig& cfg, const std::filesystem::path& file);

struct RunContext {
  HarnessConfig cfg;
  std::filesystem::path out_dir = "out";
};

// Row and pulse builders shared by the commands and the acceptance suite.
CalibratedNoise noise_row(const HarnessConfig& cfg, double tau);
SimulationConfig sim_for_row(const HarnessConfig& cfg,
                             const CalibratedNoise& row);
Waveform initial_pulse(const HarnessConfig& cfg);
Waveform narrow_pulse(const HarnessConfig& cfg);

struct Table1Row {
  double t2_star = 0.0;
  double tau = 0.0;
  double sigma = 0.0;  // rad/us
  double t2_he = 0.0;
  bool ok = false;
  std::string error;
};

std::vector<Table1Row> table1_rows(const HarnessConfig& cfg);

// Driven inversion curve for one noise row (no amplitude noise); nullopt
// runs the noise-free control.
EnsembleResult rabi_curve(const HarnessConfig& cfg, std::optional<double> tau);

// Half peak-to-peak of the mean curve over the k-th drive period.
double rabi_contrast(const EnsembleResult& res, double period, std::size_t k);

struct BaselineRow {
  std::string pulse;  // "initial" or "narrow"
  double tau = 0.0;
  double j_mean = 0.0;
  double j_std = 0.0;
};

std::vector<BaselineRow> baseline_table(const HarnessConfig& cfg);

// Optimization grid: case codes combine phase handling (1 fixed, 2 constant,
// 3 time-varying), basis count (a 5, b 10), and frequency range (i 3, ii 8).
struct GridCase {
  std::string code;
  PhiMode phi_mode = PhiMode::kFixed;
  std::size_t n_c = 5;
  double beta_max = 3.0;
};

std::vector<GridCase> enumerate_grid();          // all 12 codes
GridCase parse_case(const std::string& code);    // throws on unknown codes

DcrabConfig dcrab_for_case(const HarnessConfig& cfg, const GridCase& gc,
                           std::uint64_t run_seed);

// One grid-case optimization on one noise row. The run seed is derived from
// (cfg.seed, seed_salt, case index in the full grid, row), so every cell of
// the grid sees independent streams.
OptimizationRecord run_grid_case(const HarnessConfig& cfg, const GridCase& gc,
                                 double tau, std::uint64_t seed_salt = 0);

std::vector<DominanceRow> dominance_table(const HarnessConfig& cfg);

// Commands write CSV/JSON artifacts under ctx.out_dir. Return value is the
// process exit code contribution: 0 on success, 2 when some cases failed but
// a partial result was emitted.
int cmd_table1(const RunContext& ctx);
int cmd_calibrate(const RunContext& ctx, double t2_star, double t2_he);
int cmd_rabi(const RunContext& ctx);
int cmd_baselines(const RunContext& ctx);
int cmd_optimize(const RunContext& ctx, const std::vector<std::string>& cases,
                 const std::vector<double>& rows,
                 std::optional<std::size_t> budget_override);
int cmd_dominance(const RunContext& ctx);
int cmd_compare(const RunContext& ctx, const std::filesystem::path& numeric,
                const std::filesystem::path& measured);

}  // namespace spinopt
