#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spinopt/harness.hpp"
#include "spinopt/io.hpp"

int main(int argc, char** argv) {
  using namespace spinopt;

  CLI::App app{"driven-qubit OU-noise simulator and dCRAB pulse optimizer"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string profile_name = "paper";
  std::string out_dir = "out";
  std::string config_file;
  std::uint64_t seed = 1;
  int jobs = 1;

  auto* opt_seed = app.add_option("--seed", seed, "base RNG seed");
  auto* opt_profile =
      app.add_option("--profile", profile_name, "sampling profile")
          ->check(CLI::IsMember({"paper", "ci"}));
  app.add_option("--out", out_dir, "output directory");
  auto* opt_jobs =
      app.add_option("--jobs", jobs, "worker threads (<= 0: hardware count)");
  app.add_option("--config", config_file, "JSON overrides file")
      ->check(CLI::ExistingFile);

  double t1_t2_star = -1.0;
  std::vector<double> t1_taus;
  auto* c_table1 =
      app.add_subcommand("table1", "noise parameters per correlation time");
  c_table1->add_option("--t2-star", t1_t2_star, "free-decay 1/e time, us");
  auto* t1_tau_opt =
      c_table1->add_option("--tau", t1_taus, "correlation times, us");

  double cal_t2s = 0.0, cal_t2he = 0.0;
  auto* c_cal = app.add_subcommand(
      "calibrate", "sigma and tau from a coherence-time pair");
  c_cal->add_option("--t2-star", cal_t2s, "free-decay 1/e time, us")
      ->required();
  c_cal->add_option("--t2-he", cal_t2he, "echo 1/e time, us")->required();

  std::size_t periods = 0;
  auto* c_rabi = app.add_subcommand("rabi", "driven inversion decay curves");
  c_rabi->add_option("--periods", periods, "drive periods to cover");

  auto* c_base = app.add_subcommand("baselines", "unoptimized pulse costs");

  std::vector<std::string> case_codes;
  std::vector<double> opt_rows;
  std::size_t budget = 0;
  auto* c_opt = app.add_subcommand("optimize", "dCRAB grid optimization");
  c_opt->add_option("--cases", case_codes, "grid case codes, e.g. 1.a.i");
  c_opt->add_option("--rows", opt_rows, "correlation-time rows, us");
  auto* opt_budget =
      c_opt->add_option("--budget", budget, "evaluation budget override");

  auto* c_dom =
      app.add_subcommand("dominance", "noise-regime deviation study");

  std::string numeric_file, measured_file;
  auto* c_cmp = app.add_subcommand(
      "compare", "align a measured trace against a waveform and score MAE");
  c_cmp->add_option("--numeric", numeric_file, "waveform CSV")
      ->required()
      ->check(CLI::ExistingFile);
  c_cmp->add_option("--measured", measured_file, "measured trace CSV")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    HarnessConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    if (opt_profile->count() > 0) cfg.profile = profile_by_name(profile_name);
    if (opt_seed->count() > 0) cfg.seed = seed;
    if (opt_jobs->count() > 0) cfg.jobs = jobs;

    RunContext ctx{cfg, out_dir};
    io::ensure_dir(ctx.out_dir);

    if (*c_table1) {
      if (t1_t2_star > 0.0) ctx.cfg.t2_star = t1_t2_star;
      if (t1_tau_opt->count() > 0) ctx.cfg.tau_rows = t1_taus;
      return cmd_table1(ctx);
    }
    if (*c_cal) return cmd_calibrate(ctx, cal_t2s, cal_t2he);
    if (*c_rabi) {
      if (periods > 0) ctx.cfg.rabi_periods = periods;
      return cmd_rabi(ctx);
    }
    if (*c_base) return cmd_baselines(ctx);
    if (*c_opt) {
      return cmd_optimize(ctx, case_codes, opt_rows,
                          opt_budget->count() > 0
                              ? std::optional<std::size_t>(budget)
                              : std::nullopt);
    }
    if (*c_dom) return cmd_dominance(ctx);
    if (*c_cmp) return cmd_compare(ctx, numeric_file, measured_file);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
