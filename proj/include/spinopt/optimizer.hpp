#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spinopt/dynamics.hpp"
#include "spinopt/pulse.hpp"

namespace spinopt {

// Direct search over R^n with dimension-adaptive coefficients and periodic
// re-evaluation of the incumbent vertex so a drifting stochastic objective
// cannot pin a stale optimum.
struct NelderMeadOptions {
  std::size_t budget = 2000;    // max charged objective evaluations
  double conv_eps = 1e-3;       // running-best improvement threshold
  std::size_t conv_window = 100;
  std::size_t reeval_interval = 0;  // 0 selects the default of n+1
};

struct NelderMeadResult {
  std::vector<double> best_x;
  double best_value = 0.0;
  std::vector<double> history;  // charged evaluation values, in call order
  bool converged = false;       // window rule fired before budget ran out
};

using Objective = std::function<double(const std::vector<double>&)>;

NelderMeadResult nelder_mead_adaptive(const Objective& objective,
                                      const std::vector<double>& x0,
                                      const std::vector<double>& steps,
                                      const NelderMeadOptions& options);

// Cost landscapes. Fresh mode draws new noise realizations per call, keyed
// by a caller-advanced serial so runs replay deterministically. Frozen mode
// reuses one fixed realization set, making J a deterministic function of
// the pulse.
enum class LandscapeMode { kFresh, kFrozen };

struct Landscape {
  LandscapeMode mode = LandscapeMode::kFresh;
  std::uint64_t key = 0;  // fresh: evaluation serial; frozen: chosen set
};

double evaluate_cost(const Waveform& pulse, const SimulationConfig& sim,
                     const Landscape& landscape);

// Representative realization set for the frozen landscape: the candidate
// whose J on the probe pulse sits closest to the mean over all candidates.
struct FrozenSelection {
  std::uint64_t key = 0;
  double j = 0.0;
  double j_mean = 0.0;
  double j_std = 0.0;
  std::vector<double> j_candidates;
};

FrozenSelection select_representative_realization(const Waveform& pulse,
                                                  const SimulationConfig& sim);

struct DcrabConfig {
  std::size_t n_c = 5;
  double beta_max = 3.0;
  PhiMode phi_mode = PhiMode::kFixed;
  std::size_t n_iter_total = 2000;  // charged cost evaluations, all rounds
  std::size_t convergence_window = 100;
  double convergence_eps = 1e-3;
  double amp_variation_f = 3.0;   // initial simplex step, f block
  double amp_variation_phi = kTwoPi;  // initial simplex step, phi block
  LandscapeMode landscape = LandscapeMode::kFresh;
  std::uint64_t seed = 1;  // basis draws; noise streams use sim.seed
  bool scale_phi = true;   // apply the edge envelope to phi deviations
  ScalingSpec scaling;
  ConstraintPolicy policy;
};

struct SuperIterationInfo {
  std::size_t start_index = 0;  // offset of its first entry in j_history
  std::size_t n_evaluations = 0;
  std::size_t dim = 0;
  bool converged = false;
  double best_value = 0.0;
  std::vector<double> f_frequencies;
  std::vector<double> phi_frequencies;  // time-varying phi only
  Waveform promoted;  // pulse carried into the next round's dressing
};

struct OptimizationRecord {
  DcrabConfig config;
  double j_initial = 0.0;  // probe of the seed pulse, not charged
  std::vector<double> j_history;
  std::vector<double> max_abs_f_history;  // peak |f| per evaluated candidate
  std::vector<std::size_t> superiteration_starts;
  std::vector<SuperIterationInfo> superiterations;
  Waveform best_pulse;
  double best_j = 0.0;  // min over the probe and all charged evaluations
  std::uint64_t frozen_key = 0;      // frozen mode only
  std::vector<double> j_reeval;      // final n_rep re-scores of best_pulse
  double j_opt_mean = 0.0;
  double j_opt_std = 0.0;
};

OptimizationRecord dcrab_optimize(const Waveform& initial,
                                  const DcrabConfig& config,
                                  const SimulationConfig& sim);

// Replays a finished record's run with a larger budget. The stored history
// must reproduce as a prefix (both landscape modes are deterministic given
// the seeds); throws std::runtime_error otherwise.
OptimizationRecord resume_optimization(const OptimizationRecord& record,
                                       const Waveform& initial,
                                       const SimulationConfig& sim,
                                       std::size_t new_total);

}  // namespace spinopt
