#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spinopt/noise.hpp"
#include "spinopt/pulse.hpp"

namespace spinopt {

// 2x2 density matrix. Basis convention: component 0 is the upper state |1>,
// component 1 the lower state |0>, so sigma_z = diag(1, -1) and the ground
// state has <sigma_z> = -1.
using DensityMatrix = Eigen::Matrix2cd;

DensityMatrix ket0_density();  // |0><0|
DensityMatrix ket1_density();  // |1><1|

// Hermiticity, unit trace, positivity. Throws std::invalid_argument.
void validate_density(const DensityMatrix& rho, double tol = 1e-9);

// exp(-i H dt) for the constant bin Hamiltonian
//   H = (delta/2) sz + (omega_eff/2) (cos(phi) sx + sin(phi) sy),
// via the closed-form axis-angle rotation. omega_eff already carries the
// amplitude modulation and noise factor.
Eigen::Matrix2cd bin_propagator(double delta, double omega_eff, double phi,
                                double dt);

// State after every bin, starting with the initial state (n_bins + 1
// entries). Noise traces hold one value per bin, sampled at the bin's left
// edge; a trace covering the bin boundaries (n_bins + 1 values) is accepted
// and its last value ignored. eps_trace may be null for a clean drive.
std::vector<DensityMatrix> evolve_sample(const Waveform& pulse,
                                         const NoiseTrace& delta_trace,
                                         const NoiseTrace* eps_trace,
                                         const DensityMatrix& initial);

struct SimulationConfig {
  OuParams delta_params;
  std::optional<OuParams> eps_params;
  std::size_t n_sample = 1500;
  std::size_t n_rep = 100;
  std::uint64_t seed = 1;
  int jobs = 1;  // <= 0 picks the hardware thread count
  DensityMatrix initial = ket0_density();
};

struct EnsembleOptions {
  bool record_trajectory = true;
  bool retain_rep_curves = false;   // keep each repetition's mean curve
  bool retain_final_states = false; // keep the last repetition's final states
  const DensityMatrix* target = nullptr;  // enables the J statistics
};

struct EnsembleResult {
  std::vector<double> times;         // bin boundaries, us
  std::vector<double> mean_sigma_z;  // mean over repetitions of sample means
  std::vector<double> std_sigma_z;   // spread across repetitions
  std::vector<std::vector<double>> rep_curves;
  std::vector<DensityMatrix> final_states;
  std::vector<double> j_per_rep;
  double j_mean = 0.0;
  double j_std = 0.0;
};

// Monte-Carlo ensemble: n_sample fresh realizations per repetition, n_rep
// repetitions for finite-sample statistics. Sample s of repetition r draws
// its noise from streams keyed (seed, ensemble, r, s, kind), so results are
// independent of the worker count and schedule; per-time reductions use
// pairwise summation in sample order.
EnsembleResult ensemble_average(const Waveform& pulse,
                                const SimulationConfig& cfg,
                                const EnsembleOptions& opt);

// Uhlmann fidelity, using the qubit closed form
//   F^2 = tr(rho sigma) + 2 sqrt(det rho det sigma),
// which reduces to sqrt(<t|rho|t>) for a pure target.
double fidelity(const DensityMatrix& rho, const DensityMatrix& target);

// J = 1 - mean_j F(rho_j, target).
double state_infidelity(const std::vector<DensityMatrix>& finals,
                        const DensityMatrix& target);

// Mean infidelity to the inversion target |1><1| over one realization set of
// sim.n_sample samples keyed (seed, ctx, key, sample, kind). The optimizer's
// cost evaluations, frozen landscapes, and re-evaluations differ only in
// (ctx, key).
double inversion_infidelity_set(const Waveform& pulse,
                                const SimulationConfig& sim, std::uint64_t ctx,
                                std::uint64_t key);

// <sigma_z>(t) for a constant resonant-frame drive of Rabi rate omega1 at
// constant detuning delta, starting from |0>. Returns -1 when both are zero.
double rabi_analytic(double omega1, double delta, double t);

struct CoherenceCurve {
  std::vector<double> times;  // us
  std::vector<double> mean;   // mean over repetitions of |2 rho01|
  std::vector<double> stddev;
};

// Free-evolution (Ramsey) coherence of an equal superposition under the
// detuning noise of cfg, on n_points + 1 uniform times from 0 to t_max. The
// phase integral is accumulated on an internal grid refined to at most
// tau / 5 per step.
CoherenceCurve simulate_ramsey(const SimulationConfig& cfg, double t_max,
                               std::size_t n_points);

// Echo coherence: ideal refocusing flip at half of each total time T.
CoherenceCurve simulate_hahn(const SimulationConfig& cfg, double t_max,
                             std::size_t n_points);

struct DominancePanel {
  std::string name;
  double duration = 0.0;        // us
  double rotation_phase = 0.0;  // omega1 * duration, rad
};

struct DominanceRow {
  std::string panel;
  double duration = 0.0;
  double rotation_phase = 0.0;
  std::string noise;        // "delta", "eps", "both"
  double dev_mean_curve = 0.0;  // max |mean <sigma_z> - ideal| over the pulse
  double dev_rep_mean = 0.0;    // same statistic per repetition: mean
  double dev_rep_std = 0.0;     //   and spread
};

// Rectangular resonant pulses swept over the panel regimes, each run with
// detuning noise only, amplitude noise only, and both, and compared against
// the noiseless -cos(omega1 t) inversion curve.
std::vector<DominanceRow> noise_dominance_study(
    const std::vector<DominancePanel>& panels, const SimulationConfig& cfg);

}  // namespace spinopt
