#pragma once

#include <cstddef>
#include <vector>

#include "spinopt/rng.hpp"
#include "spinopt/units.hpp"

namespace spinopt {

// Time-binned control pulse. The drive amplitude in bin k is
// omega1 * f[k] * (1 + eps) at phase phi[k]; f is dimensionless and phi is in
// radians. Values are samples at bin midpoints t_k = (k + 1/2) dt.
struct Waveform {
  double omega1 = kTwoPi;  // peak Rabi frequency, rad/us
  double dt = 0.01;        // bin width, us
  std::vector<double> f;
  std::vector<double> phi;

  std::size_t n_bins() const { return f.size(); }
  double duration() const { return dt * static_cast<double>(f.size()); }
  double bin_midpoint(std::size_t k) const {
    return (static_cast<double>(k) + 0.5) * dt;
  }
};

// Throws std::invalid_argument on mismatched array lengths or dt <= 0.
void validate(const Waveform& w);

// Constant-amplitude, constant-phase pulse.
Waveform rectangular_pulse(double omega1, double f_value, double phi,
                           double duration, std::size_t n_bins);

// Randomized truncated Fourier basis for one channel: n_c sine elements
// sin(2 pi beta_k t / T) whose frequencies beta_k (in cycles per pulse
// window) are i.i.d. uniform on [0.1, beta_max].
struct FourierBasis {
  std::vector<double> beta;
};

FourierBasis draw_basis(std::size_t n_c, double beta_max, RngStream& rng);

// Edge envelope parameters. t_scale <= 0 selects the pulse duration, which
// makes the envelope vanish exactly at both window edges.
struct ScalingSpec {
  double sigma_scale = 30.0;
  double t_scale = 0.0;  // us
};

// Lambda(t) = tanh(sigma sin(pi t / 2T)) * tanh(-sigma sin(pi (t - T) / 2T)).
// Needs the actual window length to resolve a defaulted t_scale.
double scaling_function(double t, const ScalingSpec& spec, double duration);

enum class ClipMode { kTruncate, kRescale };

struct ConstraintPolicy {
  double f_limit = 5.0;
  ClipMode mode = ClipMode::kTruncate;
};

// Enforce |f| <= f_limit in place: per-bin truncation, or a uniform rescale
// that preserves the shape whenever the peak exceeds the limit.
void apply_limit(std::vector<double>& f, const ConstraintPolicy& policy);

enum class PhiMode { kFixed, kConstant, kTimeVarying };

// One channel of the coefficient expansion before the edge envelope and the
// amplitude limit are applied. Dressing acts here, so carrying a previous
// channel with weight 1 and all basis coefficients 0 reproduces it exactly;
// envelope and clipping are deferred to assembly.
struct ChannelState {
  std::vector<double> values;  // at bin midpoints

  static ChannelState zero(std::size_t n_bins) {
    ChannelState c;
    c.values.assign(n_bins, 0.0);
    return c;
  }
};

// values'[k] = a0 * prev[k] + sum_j coeffs[j] sin(2 pi beta_j t_k / T)
// with t_k the bin midpoint and T = n_bins * dt. Throws on size mismatch
// between coeffs and basis.
ChannelState compose_channel(const ChannelState& prev, double a0,
                             const std::vector<double>& coeffs,
                             const FourierBasis& basis, double dt);

// How logical channels become a physical waveform:
//   f[k]   = clip(Lambda(t_k) * f_channel[k])
//   phi[k] = base_phi[k] + (scale_phi ? Lambda(t_k) : 1) * phi_channel[k],
// wrapped into [0, 2 pi). base_phi is the phase of the unoptimized pulse.
struct AssemblySpec {
  double omega1 = kTwoPi;
  double dt = 0.01;
  std::vector<double> base_phi;
  ScalingSpec scaling;
  ConstraintPolicy policy;
  bool scale_phi = true;
};

Waveform assemble_waveform(const AssemblySpec& spec,
                           const ChannelState& f_channel,
                           const ChannelState& phi_channel);

// Measured-trace comparison. The raw trace is sampled at 1 ns pitch;
// comparison happens on the numeric pulse's 10 ns bins after rectifying the
// numeric amplitude.
struct MeasuredTrace {
  std::vector<double> times;  // us
  std::vector<double> volts;
};

struct AlignmentResult {
  double mae = 0.0;
  int offset_bins = 0;              // measured index = numeric index + offset
  std::vector<double> aligned;      // measured trace on the numeric bins
  std::vector<double> numeric_abs;  // |f| actually compared against
};

// Pipeline: block-average the measured samples in groups of 10, subtract the
// minimum so the floor sits at zero, rescale the peak onto the numeric peak,
// then slide over integer bin offsets (out-of-range bins read as zero) and
// keep the offset with the smallest mean absolute error. Throws if the
// averaged trace is shorter than the numeric pulse.
AlignmentResult align_and_mae(const Waveform& numeric,
                              const MeasuredTrace& measured);

}  // namespace spinopt
