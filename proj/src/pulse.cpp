#include "spinopt/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spinopt {

void validate(const Waveform& w) {
  if (w.f.size() != w.phi.size()) {
    throw std::invalid_argument("waveform f and phi lengths differ");
  }
  if (!(w.dt > 0.0)) throw std::invalid_argument("bin width must be positive");
}

Waveform rectangular_pulse(double omega1, double f_value, double phi,
                           double duration, std::size_t n_bins) {
  if (n_bins == 0) throw std::invalid_argument("need at least one bin");
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
  Waveform w;
  w.omega1 = omega1;
  w.dt = duration / static_cast<double>(n_bins);
  w.f.assign(n_bins, f_value);
  w.phi.assign(n_bins, phi);
  return w;
}

FourierBasis draw_basis(std::size_t n_c, double beta_max, RngStream& rng) {
  if (!(beta_max >= 0.1)) {
    throw std::invalid_argument("beta_max must be at least 0.1");
  }
  FourierBasis basis;
  basis.beta.resize(n_c);
  for (auto& b : basis.beta) b = rng.uniform(0.1, beta_max);
  return basis;
}

double scaling_function(double t, const ScalingSpec& spec, double duration) {
  const double T = spec.t_scale > 0.0 ? spec.t_scale : duration;
  const double s = spec.sigma_scale;
  const double up = std::tanh(s * std::sin(kPi * t / (2.0 * T)));
  const double down = std::tanh(-s * std::sin(kPi * (t - T) / (2.0 * T)));
  return up * down;
}

void apply_limit(std::vector<double>& f, const ConstraintPolicy& policy) {
  if (!(policy.f_limit > 0.0)) {
    throw std::invalid_argument("amplitude limit must be positive");
  }
  if (policy.mode == ClipMode::kTruncate) {
    for (auto& v : f) v = std::clamp(v, -policy.f_limit, policy.f_limit);
    return;
  }
  double peak = 0.0;
  for (double v : f) peak = std::max(peak, std::abs(v));
  if (peak > policy.f_limit) {
    const double scale = policy.f_limit / peak;
    for (auto& v : f) v *= scale;
  }
}

ChannelState compose_channel(const ChannelState& prev, double a0,
                             const std::vector<double>& coeffs,
                             const FourierBasis& basis, double dt) {
  if (coeffs.size() != basis.beta.size()) {
    throw std::invalid_argument("coefficient count does not match basis size");
  }
  const std::size_t n = prev.values.size();
  const double T = dt * static_cast<double>(n);
  ChannelState out;
  out.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt;
    double v = a0 * prev.values[k];
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
      v += coeffs[j] * std::sin(kTwoPi * basis.beta[j] * t / T);
    }
    out.values[k] = v;
  }
  return out;
}

namespace {

double wrap_two_pi(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

}  // namespace

Waveform assemble_waveform(const AssemblySpec& spec,
                           const ChannelState& f_channel,
                           const ChannelState& phi_channel) {
  const std::size_t n = f_channel.values.size();
  if (phi_channel.values.size() != n || spec.base_phi.size() != n) {
    throw std::invalid_argument("channel lengths differ");
  }
  if (!(spec.dt > 0.0)) throw std::invalid_argument("bin width must be positive");
  Waveform w;
  w.omega1 = spec.omega1;
  w.dt = spec.dt;
  w.f.resize(n);
  w.phi.resize(n);
  const double T = spec.dt * static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * spec.dt;
    const double lam = scaling_function(t, spec.scaling, T);
    w.f[k] = lam * f_channel.values[k];
    const double dev =
        (spec.scale_phi ? lam : 1.0) * phi_channel.values[k];
    w.phi[k] = wrap_two_pi(spec.base_phi[k] + dev);
  }
  apply_limit(w.f, spec.policy);
  return w;
}

AlignmentResult align_and_mae(const Waveform& numeric,
                              const MeasuredTrace& measured) {
  validate(numeric);
  const std::size_t n = numeric.n_bins();
  if (n == 0) throw std::invalid_argument("numeric pulse is empty");

  AlignmentResult res;
  res.numeric_abs.resize(n);
  double peak_num = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    res.numeric_abs[k] = std::abs(numeric.f[k]);
    peak_num = std::max(peak_num, res.numeric_abs[k]);
  }

  // 1 ns samples -> 10 ns bins; a ragged tail shorter than one bin is dropped
  const std::size_t n_meas = measured.volts.size() / 10;
  if (n_meas < n) {
    throw std::invalid_argument("measured trace shorter than numeric window");
  }
  std::vector<double> m(n_meas);
  for (std::size_t j = 0; j < n_meas; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 10; ++i) acc += measured.volts[10 * j + i];
    m[j] = acc / 10.0;
  }

  const double floor = *std::min_element(m.begin(), m.end());
  for (auto& v : m) v -= floor;
  const double peak_meas = *std::max_element(m.begin(), m.end());
  if (peak_meas > 0.0) {
    const double scale = peak_num / peak_meas;
    for (auto& v : m) v *= scale;
  }

  const auto meas_at = [&](long i) -> double {
    return (i >= 0 && i < static_cast<long>(n_meas)) ? m[static_cast<std::size_t>(i)]
                                                     : 0.0;
  };

  double best = std::numeric_limits<double>::infinity();
  long best_off = 0;
  const long span = static_cast<long>(n_meas);
  for (long off = -span; off <= span; ++off) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += std::abs(res.numeric_abs[k] - meas_at(static_cast<long>(k) + off));
    }
    const double mae = acc / static_cast<double>(n);
    if (mae < best) {
      best = mae;
      best_off = off;
    }
  }

  res.mae = best;
  res.offset_bins = static_cast<int>(best_off);
  res.aligned.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    res.aligned[k] = meas_at(static_cast<long>(k) + best_off);
  }
  return res;
}

}  // namespace spinopt
