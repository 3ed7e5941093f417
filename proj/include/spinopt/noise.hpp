#pragma once

#include <cstddef>
#include <vector>

#include "spinopt/rng.hpp"

namespace spinopt {

// Stationary Ornstein-Uhlenbeck process parameters. sigma is the stationary
// standard deviation (rad/us for detuning noise, dimensionless for relative
// amplitude noise); tau is the correlation time in us. tau = +infinity is the
// static limit: each realization is a single N(0, sigma^2) offset held for
// the whole trace.
struct OuParams {
  double sigma = 0.0;
  double tau = 1.0;

  bool static_noise() const;
};

// Throws std::invalid_argument unless sigma >= 0 and tau > 0 (or infinite).
void validate(const OuParams& p);

// The pair of 1/e coherence decay times that fixes an OU parameter set:
// t2_star from free evolution, t2_he from a two-segment echo sequence.
struct CoherencePair {
  double t2_star = 0.0;  // us
  double t2_he = 0.0;    // us
};

struct CalibratedNoise {
  OuParams params;
  double t2_star = 0.0;
  double t2_he = 0.0;
};

// One noise realization on an explicit time grid.
struct NoiseTrace {
  std::vector<double> times;   // us, strictly increasing
  std::vector<double> values;  // same length as times
};

// Stationary autocovariance sigma^2 exp(-|lag|/tau).
double ou_autocovariance(const OuParams& p, double lag);

// Exact one-step update over dt given a standard normal draw:
//   x' = x exp(-dt/tau) + n sigma sqrt(1 - exp(-2 dt/tau))
// Exact for any dt, so composing two half steps is distributionally identical
// to one full step.
double ou_step(double x_prev, double dt, const OuParams& p, double draw);

// Realization sampled on the uniform grid t_k = k*dt, k = 0..n-1. The first
// value is drawn from the stationary distribution N(0, sigma^2).
std::vector<double> ou_sample_trace(const OuParams& p, std::size_t n, double dt,
                                    RngStream& rng);

// Same, on an arbitrary strictly increasing grid. The first grid point
// defines t = 0 of the process. Throws if the grid is not increasing.
NoiseTrace ou_sample_at(const OuParams& p, const std::vector<double>& times,
                        RngStream& rng);

// Ensemble-averaged coherence envelope exp(-chi(t)) of a freely evolving
// superposition under OU detuning noise:
//   chi(t) = sigma^2 tau^2 (t/tau + exp(-t/tau) - 1)
// Requires finite tau.
double free_coherence(const OuParams& p, double t);

// Coherence envelope for an echo sequence of total length t with an ideal
// refocusing flip at t/2:
//   chi(t) = sigma^2 tau^2 (t/tau + 4 exp(-t/2tau) - exp(-t/tau) - 3)
double hahn_coherence(const OuParams& p, double t);

// Solve for the OU parameters whose free and echo envelopes cross 1/e at
// t2_star and t2_he. Eliminating sigma between the two 1/e conditions leaves
// a single equation in tau, solved by damped false position on the
// bracket [t2_star/100, 1e4 * t2_he] to 1e-9 relative; sigma then follows in
// closed form from the free-coherence condition. Throws std::invalid_argument
// if t2_he <= t2_star or if the bracket does not straddle a root.
OuParams calibrate_from_coherence(const CoherencePair& c);

// Forward direction: given tau and t2_star, compute sigma in closed form and
// the echo 1/e time by root solving the echo envelope.
CalibratedNoise predict_from_tau(double tau, double t2_star);

}  // namespace spinopt
