#include "spinopt/noise.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace spinopt {

namespace {

// Safeguarded root finder on a bracket [lo, hi] with f(lo), f(hi) of opposite
// sign. Illinois-damped false position: whenever the same end of the bracket
// is replaced twice in a row, the stale end's function value is halved, which
// stops the stagnation plain secant suffers on brackets with a long flat
// tail. Converges to rel_tol on the abscissa.
double solve_bracketed(const std::function<double(double)>& f, double lo,
                       double hi, double f_lo, double f_hi, double rel_tol) {
  if (!(f_lo * f_hi <= 0.0)) {
    throw std::invalid_argument("root bracket does not straddle a sign change");
  }
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  double a = lo, b = hi, fa = f_lo, fb = f_hi;
  int kept_side = 0;  // -1: a survived last step, +1: b survived
  for (int it = 0; it < 200; ++it) {
    double x = (a * fb - b * fa) / (fb - fa);
    if (!(x > a && x < b)) x = 0.5 * (a + b);
    const double fx = f(x);
    if (fx == 0.0) return x;
    if (fa * fx < 0.0) {
      b = x;
      fb = fx;
      if (kept_side == -1) fa *= 0.5;
      kept_side = -1;
    } else {
      a = x;
      fa = fx;
      if (kept_side == +1) fb *= 0.5;
      kept_side = +1;
    }
    if (b - a <= rel_tol * std::max(std::abs(a), std::abs(b))) break;
  }
  return 0.5 * (a + b);
}

// chi(t)/ (sigma^2 tau^2) for free evolution; series for small t/tau to avoid
// cancellation in exp(-x) - 1 + x.
double free_shape(double x) {
  if (x < 1e-4) {
    return x * x * (0.5 + x * (-1.0 / 6.0 + x * (1.0 / 24.0 - x / 120.0)));
  }
  return x + std::expm1(-x);
}

// chi(t) / (sigma^2 tau^2) for the echo sequence. The first omitted series
// term is x^5/160, so the cutoff keeps full double precision.
double hahn_shape(double x) {
  if (x < 1e-3) {
    return x * x * x * (1.0 / 12.0 + x * (-1.0 / 32.0 + x * (7.0 / 960.0)));
  }
  return x + 4.0 * std::expm1(-0.5 * x) - std::expm1(-x);
}

}  // namespace

bool OuParams::static_noise() const { return std::isinf(tau); }

void validate(const OuParams& p) {
  if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma)) {
    throw std::invalid_argument("OU sigma must be finite and non-negative");
  }
  if (std::isnan(p.tau) || p.tau <= 0.0) {
    throw std::invalid_argument("OU tau must be positive (or +inf for static noise)");
  }
}

double ou_autocovariance(const OuParams& p, double lag) {
  validate(p);
  if (p.static_noise()) return p.sigma * p.sigma;
  return p.sigma * p.sigma * std::exp(-std::abs(lag) / p.tau);
}

double ou_step(double x_prev, double dt, const OuParams& p, double draw) {
  if (p.static_noise()) return x_prev;
  const double decay = std::exp(-dt / p.tau);
  const double innov = p.sigma * std::sqrt(-std::expm1(-2.0 * dt / p.tau));
  return x_prev * decay + draw * innov;
}

std::vector<double> ou_sample_trace(const OuParams& p, std::size_t n, double dt,
                                    RngStream& rng) {
  validate(p);
  if (dt <= 0.0) throw std::invalid_argument("trace step must be positive");
  std::vector<double> out(n);
  if (n == 0) return out;
  double x = p.sigma * rng.normal();
  out[0] = x;
  if (p.static_noise()) {
    for (std::size_t k = 1; k < n; ++k) out[k] = x;
    return out;
  }
  const double decay = std::exp(-dt / p.tau);
  const double innov = p.sigma * std::sqrt(-std::expm1(-2.0 * dt / p.tau));
  for (std::size_t k = 1; k < n; ++k) {
    x = x * decay + innov * rng.normal();
    out[k] = x;
  }
  return out;
}

NoiseTrace ou_sample_at(const OuParams& p, const std::vector<double>& times,
                        RngStream& rng) {
  validate(p);
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw std::invalid_argument("time grid must be strictly increasing");
    }
  }
  NoiseTrace trace;
  trace.times = times;
  trace.values.resize(times.size());
  if (times.empty()) return trace;
  double x = p.sigma * rng.normal();
  trace.values[0] = x;
  if (p.static_noise()) {
    for (std::size_t k = 1; k < times.size(); ++k) trace.values[k] = x;
    return trace;
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    x = ou_step(x, times[k] - times[k - 1], p, rng.normal());
    trace.values[k] = x;
  }
  return trace;
}

double free_coherence(const OuParams& p, double t) {
  validate(p);
  if (p.static_noise()) {
    throw std::invalid_argument("free_coherence requires finite tau");
  }
  if (t < 0.0) throw std::invalid_argument("time must be non-negative");
  const double st = p.sigma * p.tau;
  return std::exp(-st * st * free_shape(t / p.tau));
}

double hahn_coherence(const OuParams& p, double t) {
  validate(p);
  if (p.static_noise()) {
    throw std::invalid_argument("hahn_coherence requires finite tau");
  }
  if (t < 0.0) throw std::invalid_argument("time must be non-negative");
  const double st = p.sigma * p.tau;
  return std::exp(-st * st * hahn_shape(t / p.tau));
}

OuParams calibrate_from_coherence(const CoherencePair& c) {
  if (!(c.t2_star > 0.0) || !(c.t2_he > 0.0)) {
    throw std::invalid_argument("coherence times must be positive");
  }
  if (!(c.t2_he > c.t2_star)) {
    throw std::invalid_argument("echo time must exceed the free decay time");
  }
  // Both 1/e conditions share sigma^2 tau^2, so
  //   free_shape(t2_star/tau) = hahn_shape(t2_he/tau).
  // Multiplying through by tau gives the residual below, positive for small
  // tau and approaching zero from below for large tau.
  const auto residual = [&](double tau) {
    return 4.0 * tau * std::expm1(-c.t2_he / (2.0 * tau)) -
           tau * std::expm1(-c.t2_he / tau) - tau * std::expm1(-c.t2_star / tau) +
           c.t2_he - c.t2_star;
  };
  const double lo = c.t2_star / 100.0;
  const double hi = 1e4 * c.t2_he;
  const double f_lo = residual(lo);
  const double f_hi = residual(hi);
  if (f_lo * f_hi > 0.0) {
    throw std::invalid_argument(
        "no consistent correlation time in bracket for (t2_star=" +
        std::to_string(c.t2_star) + ", t2_he=" + std::to_string(c.t2_he) + ")");
  }
  const double tau = solve_bracketed(residual, lo, hi, f_lo, f_hi, 1e-9);
  OuParams p;
  p.tau = tau;
  // free-coherence 1/e condition: sigma^2 tau^2 free_shape(t2_star/tau) = 1
  p.sigma = 1.0 / (tau * std::sqrt(free_shape(c.t2_star / tau)));
  return p;
}

CalibratedNoise predict_from_tau(double tau, double t2_star) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("tau must be positive and finite");
  }
  if (!(t2_star > 0.0)) throw std::invalid_argument("t2_star must be positive");
  CalibratedNoise out;
  out.params.tau = tau;
  out.params.sigma = 1.0 / (tau * std::sqrt(free_shape(t2_star / tau)));
  out.t2_star = t2_star;
  // Echo 1/e time: first crossing of sigma^2 tau^2 hahn_shape(t/tau) = 1.
  // hahn_shape is strictly increasing, so expand the upper end until the
  // residual changes sign.
  const double st = out.params.sigma * tau;
  const auto residual = [&](double t) { return st * st * hahn_shape(t / tau) - 1.0; };
  double lo = 0.0, f_lo = -1.0;
  double hi = t2_star;
  double f_hi = residual(hi);
  int guard = 0;
  while (f_hi < 0.0 && guard++ < 80) {
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    f_hi = residual(hi);
  }
  if (f_hi < 0.0) throw std::runtime_error("echo decay time bracket expansion failed");
  out.t2_he = solve_bracketed(residual, lo, hi, f_lo, f_hi, 1e-9);
  return out;
}

}  // namespace spinopt
