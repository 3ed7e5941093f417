#pragma once

#include <cstdint>
#include <initializer_list>

namespace spinopt {

// Keyed random stream: xoshiro256++ seeded through a splitmix64 hash of
// (seed, path...). Every consumer of randomness derives its own stream from
// the run seed plus a structured path, e.g. (context, repetition, sample,
// noise kind). Streams with distinct paths are statistically independent, and
// a result assembled from per-sample streams does not depend on how the
// samples were scheduled across workers.
//
// The normal variate uses the Marsaglia polar method rather than
// std::normal_distribution so that sequences are identical across standard
// library implementations.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() : RngStream(0, {}) {}
  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }

  result_type operator()();

  double uniform01();                      // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // standard normal

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream path contexts. First path element of every derived stream, so that
// different phases of a run can never collide.
namespace stream_ctx {
inline constexpr std::uint64_t ensemble = 1;        // (rep, sample, kind)
inline constexpr std::uint64_t optimizer_eval = 2;  // (eval index, sample, kind)
inline constexpr std::uint64_t reevaluation = 3;    // (rep, sample, kind)
inline constexpr std::uint64_t frozen_candidate = 4;  // (candidate, sample, kind)
inline constexpr std::uint64_t basis = 5;           // (super-iteration, channel)
inline constexpr std::uint64_t test = 99;
}  // namespace stream_ctx

inline constexpr std::uint64_t kKindDetuning = 0;
inline constexpr std::uint64_t kKindAmplitude = 1;

// Folds (seed, path...) into a fresh 64-bit seed for an independent sub-run
// (a grid case, an acceptance seed variant). Same keying as RngStream, so
// derived runs never share streams with the parent.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path);

// Deterministic pairwise summation in index order. Reduction results are the
// same no matter how the inputs were produced or scheduled.
double pairwise_sum(const double* data, std::size_t n);

}  // namespace spinopt
