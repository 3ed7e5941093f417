#include "spinopt/rng.hpp"

#include <cmath>

namespace spinopt {

namespace {

// splitmix64 step (Vigna); used only for keying the main generator.
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// Fold the path into the key one element at a time; each element is
// whitened before mixing so that nearby indices give unrelated keys.
std::uint64_t fold_key(std::uint64_t seed,
                       std::initializer_list<std::uint64_t> path) {
  std::uint64_t key = seed ^ 0xD2B74407B1CE6E93ULL;
  for (std::uint64_t id : path) {
    std::uint64_t w = id;
    key ^= splitmix64(w);
    key = key * 0x2545F4914F6CDD1DULL + 0x9E3779B97F4A7C15ULL;
  }
  return key;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path) {
  std::uint64_t w = fold_key(seed, path);
  return splitmix64(w);
}

RngStream::RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t key = fold_key(seed, path);
  // Expand the key into the xoshiro256++ state.
  for (auto& word : s_) word = splitmix64(key);
  // xoshiro must not start from the all-zero state.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9E3779B97F4A7C15ULL;
}

RngStream::result_type RngStream::operator()() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() {
  // 53 random bits into [0,1)
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

double pairwise_sum(const double* data, std::size_t n) {
  if (n <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += data[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

}  // namespace spinopt
