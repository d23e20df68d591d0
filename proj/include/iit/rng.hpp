#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "iit/errors.hpp"

namespace iit {

// Seedable generator with an explicit stream-splitting scheme.
//
// Stream splitting: the stream for replicate k of a run with base seed s is
// obtained from splitmix64(s + k); the splitmix output is then expanded into
// the full mt19937_64 seed sequence. Two distinct (s + k) values give
// decorrelated engines, so replicates are independent yet reproducible from
// (s, k) alone.
//
// All variate transforms are implemented here (not via std distributions) so
// that draws are identical for a given seed on every standard-conforming
// build.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) {
    std::uint64_t s = seed;
    std::uint64_t init[4];
    for (auto& w : init) w = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(init[0]),
                      static_cast<std::uint32_t>(init[0] >> 32),
                      static_cast<std::uint32_t>(init[1]),
                      static_cast<std::uint32_t>(init[1] >> 32),
                      static_cast<std::uint32_t>(init[2]),
                      static_cast<std::uint32_t>(init[2] >> 32),
                      static_cast<std::uint32_t>(init[3]),
                      static_cast<std::uint32_t>(init[3] >> 32)};
    engine_.seed(seq);
  }

  static SplitRng replicate_stream(std::uint64_t base_seed, std::uint64_t replicate) {
    return SplitRng(base_seed + replicate);
  }

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw contract_error("uniform_int: n must be positive");
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return draw % n;
  }

  double exponential(double mean) {
    double u = uniform();
    while (u <= 0.0) u = uniform();  // keep the variate strictly positive
    return -mean * std::log(u);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925287 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  static std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Inverse-CDF draw from a categorical law given unnormalized log weights.
// Weights are max-shifted before exponentiation.
inline std::size_t draw_categorical_log(SplitRng& rng, std::span<const double> log_weights) {
  if (log_weights.empty()) throw contract_error("draw_categorical_log: empty support");
  double shift = log_weights[0];
  for (const double w : log_weights) shift = std::max(shift, w);
  double total = 0.0;
  for (const double w : log_weights) total += std::exp(w - shift);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < log_weights.size(); ++i) {
    acc += std::exp(log_weights[i] - shift);
    if (u < acc) return i;
  }
  return log_weights.size() - 1;
}

}  // namespace iit
