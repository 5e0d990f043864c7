#pragma once

#include <cstdint>
#include <random>

namespace arspec {

using Rng = std::mt19937_64;

// Independent generator for (seed, stream); used to give every chain, trial and
// replicate its own substream so results do not depend on scheduling.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

// Scalar seed for the index-th derived run (replicate, trial) of a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  const auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  };
  return mix(base ^ mix(index));
}

// Uniform on the open interval (lo, hi).
inline double uniform_open(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  double x = dist(rng);
  while (!(x > lo && x < hi)) x = dist(rng);
  return x;
}

inline double standard_uniform_open(Rng& rng) { return uniform_open(rng, 0.0, 1.0); }

inline double draw_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

// Beta(a, b) via two gamma draws, clamped into (0, 1).
inline double draw_beta(Rng& rng, double a, double b) {
  const double x = draw_gamma(rng, a, 1.0);
  const double y = draw_gamma(rng, b, 1.0);
  double v = x / (x + y);
  constexpr double kEdge = 1e-12;
  if (!(v > kEdge)) v = kEdge;
  if (!(v < 1.0 - kEdge)) v = 1.0 - kEdge;
  return v;
}

}  // namespace arspec
