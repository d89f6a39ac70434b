#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace draco {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named sub-stream families. Values are part of the reproducibility contract:
// never renumber an existing entry.
enum class Stream : std::uint64_t {
  ComputeSchedule = 1,
  TransmitSchedule = 2,
  Gradient = 3,
  Fading = 4,
  Placement = 5,
  ObjectiveData = 6,
  InitialModel = 7,
  Repetition = 8,
  Verify = 9,
  Estimation = 10,
};

// Counter-based derivation: seed = H(H(master ^ H(stream)) ^ index). A sub-seed
// depends only on (master, stream, index), so adding agents or sweep points
// never shifts the streams of existing ones.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index) noexcept {
  const auto s = splitmix64(static_cast<std::uint64_t>(stream));
  return splitmix64(splitmix64(master ^ s) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t master, Stream stream, std::uint64_t index) {
  return Rng(derive_seed(master, stream, index));
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform on (0, 1].
inline double uniform_open_closed(Rng& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

// Marsaglia polar method; written out so draws do not depend on the standard
// library's normal_distribution implementation.
inline double standard_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace draco
