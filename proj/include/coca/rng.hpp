#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace coca {

// Purpose tags for substream derivation. Every random draw in a run flows
// from one master seed through derive_stream(seed, step, slot, purpose), so
// parallel and serial execution produce identical results.
enum class StreamPurpose : std::uint64_t {
  Rollout = 1,
  Eval = 2,
  Oracle = 3,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t step,
                                   std::uint64_t slot, StreamPurpose purpose) {
  std::uint64_t s = detail::splitmix64(seed);
  s = detail::splitmix64(s ^ (step * 0xA24BAED4963EE407ULL));
  s = detail::splitmix64(s ^ (slot * 0x9FB21C651E98DF25ULL));
  s = detail::splitmix64(s ^ static_cast<std::uint64_t>(purpose));
  return s;
}

// mt19937_64 with hand-rolled draw helpers. The engine's output sequence is
// fully specified by the standard; std::uniform_*_distribution is not, so we
// avoid it to keep runs bit-reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t stream_key) : engine_(stream_key) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection-free modulo is fine at toy scale;
  // we use multiply-shift to avoid modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Index sampled from an explicit probability vector (sums to ~1).
  int categorical(std::span<const double> probs) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace coca
