#pragma once

// Counter-based random numbers. Every draw is a pure function of a 64-bit key
// and a 128-bit counter, so a value can be regenerated from its coordinates
// alone, independent of evaluation order or thread schedule.

#include <array>
#include <cstdint>

namespace axnorm {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

// Philox4x32 with 10 rounds (Salmon et al., Random123).
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key) noexcept;

// Maps two 32-bit words to a double in [0, 1) with 53 random bits.
double uniform_from_words(std::uint32_t hi, std::uint32_t lo) noexcept;

// Mixes a 64-bit value into a well-distributed 64-bit value (splitmix64
// finalizer). Used to derive independent seeds from (seed, index) tuples.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Derives a child seed from a parent seed and a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// A single point in the counter space: one key and one counter. Each accessor
// is a pure function of that point.
class NoiseSource {
 public:
  constexpr NoiseSource(std::uint64_t key, PhiloxCounter counter) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        counter_(counter) {}

  static NoiseSource at(std::uint64_t key, std::uint32_t c0, std::uint32_t c1,
                        std::uint32_t c2, std::uint32_t c3) noexcept {
    return NoiseSource(key, PhiloxCounter{c0, c1, c2, c3});
  }

  PhiloxCounter raw() const noexcept { return philox4x32(counter_, key_); }

  // Two independent uniforms in [0, 1).
  std::array<double, 2> uniforms() const noexcept;

  // One standard normal variate (Box-Muller on the two uniforms).
  double standard_normal() const noexcept;

  const PhiloxCounter& counter() const noexcept { return counter_; }

 private:
  PhiloxKey key_;
  PhiloxCounter counter_;
};

// Sequential convenience wrapper: a stream with a fixed key and an
// incrementing 64-bit counter. Used for training-time randomness where a
// replayable sequence (not random access) is all that is required.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t seed, std::uint32_t tag = 0) noexcept
      : seed_(seed), tag_(tag) {}

  double uniform() noexcept;
  double normal() noexcept;
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  NoiseSource next() noexcept;

  std::uint64_t seed_;
  std::uint32_t tag_;
  std::uint64_t index_ = 0;
};

}  // namespace axnorm
