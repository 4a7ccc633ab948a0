#include "axnorm/noise.hpp"

#include <cmath>
#include <numbers>

namespace axnorm {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline PhiloxCounter philox_round(const PhiloxCounter& c, const PhiloxKey& k) {
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, c[0], hi0, lo0);
  mulhilo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    counter = philox_round(counter, key);
  }
  return counter;
}

double uniform_from_words(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 5) << 26) | (lo >> 6);
  return static_cast<double>(bits) * 0x1.0p-53;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ (stream * 0xD6E8FEB86659FD93ull + 0x632BE59BD9B4E019ull));
}

std::array<double, 2> NoiseSource::uniforms() const noexcept {
  const PhiloxCounter w = raw();
  return {uniform_from_words(w[0], w[1]), uniform_from_words(w[2], w[3])};
}

double NoiseSource::standard_normal() const noexcept {
  const auto [u1, u2] = uniforms();
  // 1 - u1 lies in (0, 1], so the logarithm is finite.
  const double radius = std::sqrt(-2.0 * std::log1p(-u1));
  return radius * std::cos(2.0 * std::numbers::pi * u2);
}

NoiseSource CounterStream::next() noexcept {
  const std::uint64_t i = index_++;
  return NoiseSource::at(seed_, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32),
                         tag_, 0x5EEDu);
}

double CounterStream::uniform() noexcept { return next().uniforms()[0]; }

double CounterStream::normal() noexcept { return next().standard_normal(); }

std::uint64_t CounterStream::below(std::uint64_t bound) noexcept {
  const PhiloxCounter w = next().raw();
  const std::uint64_t r = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
  // Bias is at most bound / 2^64; irrelevant for the small bounds used here.
  return r % bound;
}

}  // namespace axnorm
