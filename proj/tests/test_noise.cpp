#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "axnorm/noise.hpp"

using namespace axnorm;

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswerZeros) {
  const auto r = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r[0], 0x6627e8d5u);
  EXPECT_EQ(r[1], 0xe169c58du);
  EXPECT_EQ(r[2], 0xbc57ac4cu);
  EXPECT_EQ(r[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto r = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                            {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(r[0], 0x408f276du);
  EXPECT_EQ(r[1], 0x41c83b0eu);
  EXPECT_EQ(r[2], 0xa20bc7c6u);
  EXPECT_EQ(r[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto r = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r[0], 0xd16cfe09u);
  EXPECT_EQ(r[1], 0x94fdccebu);
  EXPECT_EQ(r[2], 0x5001e420u);
  EXPECT_EQ(r[3], 0x24126ea1u);
}

TEST(NoiseSource, PureFunctionOfCounterAndKey) {
  const auto a = NoiseSource::at(42, 1, 2, 3, 4).standard_normal();
  const auto b = NoiseSource::at(42, 1, 2, 3, 4).standard_normal();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, NoiseSource::at(43, 1, 2, 3, 4).standard_normal());
  EXPECT_NE(a, NoiseSource::at(42, 1, 2, 4, 3).standard_normal());
}

TEST(NoiseSource, UniformsInOpenUnitInterval) {
  for (std::uint32_t i = 0; i < 20000; ++i) {
    const auto u = NoiseSource::at(7, i, 0, 0, 0).uniforms();
    EXPECT_GE(u[0], 0.0);
    EXPECT_LT(u[0], 1.0);
    EXPECT_GE(u[1], 0.0);
    EXPECT_LT(u[1], 1.0);
  }
  EXPECT_EQ(uniform_from_words(0, 0), 0.0);
  EXPECT_LT(uniform_from_words(0xffffffffu, 0xffffffffu), 1.0);
}

TEST(NoiseSource, StandardNormalMoments) {
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = NoiseSource::at(11, static_cast<std::uint32_t>(i), 5, 0, 9).standard_normal();
    ASSERT_TRUE(std::isfinite(z));
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(n));
  // Var of the sample variance of N(0,1) is about 2/n.
  EXPECT_NEAR(var, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(CounterStream, ReproducibleAndTagged) {
  CounterStream a(5, 1), b(5, 1), c(5, 2);
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform();
    EXPECT_EQ(va, b.uniform());
    EXPECT_NE(va, c.uniform());
  }
}

TEST(CounterStream, BelowStaysInRange) {
  CounterStream s(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = s.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(DeriveSeed, DistinctStreams) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 1000; ++s) seeds.insert(derive_seed(99, s));
  EXPECT_EQ(seeds.size(), 1000u);
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 1));
}
