#pragma once

// Monte Carlo estimation of a multiplier's error mean and standard deviation
// over a synthetic operand distribution.

#include <cstdint>
#include <utility>
#include <variant>

#include "axnorm/multiplier.hpp"

namespace axnorm {

struct UniformOperands {
  double lo = 0.0;
  double hi = 2.0;
  friend bool operator==(const UniformOperands&, const UniformOperands&) = default;
};

struct NormalOperands {
  double mean = 0.0;
  double stddev = 1.0;
  friend bool operator==(const NormalOperands&, const NormalOperands&) = default;
};

struct OperandDistribution {
  std::variant<UniformOperands, NormalOperands> kind = UniformOperands{};
  std::uint64_t seed = 0;

  // Throws DomainError for lo >= hi, negative stddev or non-finite bounds.
  void validate() const;

  friend bool operator==(const OperandDistribution&, const OperandDistribution&) = default;
};

OperandDistribution default_operand_distribution(std::uint64_t seed = 0);

inline constexpr std::uint64_t kDefaultCharacterizationSamples = std::uint64_t{1} << 24;

struct ErrorMoments {
  double mu = 0.0;
  double sigma = 0.0;
  std::uint64_t sample_count = 1;
  double mu_stderr = 0.0;

  // Builds a record with mu_stderr = sigma / sqrt(sample_count).
  static ErrorMoments from(double mu, double sigma, std::uint64_t sample_count);
};

struct CharacterizeOptions {
  unsigned threads = 1;
  MultiplyOptions multiply{};
};

// The operand pair drawn for sample index `index`. A pure function of
// (dist, index).
std::pair<float, float> sample_operands(const OperandDistribution& dist, std::uint64_t index);

// Draws n_samples operand pairs, multiplies each with `model` and returns the
// sample mean and sample standard deviation (divisor n - 1) of the error.
// Samples are processed in fixed blocks whose partial moments are merged in
// block order, so the result is bit-identical for any thread count.
// Throws DomainError for n_samples < 2 or an invalid distribution.
ErrorMoments characterize(const MultiplierModel& model, const OperandDistribution& dist,
                          std::uint64_t n_samples, const CharacterizeOptions& options = {});

// mu +/- z * mu_stderr.
std::pair<double, double> moment_confidence(const ErrorMoments& moments, double z);

}  // namespace axnorm
