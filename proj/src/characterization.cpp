#include "axnorm/characterization.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "axnorm/errors.hpp"
#include "axnorm/parallel.hpp"
#include "axnorm/stats.hpp"

namespace axnorm {

namespace {

constexpr std::uint64_t kBlockSize = std::uint64_t{1} << 16;

// Counter lanes that keep the operand and noise streams disjoint.
constexpr std::uint32_t kOperandLane = 0x0A11u;
constexpr std::uint32_t kSecondOperandLane = 0x0A12u;
constexpr std::uint32_t kNoiseLane = 0x0E55u;

NoiseSource sample_source(std::uint64_t seed, std::uint64_t index, std::uint32_t lane) {
  return NoiseSource::at(seed, static_cast<std::uint32_t>(index),
                         static_cast<std::uint32_t>(index >> 32), lane, 0xC4A2u);
}

}  // namespace

void OperandDistribution::validate() const {
  if (const auto* u = std::get_if<UniformOperands>(&kind)) {
    if (!std::isfinite(u->lo) || !std::isfinite(u->hi) || !(u->lo < u->hi)) {
      throw DomainError("uniform operand distribution requires finite lo < hi");
    }
  } else {
    const auto& n = std::get<NormalOperands>(kind);
    if (!std::isfinite(n.mean) || !std::isfinite(n.stddev) || n.stddev < 0.0) {
      throw DomainError("normal operand distribution requires finite mean and stddev >= 0");
    }
  }
}

OperandDistribution default_operand_distribution(std::uint64_t seed) {
  return OperandDistribution{UniformOperands{0.0, 2.0}, seed};
}

ErrorMoments ErrorMoments::from(double mu, double sigma, std::uint64_t sample_count) {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || sigma < 0.0) {
    throw DomainError("error moments need finite mu and finite sigma >= 0");
  }
  if (sample_count == 0) throw DomainError("error moments need sample_count >= 1");
  ErrorMoments m;
  m.mu = mu;
  m.sigma = sigma;
  m.sample_count = sample_count;
  m.mu_stderr = sigma / std::sqrt(static_cast<double>(sample_count));
  return m;
}

std::pair<float, float> sample_operands(const OperandDistribution& dist, std::uint64_t index) {
  if (const auto* u = std::get_if<UniformOperands>(&dist.kind)) {
    const auto [a, b] = sample_source(dist.seed, index, kOperandLane).uniforms();
    const double width = u->hi - u->lo;
    return {static_cast<float>(u->lo + width * a), static_cast<float>(u->lo + width * b)};
  }
  const auto& n = std::get<NormalOperands>(dist.kind);
  const double za = sample_source(dist.seed, index, kOperandLane).standard_normal();
  const double zb = sample_source(dist.seed, index, kSecondOperandLane).standard_normal();
  return {static_cast<float>(n.mean + n.stddev * za), static_cast<float>(n.mean + n.stddev * zb)};
}

ErrorMoments characterize(const MultiplierModel& model, const OperandDistribution& dist,
                          std::uint64_t n_samples, const CharacterizeOptions& options) {
  if (n_samples < 2) throw DomainError("characterize: need at least two samples");
  dist.validate();

  const std::uint64_t blocks = (n_samples + kBlockSize - 1) / kBlockSize;
  std::vector<MomentAccumulator> partial(blocks);

  parallel_for(blocks, options.threads, [&](std::size_t block) {
    const std::uint64_t begin = block * kBlockSize;
    const std::uint64_t end = std::min(n_samples, begin + kBlockSize);
    std::vector<double> errors(end - begin);
    for (std::uint64_t s = begin; s < end; ++s) {
      const auto [x, y] = sample_operands(dist, s);
      std::optional<NoiseSource> noise;
      if (model.needs_noise()) noise = sample_source(dist.seed, s, kNoiseLane);
      errors[s - begin] = multiply(model, x, y, noise, options.multiply).epsilon;
    }
    partial[block] = MomentAccumulator::from_block(errors);
  });

  MomentAccumulator total;
  for (const auto& p : partial) total.merge(p);
  return ErrorMoments::from(total.mean, total.sample_stddev(), total.count);
}

std::pair<double, double> moment_confidence(const ErrorMoments& moments, double z) {
  if (moments.sample_count < 2) throw DomainError("moment_confidence: need sample_count >= 2");
  const double half = z * moments.mu_stderr;
  return {moments.mu - half, moments.mu + half};
}

}  // namespace axnorm
