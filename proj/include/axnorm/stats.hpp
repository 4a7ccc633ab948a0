#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace axnorm {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// Count, mean and sum of squared deviations of a sample. Partial results
// from disjoint blocks combine with merge() (Chan et al. pairwise update).
struct MomentAccumulator {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  // Two-pass compensated moments of one block held in memory.
  static MomentAccumulator from_block(std::span<const double> values);

  void merge(const MomentAccumulator& other) noexcept;

  // Sample variance with divisor n - 1; 0 for fewer than two samples.
  double sample_variance() const noexcept;
  double sample_stddev() const noexcept;
};

// Ranks with ties replaced by the average of the positions they span
// (1-based).
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> xs, std::span<const double> ys);

// Spearman rank correlation with average-rank tie handling. Returns
// std::nullopt when either input is constant (the coefficient is undefined).
// Throws DomainError on length mismatch or fewer than two points.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace axnorm

namespace axnorm {

// Average ranks after merging values whose relative gap to their sorted
// neighbour is at most rel_tol (chained), so near-equal values tie.
// rel_tol == 0 reduces to average_ranks.
std::vector<double> tolerant_ranks(std::span<const double> values, double rel_tol);

// Spearman correlation on tolerant_ranks. Same error contract as spearman().
std::optional<double> spearman_with_ties(std::span<const double> xs, std::span<const double> ys,
                                         double rel_tol);

}  // namespace axnorm
