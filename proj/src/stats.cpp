#include "axnorm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "axnorm/errors.hpp"

namespace axnorm {

void CompensatedSum::add(double v) noexcept {
  const double t = sum_ + v;
  if (std::fabs(sum_) >= std::fabs(v)) {
    compensation_ += (sum_ - t) + v;
  } else {
    compensation_ += (v - t) + sum_;
  }
  sum_ = t;
}

MomentAccumulator MomentAccumulator::from_block(std::span<const double> values) {
  MomentAccumulator acc;
  acc.count = values.size();
  if (values.empty()) return acc;
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  acc.mean = sum.value() / static_cast<double>(values.size());
  CompensatedSum sq;
  for (double v : values) {
    const double d = v - acc.mean;
    sq.add(d * d);
  }
  acc.m2 = sq.value();
  return acc;
}

void MomentAccumulator::merge(const MomentAccumulator& other) noexcept {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double n = na + nb;
  const double delta = other.mean - mean;
  mean = (na * mean + nb * other.mean) / n;
  m2 = m2 + other.m2 + delta * delta * (na * nb / n);
  count += other.count;
}

double MomentAccumulator::sample_variance() const noexcept {
  if (count < 2) return 0.0;
  return m2 / static_cast<double>(count - 1);
}

double MomentAccumulator::sample_stddev() const noexcept { return std::sqrt(sample_variance()); }

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 (0-based) share the mean of ranks i+1..j.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DomainError("spearman: length mismatch");
  if (xs.size() < 2) throw DomainError("spearman: need at least two points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::isnan(xs[i]) || std::isnan(ys[i])) throw DomainError("spearman: NaN input");
  }
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(xs) || constant(ys)) return std::nullopt;
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  return std::clamp(pearson(rx, ry), -1.0, 1.0);
}

}  // namespace axnorm

namespace axnorm {

std::vector<double> tolerant_ranks(std::span<const double> values, double rel_tol) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  auto tied = [&](double a, double b) {
    return b - a <= rel_tol * std::max(std::fabs(a), std::fabs(b));
  };
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && tied(values[order[j - 1]], values[order[j]])) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

std::optional<double> spearman_with_ties(std::span<const double> xs, std::span<const double> ys,
                                         double rel_tol) {
  if (xs.size() != ys.size()) throw DomainError("spearman: length mismatch");
  if (xs.size() < 2) throw DomainError("spearman: need at least two points");
  const std::vector<double> rx = tolerant_ranks(xs, rel_tol);
  const std::vector<double> ry = tolerant_ranks(ys, rel_tol);
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(rx) || constant(ry)) return std::nullopt;
  return std::clamp(pearson(rx, ry), -1.0, 1.0);
}

}  // namespace axnorm
