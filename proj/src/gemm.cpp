#include "axnorm/gemm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "axnorm/errors.hpp"
#include "axnorm/parallel.hpp"
#include "axnorm/stats.hpp"

namespace axnorm {

namespace {

// Rows per parallel work item.
constexpr std::size_t kRowTile = 8;

void check_inner(const RealMatrix& a, const RealMatrix& b, const char* op) {
  if (a.empty() || b.empty()) throw DomainError(std::string(op) + ": empty operand");
  if (a.cols() != b.rows()) {
    throw DomainError(std::string(op) + ": inner dimensions differ (" + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.rows()) + ")");
  }
}

template <class RowKernel>
RealMatrix tiled_rows(std::size_t rows, std::size_t cols, unsigned threads, RowKernel&& kernel) {
  RealMatrix c(rows, cols);
  const std::size_t tiles = (rows + kRowTile - 1) / kRowTile;
  parallel_for(tiles, threads, [&](std::size_t t) {
    const std::size_t end = std::min(rows, (t + 1) * kRowTile);
    for (std::size_t i = t * kRowTile; i < end; ++i) kernel(i, c.row(i));
  });
  return c;
}

}  // namespace

void GemmDims::validate() const {
  if (n < 1 || m < 1 || p < 1) throw DomainError("GEMM dimensions must be positive");
}

NoiseSource NoisePlan::source(std::size_t i, std::size_t k, std::size_t j) const noexcept {
  return NoiseSource::at(global_seed, static_cast<std::uint32_t>(row_offset + i),
                         static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(j), layer_id);
}

RealMatrix gemm_exact(const RealMatrix& a, const RealMatrix& b, const GemmOptions& options) {
  check_inner(a, b, "gemm_exact");
  const std::size_t m = a.cols();
  const std::size_t p = b.cols();
  return tiled_rows(a.rows(), p, options.threads, [&](std::size_t i, std::span<double> out) {
    const auto arow = a.row(i);
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = arow[k];
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < p; ++j) out[j] += aik * brow[j];
    }
  });
}

RealMatrix gemm_approx(const RealMatrix& a, const RealMatrix& b, const MultiplierModel& model,
                       const NoisePlan& plan, const GemmOptions& options) {
  check_inner(a, b, "gemm_approx");
  const std::size_t m = a.cols();
  const std::size_t p = b.cols();
  const bool noisy = model.needs_noise();

  RealMatrix c = tiled_rows(a.rows(), p, options.threads, [&](std::size_t i, std::span<double> out) {
    const auto arow = a.row(i);
    for (std::size_t k = 0; k < m; ++k) {
      const float aik = static_cast<float>(arow[k]);
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < p; ++j) {
        const float bkj = static_cast<float>(brow[j]);
        std::optional<NoiseSource> noise;
        if (noisy) noise = plan.source(i, k, j);
        try {
          out[j] += product_term(model, aik, bkj, noise, options.multiply);
        } catch (const NumericError& e) {
          throw NumericError(std::string("gemm_approx: ") + e.what() + " at (" + std::to_string(i) +
                                 ", " + std::to_string(j) + ")",
                             i, j);
        }
      }
    }
    for (std::size_t j = 0; j < p; ++j) {
      if (!std::isfinite(out[j])) {
        throw NumericError("gemm_approx: non-finite output at (" + std::to_string(i) + ", " +
                               std::to_string(j) + ")",
                           i, j);
      }
    }
  });
  return c;
}

double frobenius_sq(std::span<const double> values) {
  CompensatedSum sum;
  for (double v : values) sum.add(v * v);
  return sum.value();
}

ErrorMatrix error_matrix(const RealMatrix& c_exact, const RealMatrix& c_approx, std::size_t inner) {
  if (c_exact.rows() != c_approx.rows() || c_exact.cols() != c_approx.cols() || c_exact.empty()) {
    throw DomainError("error_matrix: matrices must have equal, non-empty dims");
  }
  RealMatrix e(c_exact.rows(), c_exact.cols());
  auto ed = e.data();
  const auto cx = c_exact.data();
  const auto ca = c_approx.data();
  double max_abs = 0.0;
  for (std::size_t t = 0; t < ed.size(); ++t) {
    ed[t] = ca[t] - cx[t];
    max_abs = std::max(max_abs, std::fabs(ed[t]));
  }
  const MomentAccumulator moments = MomentAccumulator::from_block(ed);
  ErrorMatrixStats stats;
  stats.dims = GemmDims{c_exact.rows(), std::max<std::size_t>(1, inner), c_exact.cols()};
  stats.frob_sq = frobenius_sq(ed);
  stats.max_abs = max_abs;
  stats.element_mean = moments.mean;
  stats.element_var = moments.sample_variance();
  return {std::move(e), stats};
}

Activation Activation::clamp(double lo, double hi) {
  if (!(lo <= hi)) throw DomainError("clamp activation requires lo <= hi");
  return {Kind::kClamp, lo, hi};
}

double Activation::operator()(double v) const noexcept {
  switch (kind) {
    case Kind::kRelu:
      return v > 0.0 ? v : 0.0;
    case Kind::kIdentity:
      return v;
    case Kind::kClamp:
      return std::clamp(v, lo, hi);
  }
  return v;
}

LipschitzResult lipschitz_check(const RealMatrix& x, const RealMatrix& e, const Activation& f) {
  if (x.rows() != e.rows() || x.cols() != e.cols()) {
    throw DomainError("lipschitz_check: X and E must have equal dims");
  }
  CompensatedSum lhs_sq;
  const auto xd = x.data();
  const auto ed = e.data();
  for (std::size_t t = 0; t < xd.size(); ++t) {
    const double d = f(xd[t] + ed[t]) - f(xd[t]);
    lhs_sq.add(d * d);
  }
  LipschitzResult r;
  r.lhs = std::sqrt(lhs_sq.value());
  r.rhs = std::sqrt(frobenius_sq(ed));
  // Rounding X + E perturbs each lane by up to half an ulp of X, so the
  // slack scales with ||X||_F as well as ||E||_F.
  const double x_norm = std::sqrt(frobenius_sq(xd));
  r.holds = r.lhs <= r.rhs + kLipschitzSlack * (r.rhs + x_norm);
  return r;
}

}  // namespace axnorm
