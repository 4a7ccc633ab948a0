#pragma once

// Dense GEMM with a pluggable scalar multiplier, the error matrix between an
// approximate and an exact product, and the elementwise 1-Lipschitz bound.

#include <cstddef>
#include <cstdint>

#include "axnorm/matrix.hpp"
#include "axnorm/multiplier.hpp"

namespace axnorm {

struct GemmDims {
  std::size_t n = 1;  // rows of A
  std::size_t m = 1;  // inner dimension
  std::size_t p = 1;  // cols of B

  // Throws DomainError unless n, m, p >= 1.
  void validate() const;
  friend bool operator==(const GemmDims&, const GemmDims&) = default;
};

// Coordinates of the synthetic error stream. The error drawn for product
// (i, k, j) is a pure function of (global_seed, layer_id, row_offset + i, k, j).
// row_offset lets a large GEMM be evaluated in row chunks without changing
// any draw.
struct NoisePlan {
  std::uint64_t global_seed = 0;
  std::uint32_t layer_id = 0;
  std::uint64_t row_offset = 0;

  NoiseSource source(std::size_t i, std::size_t k, std::size_t j) const noexcept;
};

struct GemmOptions {
  unsigned threads = 1;
  MultiplyOptions multiply{};
};

// C = A * B in binary64, k ascending. Throws DomainError on a dimension
// mismatch.
RealMatrix gemm_exact(const RealMatrix& a, const RealMatrix& b, const GemmOptions& options = {});

// C' where every product a_ik * b_kj is replaced by the model's product of
// the binary32-rounded operands and accumulated exactly in binary64, k
// ascending. Bit-identical for any thread count. Throws DomainError on a
// dimension mismatch and NumericError (with the output location) when an
// element becomes non-finite.
RealMatrix gemm_approx(const RealMatrix& a, const RealMatrix& b, const MultiplierModel& model,
                       const NoisePlan& plan, const GemmOptions& options = {});

struct ErrorMatrixStats {
  GemmDims dims;
  double frob_sq = 0.0;
  double max_abs = 0.0;
  double element_mean = 0.0;
  double element_var = 0.0;  // sample variance, divisor N - 1
};

struct ErrorMatrix {
  RealMatrix error;
  ErrorMatrixStats stats;
};

// E = C' - C with its squared Frobenius norm and element statistics. The
// stats' dims carry (rows, ?, cols); the inner dimension is unknown here and
// left at `inner` (default 1).
ErrorMatrix error_matrix(const RealMatrix& c_exact, const RealMatrix& c_approx,
                         std::size_t inner = 1);

// Squared Frobenius norm with compensated summation.
double frobenius_sq(std::span<const double> values);

struct Activation {
  enum class Kind { kRelu, kIdentity, kClamp };
  Kind kind = Kind::kRelu;
  double lo = 0.0;
  double hi = 0.0;

  static Activation relu() { return {Kind::kRelu, 0.0, 0.0}; }
  static Activation identity() { return {Kind::kIdentity, 0.0, 0.0}; }
  static Activation clamp(double lo, double hi);

  double operator()(double v) const noexcept;
};

struct LipschitzResult {
  double lhs = 0.0;  // ||f(X + E) - f(X)||_F
  double rhs = 0.0;  // ||E||_F
  bool holds = false;
};

// Slack on the bound, in units of (||E||_F + ||X||_F): 64 ulp.
inline constexpr double kLipschitzSlack = 64.0 * 0x1.0p-52;

LipschitzResult lipschitz_check(const RealMatrix& x, const RealMatrix& e, const Activation& f);

}  // namespace axnorm
