#pragma once

// Scalar multiplication rules on binary32 operands: the exact product, the
// Mitchell logarithmic approximation, the error-configurable minimally
// biased multiplier (MBM) and a synthetic injector that adds N(mu, sigma)
// noise to the exact product.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "axnorm/noise.hpp"

namespace axnorm {

struct ExactMul {
  friend bool operator==(const ExactMul&, const ExactMul&) = default;
};

struct MitchellMul {
  friend bool operator==(const MitchellMul&, const MitchellMul&) = default;
};

// Mitchell plus an additive mantissa correction of correction_code * 2^-7,
// skipped when either operand is a power of two (Mitchell is exact there).
struct MbmMul {
  std::uint8_t correction_code = 0;  // [0, 15]
  friend bool operator==(const MbmMul&, const MbmMul&) = default;
};

struct SyntheticNormalMul {
  double mu = 0.0;
  double sigma = 0.0;  // >= 0
  friend bool operator==(const SyntheticNormalMul&, const SyntheticNormalMul&) = default;
};

class MultiplierModel {
 public:
  using Kind = std::variant<ExactMul, MitchellMul, MbmMul, SyntheticNormalMul>;

  MultiplierModel() = default;

  static MultiplierModel exact() { return MultiplierModel(ExactMul{}); }
  static MultiplierModel mitchell() { return MultiplierModel(MitchellMul{}); }
  // Throws DomainError unless code is in [0, 15].
  static MultiplierModel mbm(int correction_code);
  // Throws DomainError for negative or non-finite parameters.
  static MultiplierModel synthetic_normal(double mu, double sigma);

  const Kind& kind() const noexcept { return kind_; }
  bool is_exact() const noexcept { return std::holds_alternative<ExactMul>(kind_); }
  bool needs_noise() const noexcept { return std::holds_alternative<SyntheticNormalMul>(kind_); }
  // Mitchell and MBM act on binary32 bit patterns.
  bool is_bit_level() const noexcept {
    return std::holds_alternative<MitchellMul>(kind_) || std::holds_alternative<MbmMul>(kind_);
  }

  // Short human-readable label: "exact", "mitchell", "mbm[1010]", "normal(mu,sigma)".
  std::string label() const;

  friend bool operator==(const MultiplierModel&, const MultiplierModel&) = default;

 private:
  explicit MultiplierModel(Kind k) : kind_(k) {}
  Kind kind_{ExactMul{}};
};

struct MultiplyOptions {
  // Subnormal operands are treated as zero before approximation. When false,
  // they are renormalized and approximated like any other value.
  bool flush_subnormals = true;
};

// One scalar multiplication. z_exact is the reference product in binary64
// and epsilon == z_approx - z_exact.
//
// For the exact model the reference is the binary32-rounded product, so
// z_exact == z_approx and epsilon == 0: the exact model contributes no error
// at binary32 granularity.
struct ScalarMulRecord {
  float x = 0.0f;
  float y = 0.0f;
  double z_exact = 0.0;
  double z_approx = 0.0;
  double epsilon = 0.0;
};

// Throws DomainError on non-finite operands or a missing noise source for
// the synthetic model, NumericError if the approximate product overflows.
ScalarMulRecord multiply(const MultiplierModel& model, float x, float y,
                         const std::optional<NoiseSource>& noise = std::nullopt,
                         const MultiplyOptions& options = {});

// The value a GEMM accumulates for this product: the binary64 product of the
// (possibly flushed) operands plus the model's error. For Mitchell and MBM
// this equals z_approx exactly; for the exact model it is the exact binary64
// product.
double product_term(const MultiplierModel& model, float x, float y,
                    const std::optional<NoiseSource>& noise = std::nullopt,
                    const MultiplyOptions& options = {});

struct MantissaSum {
  double fraction = 0.0;  // in [0, 1)
  int exponent_bump = 0;  // 0 or 1
  friend bool operator==(const MantissaSum&, const MantissaSum&) = default;
};

// Log-domain mantissa addition. With s = f1 + f2 + correction:
//   s < 1  -> (s, 0)      approximates 2^(e1+e2) * (1 + s)
//   s >= 1 -> (s - 1, 1)  approximates 2^(e1+e2+1) * s
// When a large correction pushes s - 1 past the binade, the fraction
// saturates at the largest binary32 fraction.
// Throws DomainError if any argument is outside [0, 1).
MantissaSum mitchell_mantissa(double f1, double f2, double correction);

// The mantissa correction applied by an MBM code.
double mbm_correction(int correction_code);

struct ErrorTableEntry {
  double f1 = 0.0;
  double f2 = 0.0;
  double relative_error = 0.0;
};

// Enumerates all pairs of mantissas 1 + f with f = k / 2^bits and reports
// (approx - exact) / exact for each. The table holds 2^(2*bits) entries.
// Throws ResourceError for bits > 12, DomainError for the synthetic model
// (which has no deterministic table).
std::vector<ErrorTableEntry> exhaustive_error_table(const MultiplierModel& model,
                                                    int mantissa_bits);

}  // namespace axnorm
