#include "axnorm/multiplier.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "axnorm/errors.hpp"

namespace axnorm {

namespace {

// Largest fraction with 23 explicit mantissa bits.
constexpr double kMaxFraction = 1.0 - 0x1.0p-23;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

float flush_if_subnormal(float v, const MultiplyOptions& options) {
  if (options.flush_subnormals && std::fpclassify(v) == FP_SUBNORMAL) {
    return std::copysign(0.0f, v);
  }
  return v;
}

// Splits |v| (finite, non-zero) into 1 + fraction and a binary exponent.
void split(float v, double& fraction, int& exponent) {
  int e = 0;
  const double m = std::frexp(std::fabs(static_cast<double>(v)), &e);  // [0.5, 1)
  fraction = 2.0 * m - 1.0;
  exponent = e - 1;
}

// Mitchell/MBM product of two binary32 values, rounded to binary32.
double log_domain_product(float x, float y, double correction) {
  double f1 = 0.0, f2 = 0.0;
  int e1 = 0, e2 = 0;
  split(x, f1, e1);
  split(y, f2, e2);
  // Mitchell is already exact when either mantissa fraction is zero, so the
  // correction is only added where there is an error to correct.
  if (f1 == 0.0 || f2 == 0.0) correction = 0.0;
  const MantissaSum sum = mitchell_mantissa(f1, f2, correction);
  const double magnitude = std::ldexp(1.0 + sum.fraction, e1 + e2 + sum.exponent_bump);
  const float rounded = static_cast<float>(magnitude);
  if (!std::isfinite(rounded)) {
    throw NumericError("approximate product overflows binary32");
  }
  const bool negative = std::signbit(x) != std::signbit(y);
  return negative ? -static_cast<double>(rounded) : static_cast<double>(rounded);
}

}  // namespace

MultiplierModel MultiplierModel::mbm(int correction_code) {
  if (correction_code < 0 || correction_code > 15) {
    throw DomainError("MBM correction code must be in [0, 15], got " +
                      std::to_string(correction_code));
  }
  return MultiplierModel(MbmMul{static_cast<std::uint8_t>(correction_code)});
}

MultiplierModel MultiplierModel::synthetic_normal(double mu, double sigma) {
  if (!std::isfinite(mu) || !std::isfinite(sigma)) {
    throw DomainError("synthetic normal parameters must be finite");
  }
  if (sigma < 0.0) {
    throw DomainError("synthetic normal sigma must be >= 0");
  }
  return MultiplierModel(SyntheticNormalMul{mu, sigma});
}

std::string MultiplierModel::label() const {
  return std::visit(
      Overloaded{
          [](const ExactMul&) { return std::string("exact"); },
          [](const MitchellMul&) { return std::string("mitchell"); },
          [](const MbmMul& m) {
            std::string bits(4, '0');
            for (int b = 0; b < 4; ++b) {
              if (m.correction_code & (1 << (3 - b))) bits[static_cast<std::size_t>(b)] = '1';
            }
            return "mbm[" + bits + "]";
          },
          [](const SyntheticNormalMul& s) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "normal(%.6g,%.6g)", s.mu, s.sigma);
            return std::string(buf);
          },
      },
      kind_);
}

double mbm_correction(int correction_code) {
  if (correction_code < 0 || correction_code > 15) {
    throw DomainError("MBM correction code must be in [0, 15]");
  }
  return correction_code * 0x1.0p-7;
}

MantissaSum mitchell_mantissa(double f1, double f2, double correction) {
  auto in_unit = [](double f) { return f >= 0.0 && f < 1.0; };
  if (!in_unit(f1) || !in_unit(f2) || !in_unit(correction)) {
    throw DomainError("mantissa fractions must lie in [0, 1)");
  }
  const double s = f1 + f2 + correction;
  if (s < 1.0) return {s, 0};
  return {std::fmin(s - 1.0, kMaxFraction), 1};
}

ScalarMulRecord multiply(const MultiplierModel& model, float x, float y,
                         const std::optional<NoiseSource>& noise, const MultiplyOptions& options) {
  if (!std::isfinite(x) || !std::isfinite(y)) {
    throw DomainError("multiply: operands must be finite");
  }
  ScalarMulRecord rec;
  rec.x = x;
  rec.y = y;

  std::visit(
      Overloaded{
          [&](const ExactMul&) {
            const float p = x * y;
            if (!std::isfinite(p)) throw NumericError("exact product overflows binary32");
            rec.z_exact = static_cast<double>(p);
            rec.z_approx = rec.z_exact;
          },
          [&](const SyntheticNormalMul& s) {
            if (!noise) throw DomainError("synthetic normal multiplier requires a noise source");
            rec.z_exact = static_cast<double>(x) * static_cast<double>(y);
            const double eps = s.sigma == 0.0 ? s.mu : s.mu + s.sigma * noise->standard_normal();
            rec.z_approx = rec.z_exact + eps;
          },
          [&](const auto& bit_level) {
            const float fx = flush_if_subnormal(x, options);
            const float fy = flush_if_subnormal(y, options);
            rec.z_exact = static_cast<double>(fx) * static_cast<double>(fy);
            if (fx == 0.0f || fy == 0.0f) {
              rec.z_approx = rec.z_exact;
              return;
            }
            double correction = 0.0;
            if constexpr (std::is_same_v<std::decay_t<decltype(bit_level)>, MbmMul>) {
              correction = mbm_correction(bit_level.correction_code);
            }
            rec.z_approx = log_domain_product(fx, fy, correction);
          },
      },
      model.kind());

  rec.epsilon = rec.z_approx - rec.z_exact;
  return rec;
}

double product_term(const MultiplierModel& model, float x, float y,
                    const std::optional<NoiseSource>& noise, const MultiplyOptions& options) {
  if (model.is_exact()) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw DomainError("multiply: operands must be finite");
    }
    return static_cast<double>(x) * static_cast<double>(y);
  }
  const ScalarMulRecord rec = multiply(model, x, y, noise, options);
  return rec.z_exact + rec.epsilon;
}

std::vector<ErrorTableEntry> exhaustive_error_table(const MultiplierModel& model,
                                                    int mantissa_bits) {
  if (mantissa_bits > 12) {
    throw ResourceError("exhaustive_error_table: at most 12 mantissa bits are supported");
  }
  if (mantissa_bits < 0) throw DomainError("exhaustive_error_table: negative bit count");
  if (model.needs_noise()) {
    throw DomainError("exhaustive_error_table: synthetic model has no deterministic table");
  }
  const std::size_t side = std::size_t{1} << mantissa_bits;
  const double step = std::ldexp(1.0, -mantissa_bits);
  std::vector<ErrorTableEntry> table;
  table.reserve(side * side);
  for (std::size_t a = 0; a < side; ++a) {
    for (std::size_t b = 0; b < side; ++b) {
      const double f1 = static_cast<double>(a) * step;
      const double f2 = static_cast<double>(b) * step;
      const ScalarMulRecord rec =
          multiply(model, static_cast<float>(1.0 + f1), static_cast<float>(1.0 + f2));
      table.push_back({f1, f2, rec.epsilon / rec.z_exact});
    }
  }
  return table;
}

}  // namespace axnorm
