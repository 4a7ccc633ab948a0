#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace axnorm {

// Dense row-major binary64 matrix.
class RealMatrix {
 public:
  RealMatrix() = default;
  // Zero-filled. Throws DomainError for a zero dimension.
  RealMatrix(std::size_t rows, std::size_t cols);
  // Throws DomainError if data.size() != rows * cols or any entry is non-finite.
  RealMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static RealMatrix identity(std::size_t n);
  // Entries uniform in [lo, hi), rounded to binary32, from a counter stream.
  static RealMatrix random_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                   double lo = -1.0, double hi = 1.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  RealMatrix transposed() const;

  // Rounds every entry to the nearest binary32 value.
  void quantize_to_binary32() noexcept;
  bool is_binary32_exact() const noexcept;

  friend bool operator==(const RealMatrix&, const RealMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Binary container: 8-byte magic "AXNMAT01", rows and cols as little-endian
// uint64, then rows*cols little-endian binary64 values in row-major order.
void write_matrix_binary(const RealMatrix& m, std::ostream& out);
RealMatrix read_matrix_binary(std::istream& in);
void save_matrix(const RealMatrix& m, const std::filesystem::path& path);
RealMatrix load_matrix(const std::filesystem::path& path);

// One row per line, comma separated, shortest round-trip decimal form.
std::string matrix_to_csv(const RealMatrix& m);
RealMatrix matrix_from_csv(const std::string& text);

// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace axnorm
