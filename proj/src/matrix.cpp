#include "axnorm/matrix.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "axnorm/errors.hpp"
#include "axnorm/noise.hpp"

namespace axnorm {

namespace {

constexpr std::array<char, 8> kMagic{'A', 'X', 'N', 'M', 'A', 'T', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), 8);
  if (!in) throw IoError("matrix container truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) throw DomainError("matrix dimensions must be positive");
  data_.assign(rows * cols, 0.0);
}

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) throw DomainError("matrix dimensions must be positive");
  if (data_.size() != rows * cols) throw DomainError("matrix data length does not match dims");
  for (double v : data_) {
    if (!std::isfinite(v)) throw DomainError("matrix entries must be finite");
  }
}

RealMatrix RealMatrix::identity(std::size_t n) {
  RealMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

RealMatrix RealMatrix::random_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                      double lo, double hi) {
  RealMatrix m(rows, cols);
  CounterStream stream(seed, 0x3A7u);
  for (double& v : m.data_) v = static_cast<float>(lo + (hi - lo) * stream.uniform());
  return m;
}

RealMatrix RealMatrix::transposed() const {
  RealMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

void RealMatrix::quantize_to_binary32() noexcept {
  for (double& v : data_) v = static_cast<float>(v);
}

bool RealMatrix::is_binary32_exact() const noexcept {
  for (double v : data_) {
    if (static_cast<double>(static_cast<float>(v)) != v) return false;
  }
  return true;
}

void write_matrix_binary(const RealMatrix& m, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double v : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IoError("failed to write matrix container");
}

RealMatrix read_matrix_binary(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("not a matrix container (bad magic)");
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  if (rows == 0 || cols == 0 || rows > (std::uint64_t{1} << 32) || cols > (std::uint64_t{1} << 32)) {
    throw IoError("matrix container has invalid dimensions");
  }
  std::vector<double> data(rows * cols);
  for (double& v : data) v = std::bit_cast<double>(get_u64(in));
  return RealMatrix(rows, cols, std::move(data));
}

void save_matrix(const RealMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_matrix_binary(m, out);
}

RealMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_matrix_binary(in);
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string matrix_to_csv(const RealMatrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

RealMatrix matrix_from_csv(const std::string& text) {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      const auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc{} || res.ptr != comma) throw IoError("malformed CSV matrix entry");
      data.push_back(v);
      ++count;
      p = comma + 1;
    }
    if (rows == 0) cols = count;
    if (count != cols) throw IoError("ragged CSV matrix");
    ++rows;
  }
  if (rows == 0) throw IoError("empty CSV matrix");
  return RealMatrix(rows, cols, std::move(data));
}

}  // namespace axnorm
