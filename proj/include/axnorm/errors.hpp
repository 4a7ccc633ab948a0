#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace axnorm {

// Invalid argument values: out-of-range parameters, mismatched shapes,
// non-finite operands.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A computation produced a non-finite value. Carries the output element
// (row, col) where it was first observed when that is meaningful.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t row = 0, std::size_t col = 0)
      : std::runtime_error(what), row_(row), col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was invoked on state that does not satisfy its contract,
// e.g. an empty result set or an untrained model.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace axnorm
