#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace paddle {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated (shapes, ranges, symmetry).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// An iterative solver produced a non-finite iterate.
class NumericalDivergence : public Error {
 public:
  NumericalDivergence(const std::string& what, int iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// Not enough examples to satisfy a sampling request.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Input data is constant where a nonzero range is required.
class ConstantData : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined on the given input (e.g. all pairs are zero).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file content.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " at byte offset " + std::to_string(offset)),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace paddle
