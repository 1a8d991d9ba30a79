#pragma once

#include <stdexcept>
#include <string>

namespace l1reg {

/// Operand sizes do not agree.
class DimensionMismatch : public std::invalid_argument {
 public:
  explicit DimensionMismatch(const std::string& what) : std::invalid_argument(what) {}
};

/// An argument lies outside the domain of the operation (nonpositive lambda,
/// zero reference norm, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// N(A) and N(L) intersect nontrivially, so the regularized normal equations
/// are singular.
class InvertibilityError : public std::runtime_error {
 public:
  explicit InvertibilityError(const std::string& what) : std::runtime_error(what) {}
};

/// The operation is not defined for this kind of problem (e.g. the whiteness
/// principle on a 1-D signal).
class UnsupportedProblem : public std::logic_error {
 public:
  explicit UnsupportedProblem(const std::string& what) : std::logic_error(what) {}
};

/// A numerical routine failed to produce a usable result.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

inline void require_same_size(long a, long b, const char* what) {
  if (a != b) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(a) + " vs " +
                            std::to_string(b));
  }
}

}  // namespace l1reg
