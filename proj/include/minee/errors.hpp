#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace minee {

/// A caller broke a documented precondition (shape mismatch, bad config).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : std::runtime_error(what), iteration_(iteration) {}

  /// Training step at which the failure happened (-1 if outside a run).
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

/// A data point lies outside the support of the reference density.
class SupportViolation : public std::domain_error {
 public:
  SupportViolation(const std::string& what, std::size_t row)
      : std::domain_error(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Bounding box with a zero-width side.
class DegenerateBox : public std::domain_error {
 public:
  DegenerateBox(const std::string& what, std::size_t column)
      : std::domain_error(what), column_(column) {}
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

/// Quadrature did not settle under grid refinement.
class UnconvergedQuadrature : public std::runtime_error {
 public:
  UnconvergedQuadrature(const std::string& what, double coarse, double fine)
      : std::runtime_error(what), coarse_(coarse), fine_(fine) {}
  double coarse() const { return coarse_; }
  double fine() const { return fine_; }

 private:
  double coarse_;
  double fine_;
};

}  // namespace minee
