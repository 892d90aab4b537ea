#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nullconvex {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Largest chart dimension supported by the fixed-capacity jet storage.
inline constexpr int kMaxDim = 8;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the expression parser; `position` is a 0-based column in the source.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " at column " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Evaluation outside the domain of an elementary function (log, sqrt, division).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Singular metric, non-spacelike seed, non-null vector where one is required, ...
class GeometryError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Scenario validation failure; `field` is a dotted path into the document.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : Error(field + ": " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace nullconvex
