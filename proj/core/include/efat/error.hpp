#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace efat {

// Base class for every error raised by the library. `kind()` is a short
// machine-readable tag that the CLI copies into its error record.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error("validation", message) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& message)
      : Error("dimension_mismatch", message) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error("format", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

// Raised when a retraining budget is requested for a fault rate whose
// interpolation bracket touches a table row that never met the constraint.
class UnreachableConstraint : public Error {
 public:
  UnreachableConstraint(const std::string& message,
                        std::vector<std::string> chip_ids = {})
      : Error("unreachable_constraint", message),
        chip_ids_(std::move(chip_ids)) {}

  const std::vector<std::string>& chip_ids() const noexcept {
    return chip_ids_;
  }

 private:
  std::vector<std::string> chip_ids_;
};

}  // namespace efat
