#pragma once

#include <stdexcept>
#include <string>

namespace compstyle {

/// Base of every error thrown by the toolkit. `kind()` is the machine-readable
/// class printed by the CLI on failure.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("ConfigError", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("IoError", m) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error("ValidationError", m) {}
};

struct DegenerateSampleError : Error {
  explicit DegenerateSampleError(const std::string& m) : Error("DegenerateSampleError", m) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& m) : Error("NumericalError", m) {}
};

}  // namespace compstyle
