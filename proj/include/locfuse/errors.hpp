#pragma once

#include <stdexcept>
#include <string>

namespace locfuse {

/// Base of every error thrown by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error("domain_error", what) {}
};

struct PlacementError : Error {
  explicit PlacementError(const std::string& what) : Error("placement_error", what) {}
};

struct IndexError : Error {
  explicit IndexError(const std::string& what) : Error("index_error", what) {}
};

struct StateError : Error {
  explicit StateError(const std::string& what) : Error("state_error", what) {}
};

struct EvaluationError : Error {
  explicit EvaluationError(const std::string& what) : Error("evaluation_error", what) {}
};

struct EstimationError : Error {
  explicit EstimationError(const std::string& what) : Error("estimation_error", what) {}
};

struct InitializationError : Error {
  explicit InitializationError(const std::string& what)
      : Error("initialization_error", what) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error("parse_error", what) {}
};

}  // namespace locfuse
