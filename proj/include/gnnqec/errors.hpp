#pragma once

#include <stdexcept>
#include <string>

namespace gnnqec {

// Base class of every error the library raises. `kind()` is a stable
// machine-readable tag used by the CLI when it prints structured diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Precondition violation on a value (bad distance, probability out of range...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message) : Error("domain_error", message) {}
};

// A file that is not parseable or misses required fields.
class MalformedFileError : public Error {
 public:
  explicit MalformedFileError(const std::string& message)
      : Error("malformed_file", message) {}
};

// Layer weights whose dimensions disagree with the layer specification.
class ShapeMismatchError : public Error {
 public:
  explicit ShapeMismatchError(const std::string& message)
      : Error("shape_mismatch", message) {}
};

class UnknownLayerKindError : public Error {
 public:
  explicit UnknownLayerKindError(const std::string& message)
      : Error("unknown_layer_kind", message) {}
};

// A model configuration that breaks ordering or width invariants.
class InvalidConfigError : public Error {
 public:
  explicit InvalidConfigError(const std::string& message)
      : Error("invalid_config", message) {}
};

// A pruning plan that cannot be applied to the model it targets.
class PruningError : public Error {
 public:
  explicit PruningError(const std::string& message) : Error("pruning_error", message) {}
};

// Hardware resource demand that the configured device cannot satisfy.
class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& message) : Error("resource_error", message) {}
};

}  // namespace gnnqec
