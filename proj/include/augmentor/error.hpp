#pragma once

#include <stdexcept>
#include <string>

namespace augmentor {

// Which exit code a failure maps to at the command line.
enum class ErrorCategory {
  kPrecondition,  // invalid input, violated invariant, missing data
  kExternal,      // network, LLM provider, external trainer process
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message),
        category_(category),
        kind_(std::move(kind)),
        detail_(message) {}

  ErrorCategory category() const noexcept { return category_; }
  // Short machine-readable tag such as "MalformedRecord" or "FixtureMiss".
  const std::string& kind() const noexcept { return kind_; }
  // The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCategory category_;
  std::string kind_;
  std::string detail_;
};

class PreconditionError : public Error {
 public:
  PreconditionError(std::string kind, const std::string& message)
      : Error(ErrorCategory::kPrecondition, std::move(kind), message) {}
};

class ExternalError : public Error {
 public:
  ExternalError(std::string kind, const std::string& message)
      : Error(ErrorCategory::kExternal, std::move(kind), message) {}
};

}  // namespace augmentor
