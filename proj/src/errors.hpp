#pragma once

#include <stdexcept>
#include <string>

namespace ctmsm {

enum class ErrorKind {
  Domain,        // argument outside the mathematical domain of an operation
  Parameter,     // model parameter outside its support
  Config,        // inconsistent scenario / study / sampler configuration
  Input,         // caller-supplied data is unusable (missing u, bad weights)
  Parse,         // malformed file content
  Validation,    // well-formed content that violates a data invariant
  DegenerateFit, // design matrix cannot identify the parameters
  Optimizer,     // non-convergence or non-finite objective
  Evaluation,    // non-finite likelihood term
  Diagnostics,   // sampler health gate failed
  Estimator,     // too many replicate failures
  Io,
  Internal,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace ctmsm
