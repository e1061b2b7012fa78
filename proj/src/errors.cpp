#include "errors.hpp"

namespace ctmsm {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Config: return "config";
    case ErrorKind::Input: return "input";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::DegenerateFit: return "degenerate_fit";
    case ErrorKind::Optimizer: return "optimizer";
    case ErrorKind::Evaluation: return "evaluation";
    case ErrorKind::Diagnostics: return "diagnostics";
    case ErrorKind::Estimator: return "estimator";
    case ErrorKind::Io: return "io";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace ctmsm
