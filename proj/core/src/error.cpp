#include "sus/error.hpp"

namespace sus {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kArity: return "arity error";
    case ErrorKind::kEvaluation: return "evaluation error";
    case ErrorKind::kLookup: return "lookup error";
    case ErrorKind::kPolicy: return "policy error";
    case ErrorKind::kCapacity: return "capacity error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kInput: return "input error";
    case ErrorKind::kStencil: return "stencil error";
    case ErrorKind::kFit: return "fit error";
    case ErrorKind::kUndefinedPosition: return "undefined-position error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace sus
