#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sus {

enum class ErrorKind {
  kDimension,
  kDomain,
  kArity,
  kEvaluation,
  kLookup,
  kPolicy,
  kCapacity,
  kValidation,
  kFormat,
  kConfig,
  kInput,
  kStencil,
  kFit,
  kUndefinedPosition,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace sus
