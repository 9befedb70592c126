#pragma once

#include <stdexcept>
#include <string>

namespace nyscl {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  Io,
  CorruptPayload,
  VersionMismatch,
  FingerprintMismatch,
  Numerical,
};

// Single exception type; callers branch on kind() where they need to.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

inline void require_dims(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::DimensionMismatch, what);
}

}  // namespace nyscl
