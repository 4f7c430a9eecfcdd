#pragma once

#include <stdexcept>
#include <string>

namespace histo {

/// Failure classes. The CLI maps each to a distinct exit code.
enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kFormat,
  kConfig,
  kData,
};

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

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::kInvalidArgument, what);
}

}  // namespace histo
