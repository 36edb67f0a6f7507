#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sing {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidInput,
  kInvalidState,
  kNumericalFailure,
  kIo,
  kParse,
  kUnsupportedFormat,
};

std::string_view to_string(ErrorKind kind);

// Process exit code used by the command-line front end for each error kind.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorKind::kInvalidArgument, message);
}

}  // namespace sing
