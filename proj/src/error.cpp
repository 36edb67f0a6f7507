#include "sing/error.hpp"

namespace sing {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kInvalidState: return "invalid-state";
    case ErrorKind::kNumericalFailure: return "numerical-failure";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kUnsupportedFormat: return "unsupported-format";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kInvalidInput:
    case ErrorKind::kParse:
    case ErrorKind::kUnsupportedFormat:
      return 2;
    case ErrorKind::kInvalidState: return 3;
    case ErrorKind::kNumericalFailure: return 4;
    case ErrorKind::kIo: return 5;
  }
  return 1;
}

}  // namespace sing
