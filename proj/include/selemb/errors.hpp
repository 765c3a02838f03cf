#pragma once

#include <stdexcept>
#include <string>

namespace selemb {

// Stable error categories. They map 1:1 onto the C API status codes and
// onto the CLI's machine-parseable error line.
enum class ErrorCode {
  invalid_argument,
  parse,
  io,
  validation,
  no_full_window,
  leakage,
  divergence,
  internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace selemb
