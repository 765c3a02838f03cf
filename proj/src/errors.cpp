#include "selemb/errors.hpp"

namespace selemb {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::validation: return "validation";
    case ErrorCode::no_full_window: return "no_full_window";
    case ErrorCode::leakage: return "leakage";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::internal: return "internal";
  }
  return "internal";
}

}  // namespace selemb
