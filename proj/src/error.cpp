#include "whatif/error.hpp"

namespace whatif {

void fail(ErrorKind kind, std::string code, const std::string& message) {
  throw Error(kind, std::move(code), message);
}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::busy: return "busy";
  }
  return "unknown";
}

}  // namespace whatif
