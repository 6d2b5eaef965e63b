#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace whatif {

// Coarse error classes. The HTTP layer and the CLI map these onto status
// codes and exit codes respectively.
enum class ErrorKind {
  invalid_input,  // malformed data or request (422 / exit 2)
  not_found,      // unknown dataset, session, row (404)
  conflict,       // e.g. single-class KPI (409)
  numerical,      // singular system and similar (422)
  timeout,        // wall-clock limit hit (408)
  busy,           // per-session slot taken (429)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Short machine-readable identifier, e.g. "no_data_rows".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

[[noreturn]] void fail(ErrorKind kind, std::string code, const std::string& message);

inline void require(bool condition, std::string_view code, const std::string& message) {
  if (!condition) fail(ErrorKind::invalid_input, std::string(code), message);
}

std::string_view to_string(ErrorKind kind) noexcept;

}  // namespace whatif
