#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace whatif::cli {

// Exit codes.
inline constexpr int ok = 0;
inline constexpr int validation_error = 2;
inline constexpr int runtime_error = 3;

// `args` excludes the program name. `in` backs "-" paths.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

// Resolves a user-typed column name: exact match first, then a
// case-insensitive match on alphanumerics only ("OpenMarketingEmail").
std::string resolve_name(const std::string& typed, const std::vector<std::string>& names);

}  // namespace whatif::cli
