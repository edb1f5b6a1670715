#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace echometrics::cli {

inline constexpr std::string_view kVersion = "0.1.0";

// Exit codes: 0 success, 1 validation or usage error, 2 internal error.
int run(int argc, const char* const argv[], std::ostream& out, std::ostream& err);

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace echometrics::cli
