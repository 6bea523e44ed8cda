#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kolmo/error.hpp"

namespace kolmo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 2;
inline constexpr int kExitUsage = 3;
inline constexpr int kExitNumerical = 4;

/// Exit code for a library error category.
int exit_code(ErrorKind kind);

/// Runs one command; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace kolmo::cli
