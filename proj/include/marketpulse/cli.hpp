#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "marketpulse/error.hpp"

namespace marketpulse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// 2 for I/O and transport failures, 1 for everything else.
int exit_code_for(ErrorCode code) noexcept;

/// Runs one command. `args[0]` is the program name. Reports go to `out`
/// unless --out names a file; diagnostics and usage text go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace marketpulse::cli
