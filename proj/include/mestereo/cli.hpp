#pragma once

#include <ostream>

namespace mestereo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitValidation = 2;

/// Entry point of the `mestereo` tool. Normal output goes to `out`, the
/// resolved configuration and diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mestereo::cli
