#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qaforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

// args excludes the program name. Machine-readable results go to `out` unless
// written to a file; summaries and diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qaforge
