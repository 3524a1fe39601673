#pragma once

// Batch command-line front end. Exit codes: 0 success, 2 data or input
// error, 3 sampler failure, 4 diagnostics failure under --strict.

#include <iosfwd>
#include <string>
#include <vector>

namespace gpmix {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 2;
inline constexpr int kExitSampler = 3;
inline constexpr int kExitStrict = 4;

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gpmix
