#pragma once

#include <string>

namespace scanpath {

inline constexpr const char* kToolName = "scanfisher";
inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 other errors, 2 command line or input parse
/// errors, 3 model fitting failed, 4 leakage check failed.
int run_cli(int argc, char** argv);

}  // namespace scanpath
