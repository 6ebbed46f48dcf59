#pragma once

#include <string>
#include <vector>

namespace erta::cli {

// Stable exit-code contract.
constexpr int kOk = 0;
constexpr int kFailure = 1;      // property failure or module error
constexpr int kConfigError = 2;  // missing/invalid config or usage error
constexpr int kCompatError = 3;  // policy/config incompatibility
constexpr int kEmptyInput = 4;   // nothing to aggregate

// Commands: calibrate | run | sweep | verify | report.
// Global flags: --config PATH, --out DIR, --workers N, --quiet.
// ERTA_OUT_DIR supplies the default output root.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace erta::cli
