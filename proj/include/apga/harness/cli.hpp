#pragma once

#include <string>
#include <vector>

namespace apga::harness {

/// Entry point behind the `apga` binary; also driven directly by tests.
/// Returns the process exit code: 0 success, 1 runtime failure, 2 usage or
/// configuration error.
int run_cli(const std::vector<std::string>& args);

}  // namespace apga::harness
