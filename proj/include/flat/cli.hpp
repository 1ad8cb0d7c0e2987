#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flat {

/// Entry point of the `flat` tool. `args` excludes the program name.
/// Returns the process exit code. Failures are reported on `err` as one JSON
/// object {"error": {"kind", "message", ...}}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flat
