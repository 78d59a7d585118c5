#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace riskrank {

/// Entry point for the `riskrank` binary. `args[0]` is the program name.
/// Returns 0 on success, 1 on a usage error (help text on stderr) and 2 on
/// a runtime error, reported as one line: `riskrank: error[<kind>]: <message>`.
int run_cli(const std::vector<std::string>& args);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace riskrank
