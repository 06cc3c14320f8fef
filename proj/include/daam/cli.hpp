#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace daam {

/// Runs one `daam` command. `args` excludes the program name. Data goes to
/// the --out path (or `out` when none is given); diagnostics go to `err` as
/// "error[<code>]: <message>". Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace daam
