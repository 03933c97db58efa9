#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hamr {

/// Runs one `hamr` command line (args exclude the program name). Returns the
/// process exit code: 0 on success, 2 on usage errors, 1 on any other error.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hamr
