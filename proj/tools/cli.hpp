#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hiermatch::cli {

// Entry point shared by the hiermatch binary and the CLI tests. Returns the
// process exit code: 0 on success, 2 on a usage error, 1 on any other error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hiermatch::cli
