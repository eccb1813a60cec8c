#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dspear::cli {

/// Parses `args` (argv without the program name) and runs the selected verb.
/// Returns the process exit status: 0 ok, 2 config, 3 numeric, 4 io.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dspear::cli
