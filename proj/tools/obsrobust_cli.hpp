#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace obsrobust::cli {

/// Entry point behind main(); takes argv-style arguments without the program
/// name. Machine output goes to `out` (or --out), human summaries to `err`.
/// Exit codes: 0 success, 1 usage error, 2 model/policy error, 3 numeric
/// failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace obsrobust::cli
