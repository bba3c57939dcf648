#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bartvs::cli {

/// Runs one command line (args excludes the program name). Reports go to the
/// --out path or to `out`; failures print a one-line JSON error object to
/// `err` and return nonzero (2 for usage errors, 1 otherwise).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bartvs::cli
