// Command-line front end, exposed as a function so tests can drive it
// in-process.  Subcommands: analyze, corpus, eval, sample, rules.
//
// Exit codes: 0 success / below threshold, 1 findings at or above the
// --fail-on severity, 2 usage or input error, 3 internal error.
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace llmlint {

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace llmlint
