#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace psearch::cli {

// Runs one command line (args excludes the program name). Returns the
// process exit status; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Parses a machine-readable report line ("key=value key=value ...").
std::map<std::string, std::string> parse_report_line(const std::string& line);

}  // namespace psearch::cli
