#pragma once

#include <string>
#include <vector>

namespace softq::cli {

// Expands `--config <file>` into flags placed right after the subcommand.
// The file is a JSON object whose keys are long flag names without dashes,
// e.g. {"kg-dir": "data", "delta2": 0.05, "dense": true, "eval-types": ["1P"]}.
// Keys also given on the command line are dropped, so flags win. args[0] is
// the program name. Throws CLI::FileError or CLI::ConversionError.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace softq::cli
