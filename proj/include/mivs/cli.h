#pragma once

#include <string>
#include <vector>

namespace mivs::cli {

enum ExitCode { Ok = 0, Usage = 2, Io = 3, Compute = 4 };

// Parses and runs one subcommand (generate, ampute, impute, select, simulate,
// metrics, replay). Failures print a JSON object on stderr and map to ExitCode.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

const char* version();

} // namespace mivs::cli
