#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neuralign::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kNumerical = 3 };

/// Runs one command. `args` excludes the program name. Exit codes: 0 success,
/// 2 usage/config/input errors, 3 numerical or degenerate data, 1 internal failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace neuralign::cli
