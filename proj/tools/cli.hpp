#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pkmkit/error.hpp"

namespace pkm::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kUnreachable = 3,
  kSingular = 4,
  kNoAssembly = 5,
};

int exit_code(ErrorKind kind) noexcept;

/// Comma-separated decimals, parsed without locale.
std::vector<double> parse_list(const std::string& text, const char* what);

/// Resolves a config argument: the path itself if it exists, otherwise the
/// same name (with or without ".json") in each PKMKIT_CONFIG_DIR entry and
/// then in the bundled config directory.
std::filesystem::path resolve_config(const std::string& arg);

/// Runs one command line. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pkm::cli
