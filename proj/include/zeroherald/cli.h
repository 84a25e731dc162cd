// Copyright 2026 The zeroherald Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: model, simulate, analyze, scan and compare.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "zeroherald/errors.h"

namespace zeroherald::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,       // bad flags, or out-of-range model parameters
  kExitValidation = 3,  // config or parameter validation
  kExitFormat = 4,      // unreadable, malformed or inconsistent tag/table files
  kExitNumerical = 5,   // fits, inversions, undefined rates
};

int exit_code_for(ErrorKind kind);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Runs one invocation. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zeroherald::cli
