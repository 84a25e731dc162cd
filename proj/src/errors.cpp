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

#include "zeroherald/errors.h"

namespace zeroherald {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kOutOfDomain: return "out-of-domain";
    case ErrorKind::kDegenerateInput: return "degenerate-input";
    case ErrorKind::kNoSolution: return "no-solution";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kCapacity: return "capacity";
    case ErrorKind::kInsufficientReference: return "insufficient-reference";
    case ErrorKind::kClockGlitch: return "clock-glitch";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kUndefinedRate: return "undefined-rate";
    case ErrorKind::kFit: return "fit";
    case ErrorKind::kWrongShape: return "wrong-shape";
  }
  return "unknown";
}

}  // namespace zeroherald
