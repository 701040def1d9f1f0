// Copyright 2026 The oodbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OODBENCH_CLI_HPP_
#define OODBENCH_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace oodbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs the command line. `args` excludes the program name. Errors are
/// written to `err` as single-line JSON objects.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oodbench::cli

#endif  // OODBENCH_CLI_HPP_
