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

#ifndef OODBENCH_REPORT_HPP_
#define OODBENCH_REPORT_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include "oodbench/types.hpp"

namespace oodbench {

inline constexpr std::string_view kToolName = "oodbench";
inline constexpr std::string_view kToolVersion = "1.0.0";

/// Long format, one line per (method, dataset, metric):
///   method,dataset,metric,value
/// Values are printed with 6 significant digits ("%.6g"), so parsing the
/// CSV and printing it again reproduces it byte for byte.
std::string render_csv(const EvalReport& report);

/// Inverse of render_csv. Mode is inferred from the metric names. Metadata
/// fields are left empty. Throws std::invalid_argument on malformed input.
EvalReport parse_csv(std::string_view text);

/// Table with one row per method and one column per dataset plus Average.
/// Each cell joins the metrics with " ‖ " as percentages with two decimals.
std::string render_markdown(const EvalReport& report);

/// JSON sidecar: tool version, mode, config digest, thresholds, failures.
std::string render_metadata(const EvalReport& report);

/// Writes report.csv, report.md and report.json into `dir` (created if
/// needed), each via temp file and rename.
void write_report_dir(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace oodbench

#endif  // OODBENCH_REPORT_HPP_
