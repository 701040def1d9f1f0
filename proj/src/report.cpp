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

#include "oodbench/report.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "oodbench/io.hpp"

namespace oodbench {

namespace {

constexpr std::string_view kCsvHeader = "method,dataset,metric,value";

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw std::invalid_argument("csv: unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

std::string format_value(double v) { return fmt::format("{:.6g}", v); }

}  // namespace

std::string render_csv(const EvalReport& report) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& row : report.rows) {
    for (std::size_t m = 0; m < report.metric_names.size(); ++m) {
      out += fmt::format("{},{},{},{}\n", to_string(row.method), csv_field(row.dataset_id),
                         csv_field(report.metric_names[m]), format_value(row.values.at(m)));
    }
  }
  return out;
}

EvalReport parse_csv(std::string_view text) {
  EvalReport report;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kCsvHeader) throw std::invalid_argument("csv: missing header line");
      saw_header = true;
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) throw std::invalid_argument(fmt::format("csv line {}: expected 4 fields", line_no));
    const auto method = parse_method(fields[0]);
    if (!method) throw std::invalid_argument(fmt::format("csv line {}: unknown method \"{}\"", line_no, fields[0]));
    double value = 0.0;
    const auto& vtext = fields[3];
    const auto [ptr, ec] = std::from_chars(vtext.data(), vtext.data() + vtext.size(), value);
    if (ec != std::errc() || ptr != vtext.data() + vtext.size()) {
      throw std::invalid_argument(fmt::format("csv line {}: bad value \"{}\"", line_no, vtext));
    }

    const auto& dataset = fields[1];
    if (report.rows.empty() || report.rows.back().method != *method || report.rows.back().dataset_id != dataset) {
      if (report.find(*method, dataset)) {
        throw std::invalid_argument(fmt::format("csv line {}: duplicate row {}/{}", line_no, fields[0], dataset));
      }
      report.rows.push_back({*method, dataset, {}});
    }
    if (dataset != kAverageRow &&
        std::find(report.datasets.begin(), report.datasets.end(), dataset) == report.datasets.end()) {
      report.datasets.push_back(dataset);
    }

    const auto& metric = fields[2];
    auto mit = std::find(report.metric_names.begin(), report.metric_names.end(), metric);
    const auto metric_index = static_cast<std::size_t>(mit - report.metric_names.begin());
    if (mit == report.metric_names.end()) {
      if (report.rows.size() > 1) {
        throw std::invalid_argument(fmt::format("csv line {}: metric \"{}\" first seen after the first row", line_no, metric));
      }
      report.metric_names.push_back(metric);
    }
    auto& row = report.rows.back();
    if (row.values.size() != metric_index) {
      throw std::invalid_argument(fmt::format("csv line {}: metrics out of order", line_no));
    }
    row.values.push_back(value);
  }
  if (!saw_header) throw std::invalid_argument("csv: empty input");
  for (const auto& row : report.rows) {
    if (row.values.size() != report.metric_names.size()) {
      throw std::invalid_argument(fmt::format("csv: row {}/{} lacks some metrics", to_string(row.method), row.dataset_id));
    }
  }
  const bool human = !report.metric_names.empty() && report.metric_names.front().starts_with("DER");
  report.mode = human ? EvalMode::HumanCentric : EvalMode::Conventional;
  return report;
}

std::string render_markdown(const EvalReport& report) {
  std::string metrics;
  for (std::size_t i = 0; i < report.metric_names.size(); ++i) {
    metrics += (i ? " ‖ " : "") + report.metric_names[i];
  }
  std::string out = fmt::format("{} evaluation ( {} ), percentages\n\n",
                                report.mode == EvalMode::HumanCentric ? "Human-centric" : "Conventional", metrics);
  std::vector<std::string> columns = report.datasets;
  columns.emplace_back(kAverageRow);

  out += "| Method |";
  for (const auto& c : columns) out += fmt::format(" {} |", c);
  out += "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out += "---|";
  out += '\n';

  auto methods = report.methods();
  for (const auto& [name, _] : report.failures) {
    if (auto m = parse_method(name); m && std::find(methods.begin(), methods.end(), *m) == methods.end()) {
      methods.push_back(*m);
    }
  }
  for (auto method : methods) {
    out += fmt::format("| {} |", display_name(method));
    for (const auto& c : columns) {
      const auto* row = report.find(method, c);
      if (!row) {
        out += " n/a |";
        continue;
      }
      std::string cell;
      for (std::size_t i = 0; i < row->values.size(); ++i) {
        cell += fmt::format("{}{:.2f}", i ? " ‖ " : "", 100.0 * row->values[i]);
      }
      out += fmt::format(" {} |", cell);
    }
    out += '\n';
  }
  return out;
}

std::string render_metadata(const EvalReport& report) {
  using nlohmann::json;
  json thresholds = json::object();
  for (const auto& [method, per_metric] : report.thresholds) {
    json entry = json::object();
    for (const auto& [metric, value] : per_metric) {
      entry[metric] = value ? json(*value) : json("below_all");
    }
    thresholds[method] = entry;
  }
  json doc = {
      {"tool", std::string(kToolName)},
      {"version", std::string(kToolVersion)},
      {"mode", std::string(to_string(report.mode))},
      {"model_id", report.model_id},
      {"config_digest", report.config_digest},
      {"metrics", report.metric_names},
      {"datasets", report.datasets},
      {"thresholds", thresholds},
      {"failures", report.failures},
      {"csv_value_format", "%.6g"},
  };
  doc["id_definition"] = report.id_definition ? json(std::string(to_string(*report.id_definition))) : json(nullptr);
  return doc.dump(2) + "\n";
}

void write_report_dir(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "report.csv", render_csv(report));
  io::write_file_atomic(dir / "report.md", render_markdown(report));
  io::write_file_atomic(dir / "report.json", render_metadata(report));
}

}  // namespace oodbench
