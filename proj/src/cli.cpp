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

#include "oodbench/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "oodbench/config.hpp"
#include "oodbench/harness.hpp"
#include "oodbench/io.hpp"
#include "oodbench/kernels.hpp"
#include "oodbench/pack.hpp"
#include "oodbench/report.hpp"
#include "oodbench/scorers.hpp"
#include "oodbench/synthetic.hpp"

namespace oodbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit_error(std::ostream& err, std::string_view kind, std::string_view message, json extra = json::object()) {
  extra["error"] = std::string(kind);
  extra["message"] = std::string(message);
  err << extra.dump() << '\n';
}

int cmd_validate(const std::string& pack_path, const std::string& head_path, std::ostream& out, std::ostream& err) {
  const auto head = io::read_head(head_path);
  const auto pack = io::read_pack(pack_path);
  const auto violations = validate_pack(pack, head);
  for (const auto& v : violations) emit_error(err, "violation", v, {{"path", pack_path}});
  out << json{{"path", pack_path},
              {"dataset_id", pack.dataset_id},
              {"kind", std::string(to_string(pack.kind))},
              {"n", pack.rows()},
              {"valid", violations.empty()},
              {"violations", violations.size()}}
             .dump()
      << '\n';
  return violations.empty() ? kExitOk : kExitValidation;
}

int cmd_fit(const std::string& train_path, const std::string& head_path, const std::string& config_path,
            const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto cfg = read_eval_config(config_path, /*require_inputs=*/false);
  const auto head = io::read_head(head_path);
  const auto train = io::read_pack(train_path);
  const auto violations = validate_pack(train, head);
  if (!violations.empty()) throw ValidationError(violations.front(), violations);

  const auto restricted = train.select_rows(correctness(train).correct_rows());
  const auto result = try_fit_all(restricted, head, cfg.scorer, cfg.methods, kernels::resolve_workers(cfg.workers));
  fs::create_directories(out_dir);
  json summary = {{"state_dir", out_dir}, {"train_rows", train.rows()}, {"correct_rows", restricted.rows()}};
  for (auto m : cfg.methods) {
    const auto name = std::string(to_string(m));
    if (auto it = result.fitted.find(m); it != result.fitted.end()) {
      io::write_state(it->second, fs::path(out_dir) / io::state_file_name(m));
      summary["fitted"].push_back(name);
    } else {
      emit_error(err, "fit_failed", result.failures.at(m), {{"method", name}});
      summary["failed"].push_back(name);
    }
  }
  out << summary.dump() << '\n';
  return result.fitted.empty() ? kExitRuntime : kExitOk;
}

int cmd_score(const std::string& pack_path, const std::string& state_dir, const std::string& method_name,
              const std::string& out_path, std::ostream& out) {
  const auto method = parse_method(method_name);
  if (!method) throw ConfigError(fmt::format("unknown method \"{}\"", method_name));
  const auto scorer = io::read_state(fs::path(state_dir) / io::state_file_name(*method));
  const auto pack = io::read_pack(pack_path);
  const auto violations = validate_pack(pack);
  if (!violations.empty()) throw ValidationError(violations.front(), violations);
  const auto scores = kernels::score_pack(scorer, pack, kernels::resolve_workers(1));
  io::write_scores(scores, out_path);
  out << json{{"method", method_name}, {"dataset_id", pack.dataset_id}, {"n", scores.scores.size()}, {"out", out_path}}
             .dump()
      << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& config_path, std::string out_dir, const std::string& mode,
             const std::string& id_definition, const std::string& from_scores, std::ostream& out, std::ostream& err) {
  auto cfg = read_eval_config(config_path);
  if (!mode.empty()) {
    const auto m = parse_eval_mode(mode);
    if (!m) throw ConfigError(fmt::format("unknown mode \"{}\"", mode));
    cfg.mode = *m;
  }
  if (!id_definition.empty()) {
    const auto d = parse_id_definition(id_definition);
    if (!d) throw ConfigError(fmt::format("unknown id definition \"{}\"", id_definition));
    cfg.id_definition = *d;
  }
  if (out_dir.empty()) out_dir = cfg.output_dir.empty() ? std::string() : cfg.resolve(cfg.output_dir).string();
  if (out_dir.empty()) throw ConfigError("no output directory: pass --out or set output_dir");

  std::optional<fs::path> scores_dir;
  if (!from_scores.empty()) scores_dir = from_scores;
  const auto report = run_evaluation(cfg, scores_dir);
  write_report_dir(report, out_dir);
  for (const auto& [method, message] : report.failures) emit_error(err, "method_failed", message, {{"method", method}});
  out << json{{"report_dir", out_dir}, {"mode", std::string(to_string(report.mode))}, {"rows", report.rows.size()}}.dump()
      << '\n';
  return kExitOk;
}

int cmd_report(const std::string& in_dir, const std::string& format, std::ostream& out) {
  const auto bytes = io::read_file(fs::path(in_dir) / "report.csv");
  const auto report = parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  out << (format == "md" ? render_markdown(report) : render_csv(report));
  return kExitOk;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, std::ostream& out) {
  synthetic::Spec spec;
  spec.seed = seed;
  const auto bench = synthetic::generate(spec);
  synthetic::write_fixture(bench, out_dir);
  out << json{{"fixture_dir", out_dir}, {"seed", seed}, {"pooled_sd", bench.pooled_sd}}.dump() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-hoc OOD scoring and human-centric evaluation", "oodbench"};
  app.require_subcommand(1);

  std::string pack_path, head_path, train_path, config_path, out_path, state_dir, method, mode, id_def, from_scores,
      in_dir, format = "csv";
  std::uint64_t seed = synthetic::Spec{}.seed;

  auto* validate = app.add_subcommand("validate", "Check a feature pack against a classifier head");
  validate->add_option("pack", pack_path, "Feature pack file")->required();
  validate->add_option("--head", head_path, "Classifier head file")->required();

  auto* fit = app.add_subcommand("fit", "Fit scorers on the correctly classified training rows");
  fit->add_option("--train", train_path, "ID training pack")->required();
  fit->add_option("--head", head_path, "Classifier head file")->required();
  fit->add_option("--config", config_path, "Config JSON (methods and scorer settings)")->required();
  fit->add_option("--out", out_path, "State directory")->required();

  auto* score = app.add_subcommand("score", "Score a pack with one fitted method");
  score->add_option("--pack", pack_path, "Feature pack file")->required();
  score->add_option("--state", state_dir, "State directory written by fit")->required();
  score->add_option("--method", method, "Method name")->required();
  score->add_option("--out", out_path, "Score file to write")->required();

  auto* eval = app.add_subcommand("eval", "Run the evaluation and write a report directory");
  eval->add_option("--config", config_path, "Evaluation config JSON")->required();
  eval->add_option("--out", out_path, "Report directory");
  eval->add_option("--mode", mode, "human_centric | conventional");
  eval->add_option("--id-definition", id_def, "Conventional ID set: all | correct");
  eval->add_option("--from-scores", from_scores, "Directory of <method>__<dataset>.scores files");

  auto* report = app.add_subcommand("report", "Render a report directory");
  report->add_option("--in", in_dir, "Report directory")->required();
  report->add_option("--format", format, "csv | md")->check(CLI::IsMember({"csv", "md"}));

  auto* synth = app.add_subcommand("synth", "Write the synthetic Gaussian fixture");
  synth->add_option("--out", out_path, "Fixture directory")->required();
  synth->add_option("--seed", seed, "Generator seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "usage", e.what());
    err << app.help();
    return kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(pack_path, head_path, out, err);
    if (*fit) return cmd_fit(train_path, head_path, config_path, out_path, out, err);
    if (*score) return cmd_score(pack_path, state_dir, method, out_path, out);
    if (*eval) return cmd_eval(config_path, out_path, mode, id_def, from_scores, out, err);
    if (*report) return cmd_report(in_dir, format, out);
    if (*synth) return cmd_synth(out_path, seed, out);
  } catch (const io::FormatError& e) {
    emit_error(err, io::to_string(e.kind()), e.what(), {{"offset", e.offset()}});
    return kExitValidation;
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) emit_error(err, "violation", v);
    return kExitValidation;
  } catch (const ConfigError& e) {
    emit_error(err, "config", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    emit_error(err, "runtime", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace oodbench::cli
