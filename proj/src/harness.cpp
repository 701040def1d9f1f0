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

#include "oodbench/harness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "oodbench/config.hpp"
#include "oodbench/io.hpp"
#include "oodbench/kernels.hpp"
#include "oodbench/metrics.hpp"
#include "oodbench/numerics.hpp"
#include "oodbench/pack.hpp"

namespace oodbench {

namespace {

std::vector<double> select(const std::vector<double>& values, std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(values.at(r));
  return out;
}

std::vector<double> sorted_keep_fractions(const std::vector<double>& fractions) {
  std::vector<double> out = fractions;
  std::sort(out.begin(), out.end(), std::greater<>());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void fill_metadata(EvalReport& report, const EvalInputs& inputs, const EvalConfig& cfg,
                   const ScoreTable& table) {
  report.model_id = inputs.head.model_id.empty() ? inputs.train.model_id : inputs.head.model_id;
  report.config_digest = config_digest(cfg);
  for (const auto& [method, error] : table.failures) report.failures[std::string(to_string(method))] = error;
}

}  // namespace

std::filesystem::path EvalConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void EvalConfig::validate() const {
  if (head_path.empty()) throw std::invalid_argument("config: head_path is required");
  if (train_path.empty()) throw std::invalid_argument("config: train_path is required");
  if (tests.empty()) throw std::invalid_argument("config: at least one test pack is required");
  if (methods.empty()) throw std::invalid_argument("config: at least one method is required");
  if (keep_fractions.empty()) throw std::invalid_argument("config: keep_fractions must not be empty");
  for (double p : keep_fractions) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument(fmt::format("config: keep fraction {} outside (0, 1)", p));
  }
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  scorer.validate();
}

std::string der_metric_name(double keep_fraction) { return fmt::format("DER{:g}", 100.0 * keep_fraction); }

EvalInputs load_inputs(const EvalConfig& cfg) {
  EvalInputs in;
  in.head = io::read_head(cfg.resolve(cfg.head_path));
  in.train = io::read_pack(cfg.resolve(cfg.train_path));
  for (const auto& spec : cfg.tests) in.tests.push_back(io::read_pack(cfg.resolve(spec.path)));

  std::vector<std::string> violations;
  auto check = [&](const FeaturePack& pack) {
    for (auto& v : validate_pack(pack, in.head)) violations.push_back(fmt::format("{}: {}", pack.dataset_id, v));
  };
  check(in.train);
  if (in.train.kind != DatasetKind::IdTrain) {
    violations.push_back(fmt::format("{}: training pack has kind {}, expected id_train", in.train.dataset_id,
                                     to_string(in.train.kind)));
  }
  std::set<std::string> ids{in.train.dataset_id};
  for (std::size_t i = 0; i < in.tests.size(); ++i) {
    const auto& pack = in.tests[i];
    check(pack);
    if (pack.kind != cfg.tests[i].kind) {
      violations.push_back(fmt::format("{}: config says kind {}, file says {}", pack.dataset_id,
                                       to_string(cfg.tests[i].kind), to_string(pack.kind)));
    }
    if (!ids.insert(pack.dataset_id).second) {
      violations.push_back(fmt::format("{}: dataset id used by more than one pack", pack.dataset_id));
    }
  }
  if (!violations.empty()) {
    throw ValidationError(fmt::format("{} validation problem(s); first: {}", violations.size(), violations.front()),
                          std::move(violations));
  }
  return in;
}

ScoreTable compute_scores(const EvalInputs& inputs, const EvalConfig& cfg, int workers) {
  ScoreTable table;
  const auto y_cor = correctness(inputs.train);
  const auto correct = y_cor.correct_rows();
  if (correct.empty()) {
    for (auto m : cfg.methods) table.failures[m] = "no correctly classified training rows";
    return table;
  }
  const FeaturePack restricted = inputs.train.select_rows(correct);

  auto fits = try_fit_all(restricted, inputs.head, cfg.scorer, cfg.methods, workers);
  table.failures = fits.failures;

  // Work units in fixed (method, dataset) order; dataset 0 is the training set.
  struct Unit {
    Method method;
    const FeaturePack* pack;
  };
  std::vector<Unit> units;
  for (auto m : cfg.methods) {
    if (!fits.fitted.count(m)) continue;
    units.push_back({m, &restricted});
    for (const auto& pack : inputs.tests) units.push_back({m, &pack});
  }

  std::vector<std::vector<double>> results(units.size());
  std::vector<std::string> errors(units.size());
  const auto n_units = static_cast<std::ptrdiff_t>(units.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(workers, 1))
  for (std::ptrdiff_t u = 0; u < n_units; ++u) {
    const auto& unit = units[static_cast<std::size_t>(u)];
    try {
      results[static_cast<std::size_t>(u)] = kernels::score_pack(fits.fitted.at(unit.method), *unit.pack, 1).scores;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(u)] = fmt::format("scoring {}: {}", unit.pack->dataset_id, e.what());
    }
  }

  for (std::size_t u = 0; u < units.size(); ++u) {
    const auto m = units[u].method;
    if (table.failures.count(m)) continue;
    if (!errors[u].empty()) {
      table.failures[m] = errors[u];
      table.scores.erase(m);
      continue;
    }
    auto& entry = table.scores[m];
    if (units[u].pack == &restricted) {
      entry.train = std::move(results[u]);
    } else {
      entry.tests[units[u].pack->dataset_id] = std::move(results[u]);
    }
  }
  return table;
}

std::string score_file_name(Method method, const std::string& dataset_id) {
  return fmt::format("{}__{}.scores", to_string(method), dataset_id);
}

ScoreTable load_score_table(const std::filesystem::path& dir, const EvalInputs& inputs, const EvalConfig& cfg) {
  ScoreTable table;
  const auto correct = correctness(inputs.train).correct_rows();
  auto load = [&](Method m, const FeaturePack& pack) {
    const auto path = dir / score_file_name(m, pack.dataset_id);
    if (!std::filesystem::exists(path)) throw std::runtime_error(fmt::format("missing score file {}", path.string()));
    auto sv = io::read_scores(path);
    if (sv.method != m || sv.dataset_id != pack.dataset_id) {
      throw std::runtime_error(fmt::format("{} holds {} scores for {}", path.string(), to_string(sv.method), sv.dataset_id));
    }
    if (sv.scores.size() != pack.rows()) {
      throw std::runtime_error(fmt::format("{} has {} scores, pack has {} rows", path.string(), sv.scores.size(), pack.rows()));
    }
    for (double s : sv.scores) {
      if (!std::isfinite(s)) throw std::runtime_error(fmt::format("{} contains non-finite scores", path.string()));
    }
    return std::move(sv.scores);
  };

  for (auto m : cfg.methods) {
    try {
      MethodScores entry;
      if (cfg.mode == EvalMode::HumanCentric) {
        if (correct.empty()) throw std::runtime_error("no correctly classified training rows");
        entry.train = select(load(m, inputs.train), correct);
      }
      for (const auto& pack : inputs.tests) entry.tests[pack.dataset_id] = load(m, pack);
      table.scores[m] = std::move(entry);
    } catch (const std::exception& e) {
      table.failures[m] = e.what();
    }
  }
  return table;
}

std::vector<ReportRow> aggregate(std::span<const ReportRow> rows) {
  std::vector<Method> order;
  for (const auto& row : rows) {
    if (std::find(order.begin(), order.end(), row.method) == order.end()) order.push_back(row.method);
  }
  std::vector<ReportRow> out;
  for (auto m : order) {
    std::vector<double> sums;
    std::size_t count = 0;
    for (const auto& row : rows) {
      if (row.method != m || row.dataset_id == kAverageRow) continue;
      if (sums.empty()) sums.assign(row.values.size(), 0.0);
      if (row.values.size() != sums.size()) throw std::invalid_argument("aggregate: rows disagree on metric count");
      for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += row.values[i];
      ++count;
      out.push_back(row);
    }
    if (count == 0) continue;
    for (auto& s : sums) s /= static_cast<double>(count);
    out.push_back({m, std::string(kAverageRow), std::move(sums)});
  }
  return out;
}

EvalReport evaluate_human_centric(const ScoreTable& table, const EvalInputs& inputs, const EvalConfig& cfg) {
  EvalReport report;
  report.mode = EvalMode::HumanCentric;
  const auto fractions = sorted_keep_fractions(cfg.keep_fractions);
  for (double p : fractions) report.metric_names.push_back(der_metric_name(p));
  for (const auto& pack : inputs.tests) report.datasets.push_back(pack.dataset_id);
  fill_metadata(report, inputs, cfg, table);

  std::vector<CorrectnessVector> y_cor;
  for (const auto& pack : inputs.tests) y_cor.push_back(correctness(pack));

  std::vector<ReportRow> rows;
  for (auto m : cfg.methods) {
    const auto it = table.scores.find(m);
    if (it == table.scores.end()) continue;
    const auto& scores = it->second;
    const auto name = std::string(to_string(m));
    if (scores.train.empty()) {
      report.failures[name] = "no correctly classified training rows";
      continue;
    }
    std::vector<Threshold> thresholds;
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      thresholds.push_back(reject_threshold(scores.train, fractions[f]));
      const auto& t = thresholds.back();
      report.thresholds[name][report.metric_names[f]] = t.below_all() ? std::nullopt : std::optional<double>(t.value());
    }
    for (std::size_t d = 0; d < inputs.tests.size(); ++d) {
      const auto& test_scores = scores.tests.at(inputs.tests[d].dataset_id);
      ReportRow row{m, inputs.tests[d].dataset_id, {}};
      for (const auto& t : thresholds) row.values.push_back(der(test_scores, y_cor[d].values, t));
      rows.push_back(std::move(row));
    }
  }
  report.rows = aggregate(rows);
  return report;
}

EvalReport evaluate_conventional(const ScoreTable& table, const EvalInputs& inputs, const EvalConfig& cfg) {
  const FeaturePack* validation = nullptr;
  std::vector<const FeaturePack*> ood;
  for (const auto& pack : inputs.tests) {
    if (pack.kind == DatasetKind::Validation) {
      if (validation) throw std::invalid_argument("conventional mode needs exactly one validation pack, found several");
      validation = &pack;
    } else if (pack.kind == DatasetKind::LabelShift) {
      ood.push_back(&pack);
    }
  }
  if (!validation) throw std::invalid_argument("conventional mode needs exactly one validation pack, found none");
  if (ood.empty()) throw std::invalid_argument("conventional mode needs at least one label_shift pack");

  std::vector<std::size_t> id_rows;
  if (cfg.id_definition == IdDefinition::CorrectOnly) {
    id_rows = correctness(*validation).correct_rows();
    if (id_rows.empty()) throw std::invalid_argument("validation pack has no correctly classified rows");
  }

  EvalReport report;
  report.mode = EvalMode::Conventional;
  report.id_definition = cfg.id_definition;
  report.metric_names = {"FPR95", "AUROC"};
  for (const auto* pack : ood) report.datasets.push_back(pack->dataset_id);
  fill_metadata(report, inputs, cfg, table);

  std::vector<ReportRow> rows;
  for (auto m : cfg.methods) {
    const auto it = table.scores.find(m);
    if (it == table.scores.end()) continue;
    const auto& all_id = it->second.tests.at(validation->dataset_id);
    const auto id_scores = cfg.id_definition == IdDefinition::CorrectOnly ? select(all_id, id_rows) : all_id;
    for (const auto* pack : ood) {
      const auto& ood_scores = it->second.tests.at(pack->dataset_id);
      rows.push_back({m, pack->dataset_id, {fpr_at_tpr(id_scores, ood_scores, 0.95), auroc(id_scores, ood_scores)}});
    }
  }
  report.rows = aggregate(rows);
  return report;
}

EvalReport run_evaluation(const EvalConfig& cfg, const std::optional<std::filesystem::path>& scores_dir) {
  cfg.validate();
  const auto inputs = load_inputs(cfg);
  const auto table = scores_dir ? load_score_table(*scores_dir, inputs, cfg)
                                : compute_scores(inputs, cfg, kernels::resolve_workers(cfg.workers));
  return cfg.mode == EvalMode::HumanCentric ? evaluate_human_centric(table, inputs, cfg)
                                            : evaluate_conventional(table, inputs, cfg);
}

EvalReport run_human_centric(const EvalConfig& cfg) {
  auto c = cfg;
  c.mode = EvalMode::HumanCentric;
  return run_evaluation(c);
}

EvalReport run_conventional(const EvalConfig& cfg) {
  auto c = cfg;
  c.mode = EvalMode::Conventional;
  return run_evaluation(c);
}

}  // namespace oodbench
