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

#include "oodbench/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

namespace oodbench {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, std::string_view where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(fmt::format("{}: unknown key \"{}\"", where, key));
  }
}

template <class T>
T get_as(const json& obj, const char* key, std::string_view where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("{}: \"{}\" has the wrong type", where, key));
  }
}

ScorerConfig parse_scorer(const json& obj) {
  constexpr std::string_view where = "scorer";
  if (!obj.is_object()) throw ConfigError("scorer: expected an object");
  reject_unknown_keys(obj,
                      {"energy_temperature", "react_percentile", "knn_k", "vim_dim", "dice_sparsity",
                       "mahalanobis_shrinkage"},
                      where);
  ScorerConfig cfg;
  if (obj.contains("energy_temperature")) cfg.energy_temperature = get_as<double>(obj, "energy_temperature", where);
  if (obj.contains("react_percentile")) cfg.react_percentile = get_as<double>(obj, "react_percentile", where);
  if (obj.contains("knn_k")) cfg.knn_k = get_as<std::size_t>(obj, "knn_k", where);
  if (obj.contains("vim_dim") && !obj.at("vim_dim").is_null()) cfg.vim_dim = get_as<std::size_t>(obj, "vim_dim", where);
  if (obj.contains("dice_sparsity")) cfg.dice_sparsity = get_as<double>(obj, "dice_sparsity", where);
  if (obj.contains("mahalanobis_shrinkage")) {
    cfg.mahalanobis_shrinkage = get_as<double>(obj, "mahalanobis_shrinkage", where);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("scorer: {}", e.what()));
  }
  return cfg;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

EvalConfig parse_eval_config(const json& doc, const std::filesystem::path& base_dir, bool require_inputs) {
  constexpr std::string_view where = "config";
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  reject_unknown_keys(doc,
                      {"head_path", "train_path", "tests", "methods", "keep_fractions", "mode", "id_definition",
                       "scorer", "output_dir", "workers"},
                      where);
  EvalConfig cfg;
  cfg.base_dir = base_dir;
  if (doc.contains("head_path")) cfg.head_path = get_as<std::string>(doc, "head_path", where);
  if (doc.contains("train_path")) cfg.train_path = get_as<std::string>(doc, "train_path", where);
  if (doc.contains("tests")) {
    const auto& tests = doc.at("tests");
    if (!tests.is_array()) throw ConfigError("config: \"tests\" must be an array");
    for (const auto& t : tests) {
      if (!t.is_object()) throw ConfigError("tests: each entry must be an object");
      reject_unknown_keys(t, {"path", "kind"}, "tests entry");
      TestPackSpec spec;
      spec.path = get_as<std::string>(t, "path", "tests entry");
      const auto kind_name = get_as<std::string>(t, "kind", "tests entry");
      const auto kind = parse_dataset_kind(kind_name);
      if (!kind) throw ConfigError(fmt::format("tests entry: unknown kind \"{}\"", kind_name));
      spec.kind = *kind;
      cfg.tests.push_back(std::move(spec));
    }
  }
  if (doc.contains("methods")) {
    cfg.methods.clear();
    for (const auto& name : get_as<std::vector<std::string>>(doc, "methods", where)) {
      const auto m = parse_method(name);
      if (!m) throw ConfigError(fmt::format("config: unknown method \"{}\"", name));
      if (std::find(cfg.methods.begin(), cfg.methods.end(), *m) != cfg.methods.end()) {
        throw ConfigError(fmt::format("config: method \"{}\" listed twice", name));
      }
      cfg.methods.push_back(*m);
    }
  }
  if (doc.contains("keep_fractions")) cfg.keep_fractions = get_as<std::vector<double>>(doc, "keep_fractions", where);
  if (doc.contains("mode")) {
    const auto name = get_as<std::string>(doc, "mode", where);
    const auto mode = parse_eval_mode(name);
    if (!mode) throw ConfigError(fmt::format("config: unknown mode \"{}\"", name));
    cfg.mode = *mode;
  }
  if (doc.contains("id_definition")) {
    const auto name = get_as<std::string>(doc, "id_definition", where);
    const auto def = parse_id_definition(name);
    if (!def) throw ConfigError(fmt::format("config: unknown id_definition \"{}\"", name));
    cfg.id_definition = *def;
  }
  if (doc.contains("scorer")) cfg.scorer = parse_scorer(doc.at("scorer"));
  if (doc.contains("output_dir")) cfg.output_dir = get_as<std::string>(doc, "output_dir", where);
  if (doc.contains("workers")) cfg.workers = get_as<int>(doc, "workers", where);

  if (require_inputs) {
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (cfg.methods.empty()) {
    throw ConfigError("config: at least one method is required");
  }
  return cfg;
}

EvalConfig read_eval_config(const std::filesystem::path& path, bool require_inputs) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config {}", path.string()));
  const json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(fmt::format("config {} is not valid JSON", path.string()));
  return parse_eval_config(doc, path.parent_path(), require_inputs);
}

json to_json(const ScorerConfig& cfg) {
  json out = {
      {"energy_temperature", cfg.energy_temperature},
      {"react_percentile", cfg.react_percentile},
      {"knn_k", cfg.knn_k},
      {"dice_sparsity", cfg.dice_sparsity},
      {"mahalanobis_shrinkage", cfg.mahalanobis_shrinkage},
  };
  out["vim_dim"] = cfg.vim_dim ? json(*cfg.vim_dim) : json(nullptr);
  return out;
}

json to_json(const EvalConfig& cfg) {
  json tests = json::array();
  for (const auto& t : cfg.tests) tests.push_back({{"path", t.path}, {"kind", std::string(to_string(t.kind))}});
  json methods = json::array();
  for (auto m : cfg.methods) methods.push_back(std::string(to_string(m)));
  return {
      {"head_path", cfg.head_path},
      {"train_path", cfg.train_path},
      {"tests", tests},
      {"methods", methods},
      {"keep_fractions", cfg.keep_fractions},
      {"mode", std::string(to_string(cfg.mode))},
      {"id_definition", std::string(to_string(cfg.id_definition))},
      {"scorer", to_json(cfg.scorer)},
      {"output_dir", cfg.output_dir},
      {"workers", cfg.workers},
  };
}

std::string config_digest(const EvalConfig& cfg) {
  json doc = to_json(cfg);
  doc.erase("workers");
  doc.erase("output_dir");
  return fmt::format("{:016x}", fnv1a(doc.dump()));
}

}  // namespace oodbench
