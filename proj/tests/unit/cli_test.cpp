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

#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "oodbench/cli.hpp"
#include "oodbench/config.hpp"
#include "oodbench/harness.hpp"
#include "oodbench/io.hpp"
#include "support.hpp"

namespace oodbench {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  const auto bytes = io::read_file(p);
  return {bytes.begin(), bytes.end()};
}

std::vector<nlohmann::json> json_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.front() == '{') out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("cli");
    ASSERT_EQ(run({"synth", "--out", (dir_->path() / "fx").string()}).code, cli::kExitOk);
  }
  static void TearDownTestSuite() { delete dir_; }
  static fs::path fx(const std::string& name = "") { return dir_->path() / "fx" / name; }
  static fs::path tmp(const std::string& name) { return dir_->path() / name; }
  static testing::TempDir* dir_;
};
testing::TempDir* CliTest::dir_ = nullptr;

TEST_F(CliTest, UsageErrorsExitOne) {
  auto r = run({"eval", "--bogus"});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(json_lines(r.err).at(0)["error"], "usage");
  EXPECT_EQ(run({}).code, cli::kExitValidation);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, ValidateGoodPack) {
  const auto r = run({"validate", fx("validation.oodp").string(), "--head", fx("head.oodh").string()});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(r.err.empty());
  EXPECT_EQ(json_lines(r.out).at(0)["valid"], true);
}

TEST_F(CliTest, ValidateTruncatedPackGivesOneJsonLine) {
  auto bytes = io::read_file(fx("ood-a.oodp"));
  bytes.pop_back();
  io::write_file_atomic(tmp("cut.oodp"), bytes);
  const auto r = run({"validate", tmp("cut.oodp").string(), "--head", fx("head.oodh").string()});
  EXPECT_EQ(r.code, cli::kExitValidation);
  const auto lines = json_lines(r.err);
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0]["error"], "truncated");
  EXPECT_EQ(lines[0]["offset"], bytes.size());
}

TEST_F(CliTest, ValidateReportsViolations) {
  auto pack = io::read_pack(fx("validation.oodp"));
  pack.logits(0, 0) += 1.0;
  io::write_pack(pack, tmp("bad.oodp"));
  const auto r = run({"validate", tmp("bad.oodp").string(), "--head", fx("head.oodh").string()});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_EQ(json_lines(r.err).size(), 1u);
}

TEST_F(CliTest, EvalWritesReportDirectory) {
  const auto out = tmp("report");
  const auto r = run({"eval", "--config", fx("config.json").string(), "--out", out.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  for (const char* f : {"report.csv", "report.md", "report.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto meta = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(meta["mode"], "human_centric");
  EXPECT_EQ(meta["model_id"], "synthetic-linear");

  const auto csv = run({"report", "--in", out.string(), "--format", "csv"});
  EXPECT_EQ(csv.code, cli::kExitOk);
  EXPECT_EQ(csv.out, slurp(out / "report.csv"));
  const auto md = run({"report", "--in", out.string(), "--format", "md"});
  EXPECT_EQ(md.code, cli::kExitOk);
  EXPECT_NE(md.out.find("| Method | validation | ood-a | ood-b | Average |"), std::string::npos);
  EXPECT_EQ(run({"report", "--in", out.string(), "--format", "html"}).code, cli::kExitValidation);
}

TEST_F(CliTest, ConventionalModeFlags) {
  const auto out = tmp("conv");
  const auto r = run({"eval", "--config", fx("config.json").string(), "--out", out.string(), "--mode",
                      "conventional", "--id-definition", "correct"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto meta = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(meta["mode"], "conventional");
  EXPECT_EQ(meta["id_definition"], "correct");
  EXPECT_EQ(run({"eval", "--config", fx("config.json").string(), "--out", out.string(), "--mode", "x"}).code,
            cli::kExitValidation);
}

TEST_F(CliTest, ScoreThenEvalFromScoresMatchesFusedEval) {
  const auto states = tmp("states");
  auto r = run({"fit", "--train", fx("train.oodp").string(), "--head", fx("head.oodh").string(), "--config",
                fx("config.json").string(), "--out", states.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto scores = tmp("scores");
  fs::create_directories(scores);
  const auto cfg = read_eval_config(fx("config.json"));
  for (auto m : cfg.methods) {
    for (const auto& [file, id] : std::vector<std::pair<std::string, std::string>>{
             {"train.oodp", "train"}, {"validation.oodp", "validation"}, {"ood-a.oodp", "ood-a"}, {"ood-b.oodp", "ood-b"}}) {
      r = run({"score", "--pack", fx(file).string(), "--state", states.string(), "--method", std::string(to_string(m)),
               "--out", (scores / score_file_name(m, id)).string()});
      ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    }
  }
  for (const std::string mode : {"human_centric", "conventional"}) {
    const auto fused = tmp("fused-" + mode), reused = tmp("reused-" + mode);
    ASSERT_EQ(run({"eval", "--config", fx("config.json").string(), "--out", fused.string(), "--mode", mode}).code, 0);
    r = run({"eval", "--config", fx("config.json").string(), "--out", reused.string(), "--mode", mode,
             "--from-scores", scores.string()});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    for (const char* f : {"report.csv", "report.md", "report.json"}) {
      EXPECT_EQ(slurp(fused / f), slurp(reused / f)) << mode << " " << f;
    }
  }
}

TEST_F(CliTest, MissingConfigIsValidationError) {
  const auto r = run({"eval", "--config", tmp("nope.json").string(), "--out", tmp("x").string()});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_EQ(json_lines(r.err).at(0)["error"], "config");
}

TEST_F(CliTest, UnknownMethodForScore) {
  const auto r = run({"score", "--pack", fx("validation.oodp").string(), "--state", tmp("states").string(), "--method",
                      "odin", "--out", tmp("x.scores").string()});
  EXPECT_EQ(r.code, cli::kExitValidation);
}

}  // namespace
}  // namespace oodbench
