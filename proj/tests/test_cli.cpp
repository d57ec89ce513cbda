/*
 * Copyright 2026 The lexaug Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Runs the installed binary as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <json.hpp>
#include <string>

#include "lexaug/lexaug.hpp"
#include "test_util.hpp"

namespace lexaug {
namespace {

using nlohmann::json;
using testing::TempDir;
namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out, err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Result run_cli(const TempDir& tmp, const std::string& args) {
  const auto out = tmp / "stdout.txt";
  const auto err = tmp / "stderr.txt";
  const std::string cmd = quote(LEXAUG_CLI) + " " + args + " >" + quote(out.string()) + " 2>" +
                          quote(err.string());
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::string sample(const std::string& name) {
  return quote((testing::data_dir() / "sample" / name).string());
}

std::string fixtures() { return quote((testing::data_dir() / "fixtures" / "defs").string()); }

std::string small_train_args(const fs::path& run) {
  return "train --lexicon " + sample("labmt_sample500.tsv") + " --vectors " +
         sample("vectors50.txt") + " --run-dir " + quote(run.string()) + " --epochs 3";
}

std::size_t count_lines(const fs::path& p) { return read_lines(p).size(); }

TEST(Cli, MissingLexiconIsInputError) {
  TempDir tmp("cli");
  const auto r = run_cli(tmp, "train --lexicon /no/such/lexicon.tsv --run-dir " +
                                  quote((tmp / "run").string()));
  EXPECT_EQ(r.code, 2);
  const auto err = json::parse(r.err);
  EXPECT_NE(err.at("error").get<std::string>().find("input not found"), std::string::npos);
  EXPECT_EQ(err.at("exit_code"), 2);
  EXPECT_FALSE(fs::exists(tmp / "run" / "manifest.json"));
}

TEST(Cli, UnknownFlagAndUnknownKeyAreUsageErrors) {
  TempDir tmp("cli");
  EXPECT_EQ(run_cli(tmp, "train --bogus").code, 2);
  EXPECT_EQ(run_cli(tmp, "frobnicate").code, 2);
  const auto r = run_cli(tmp, "train --lexicon " + sample("labmt_sample500.tsv") +
                                  " --set train.learning_rate=1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.learning_rate"), std::string::npos);
}

TEST(Cli, TrainWritesRunAndRepeatsSplits) {
  TempDir tmp("cli");
  const auto a = tmp / "a";
  const auto b = tmp / "b";
  const auto ra = run_cli(tmp, small_train_args(a));
  ASSERT_EQ(ra.code, 0) << ra.err;
  const auto summary = json::parse(ra.out);
  EXPECT_EQ(summary.at("folds").size(), 5u);
  EXPECT_EQ(summary.at("holdout"), 100);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_TRUE(fs::exists(a / ("member_" + std::to_string(k) + ".bin")));
    EXPECT_TRUE(fs::exists(a / ("history_fold" + std::to_string(k) + ".csv")));
  }
  EXPECT_TRUE(fs::exists(a / "manifest.json"));
  EXPECT_TRUE(fs::exists(a / "config.resolved.txt"));

  ASSERT_EQ(run_cli(tmp, small_train_args(b)).code, 0);
  EXPECT_EQ(read_file(a / "splits.txt"), read_file(b / "splits.txt"));
  EXPECT_EQ(read_file(a / "member_0.bin"), read_file(b / "member_0.bin"));
}

TEST(Cli, ResolvedConfigReproducesTheRun) {
  TempDir tmp("cli");
  const auto a = tmp / "a";
  ASSERT_EQ(run_cli(tmp, small_train_args(a) + " --set split.seed=7").code, 0);
  const auto cfg = read_file(a / "config.resolved.txt");
  EXPECT_NE(cfg.find("split.seed = 7"), std::string::npos);
  EXPECT_NE(cfg.find("train.max_epochs = 3"), std::string::npos);

  const auto b = tmp / "b";
  const auto r = run_cli(tmp, "train --config " + quote((a / "config.resolved.txt").string()) +
                                  " --run-dir " + quote(b.string()));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(a / "splits.txt"), read_file(b / "splits.txt"));
  EXPECT_EQ(read_file(a / "member_3.bin"), read_file(b / "member_3.bin"));
}

TEST(Cli, FlagsWinOverConfigFile) {
  TempDir tmp("cli");
  write_file(tmp / "c.txt", "train.max_epochs = 9\nsplit.seed = 3\n");
  const auto run = tmp / "r";
  ASSERT_EQ(run_cli(tmp, small_train_args(run) + " --config " +
                             quote((tmp / "c.txt").string()))
                .code,
            0);
  const auto cfg = read_file(run / "config.resolved.txt");
  EXPECT_NE(cfg.find("train.max_epochs = 3"), std::string::npos);
  EXPECT_NE(cfg.find("split.seed = 3"), std::string::npos);
}

class TrainedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tmp_ = new TempDir("cli_run");
    run_ = *tmp_ / "run";
    const auto r = run_cli(*tmp_, small_train_args(run_));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete tmp_;
    tmp_ = nullptr;
  }
  static std::string run_dir() { return quote(run_.string()); }

  static inline TempDir* tmp_ = nullptr;
  static inline fs::path run_;
};

TEST_F(TrainedRun, EvaluateIsByteIdenticalOnRerun) {
  TempDir tmp("cli");
  const auto r1 = run_cli(tmp, "evaluate --run-dir " + run_dir() + " --top-k 50");
  ASSERT_EQ(r1.code, 0) << r1.err;
  const auto report = read_file(run_ / "eval" / "report.json");
  const auto table = read_file(run_ / "eval" / "table.csv");
  const auto top = read_file(run_ / "eval" / "top_errors.csv");
  ASSERT_EQ(run_cli(tmp, "evaluate --run-dir " + run_dir() + " --top-k 50").code, 0);
  EXPECT_EQ(read_file(run_ / "eval" / "report.json"), report);
  EXPECT_EQ(read_file(run_ / "eval" / "table.csv"), table);
  EXPECT_EQ(read_file(run_ / "eval" / "top_errors.csv"), top);

  EXPECT_EQ(count_lines(run_ / "eval" / "top_errors.csv"), 51u);
  EXPECT_NE(table.find("Human ratings (standard deviation)"), std::string::npos);
  EXPECT_NE(table.find("Human ratings (variance)"), std::string::npos);
}

TEST_F(TrainedRun, EvaluateTopKOverride) {
  TempDir tmp("cli");
  ASSERT_EQ(run_cli(tmp, "evaluate --run-dir " + run_dir() + " --top-k 7").code, 0);
  EXPECT_EQ(count_lines(run_ / "eval" / "top_errors.csv"), 8u);
}

TEST_F(TrainedRun, AugmentEmptyWordsFile) {
  TempDir tmp("cli");
  write_file(tmp / "words.txt", "");
  const auto out = tmp / "aug.tsv";
  const auto r = run_cli(tmp, "augment --run-dir " + run_dir() + " --words " +
                                  quote((tmp / "words.txt").string()) + " --out " +
                                  quote(out.string()));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).at("rows"), 0);
  EXPECT_EQ(count_lines(out), 1u);  // header only
}

TEST_F(TrainedRun, AugmentScoresNewWordInRange) {
  TempDir tmp("cli");
  write_file(tmp / "words.txt", "coronavirus\n");
  const auto out = tmp / "aug.tsv";
  const auto r = run_cli(tmp, "augment --run-dir " + run_dir() + " --words " +
                                  quote((tmp / "words.txt").string()) + " --out " +
                                  quote(out.string()));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = read_lines(out);
  ASSERT_EQ(lines.size(), 2u);
  const auto cols = split(lines[1], '\t');
  ASSERT_EQ(cols.size(), 9u);
  EXPECT_EQ(cols[0], "coronavirus");
  const double h = std::stod(cols[2]);
  const double sigma = std::stod(cols[4]);
  EXPECT_GE(h, 1.0);
  EXPECT_LE(h, 9.0);
  EXPECT_GT(sigma, 0.0);
  EXPECT_EQ(cols[7], "model");
}

TEST_F(TrainedRun, AugmentSkipsRatedWordsUnlessForced) {
  TempDir tmp("cli");
  write_file(tmp / "words.txt", "laughter\n");
  const auto out = tmp / "aug.tsv";
  const std::string base = "augment --run-dir " + run_dir() + " --words " +
                           quote((tmp / "words.txt").string()) + " --out " + quote(out.string());
  const auto skipped = run_cli(tmp, base);
  ASSERT_EQ(skipped.code, 0);
  EXPECT_EQ(json::parse(skipped.out).at("skipped"), 1);
  EXPECT_NE(skipped.err.find("laughter"), std::string::npos);
  EXPECT_EQ(count_lines(out), 1u);

  const auto forced = run_cli(tmp, base + " --force");
  ASSERT_EQ(forced.code, 0);
  EXPECT_EQ(count_lines(out), 2u);
}

TEST(Cli, AugmentWithoutTrainedRunFails) {
  TempDir tmp("cli");
  write_file(tmp / "words.txt", "coronavirus\n");
  const auto r = run_cli(tmp, "augment --run-dir " + quote((tmp / "empty").string()) +
                                  " --words " + quote((tmp / "words.txt").string()));
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, FetchDefsFixtureModeIsIdempotent) {
  TempDir tmp("cli");
  const auto lines = read_lines(testing::data_dir() / "sample" / "labmt_sample500.tsv");
  std::string lex;
  for (std::size_t i = 0; i < 11; ++i) lex += lines[i] + "\n";
  write_file(tmp / "lex10.tsv", lex);
  const std::string args = "fetch-defs --lexicon " + quote((tmp / "lex10.tsv").string()) +
                           " --run-dir " + quote((tmp / "run").string()) + " --fixtures " +
                           fixtures();
  const auto first = run_cli(tmp, args);
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(count_lines(tmp / "run" / "defs_cache.jsonl"), 10u);
  EXPECT_EQ(json::parse(first.out).at("fetched"), 10);

  const auto second = run_cli(tmp, args);
  ASSERT_EQ(second.code, 0);
  EXPECT_EQ(json::parse(second.out).at("fetched"), 0);
  EXPECT_EQ(json::parse(second.out).at("cache_hits"), 10);
  EXPECT_EQ(count_lines(tmp / "run" / "defs_cache.jsonl"), 10u);
  EXPECT_TRUE(fs::exists(tmp / "run" / "coverage.json"));
}

TEST(Cli, DictionaryModelTrainsFromFixtureCache) {
  TempDir tmp("cli");
  const auto run = quote((tmp / "run").string());
  ASSERT_EQ(run_cli(tmp, "fetch-defs --lexicon " + sample("labmt_sample500.tsv") + " --run-dir " +
                             run + " --fixtures " + fixtures())
                .code,
            0);
  const auto r = run_cli(tmp, "train --model dictionary --lexicon " +
                                  sample("labmt_sample500.tsv") + " --subword-vocab " +
                                  sample("subword_vocab.txt") + " --run-dir " + run +
                                  " --epochs 1 --set dict.layers=1 --set mc.samples=5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).at("model"), "dictionary");
  EXPECT_EQ(run_cli(tmp, "evaluate --run-dir " + run).code, 0);
}

TEST(Cli, ScoreText) {
  TempDir tmp("cli");
  const auto lex = quote((testing::data_dir() / "labmt" / "labmt1.tsv").string());
  const auto r = run_cli(tmp, "score-text --lexicon " + lex + " --text 'laughter war'");
  ASSERT_EQ(r.code, 0);
  const Lexicon full = parse_lexicon(testing::data_dir() / "labmt" / "labmt1.tsv");
  const double expected = (full.find("laughter")->h_avg + full.find("war")->h_avg) / 2.0;
  EXPECT_NEAR(json::parse(r.out).at("score").get<double>(), expected, 1e-12);

  const auto none = run_cli(tmp, "score-text --lexicon " + lex + " --text 'zzqx qqzx'");
  ASSERT_EQ(none.code, 0);
  EXPECT_TRUE(json::parse(none.out).at("score").is_null());
}

TEST(Cli, BaselineWritesReport) {
  TempDir tmp("cli");
  const auto run = tmp / "run";
  const auto r = run_cli(tmp, "baseline --lexicon " + sample("labmt_sample500.tsv") +
                                  " --vectors " + sample("vectors50.txt") + " --run-dir " +
                                  quote(run.string()) + " --set baseline.trials=3");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).at("results").size(), 4u);
  std::size_t computed = 0;
  for (const auto& line : read_lines(run / "baselines.csv")) {
    if (line.find(",computed,") != std::string::npos) ++computed;
  }
  EXPECT_EQ(computed, 4u);
  EXPECT_EQ(count_lines(run / "baseline_trials.csv"), 13u);
}

}  // namespace
}  // namespace lexaug
