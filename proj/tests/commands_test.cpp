// Copyright 2026 The ncpdrive Authors
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


#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"

#include "ncpdrive/checkpoint.hpp"
#include "ncpdrive/commands.hpp"
#include "ncpdrive/data.hpp"
#include "ncpdrive/experiment.hpp"
#include "ncpdrive/image.hpp"

using namespace ncpdrive;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name)
{
  fs::path const p = fs::temp_directory_path() / ("ncpd_cmd_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path &p)
{
  std::ifstream     in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string &text)
{
  std::vector<std::string> out;
  std::istringstream       in(text);
  for (std::string l; std::getline(in, l);)
  {
    out.push_back(l);
  }
  return out;
}

RunConfig small_train(const fs::path &out, const std::string &model)
{
  RunConfig c;
  c.model          = model;
  c.frames         = 48;
  c.seed           = 21;
  c.train.epochs   = 2;
  c.train_fraction = 1;
  c.out            = out.string();
  return c;
}

}  // namespace

TEST(SynthCommandTest, WritesFramesAndIsDeterministic)
{
  RunConfig c;
  c.frames    = 40;
  c.seed      = 9;
  c.condition = "sunny";
  fs::path const first = scratch("synth_a");
  c.out                = first.string();
  std::ostringstream log;
  ASSERT_EQ(cmd_synth(c, log), 0);
  c.out = scratch("synth_b").string();
  ASSERT_EQ(cmd_synth(c, log), 0);

  auto const rows = lines(slurp(fs::path(c.out) / kDriveLogName));
  EXPECT_EQ(rows.size(), 41u);  // header + frames
  std::size_t pngs = 0;
  for (const auto &e : fs::directory_iterator(fs::path(c.out) / "IMG"))
  {
    pngs += e.path().filename().string().rfind("center_", 0) == 0;
    EXPECT_TRUE(slurp(e.path()) == slurp(first / "IMG" / e.path().filename())) << e.path();
  }
  EXPECT_EQ(pngs, 40u);
  EXPECT_EQ(slurp(fs::path(c.out) / kDriveLogName),
            slurp(first / kDriveLogName));
}

TEST(SynthCommandTest, NightDarkerThanSunny)
{
  std::ostringstream log;
  double             lum[2];
  const char        *conds[2] = {"sunny", "night"};
  for (int i = 0; i < 2; ++i)
  {
    RunConfig c;
    c.frames    = 5;
    c.condition = conds[i];
    c.out       = scratch(std::string("lum_") + conds[i]).string();
    cmd_synth(c, log);
    lum[i] = mean_luminance(read_png(fs::path(c.out) / "IMG" / "center_00002.png"));
  }
  EXPECT_LT(lum[1], lum[0]);
}

TEST(TrainCommandTest, ConfigErrorsBeforeCompute)
{
  std::ostringstream log;
  RunConfig          c = small_train(scratch("bad"), "cnn-ncp");
  c.data               = "/nonexistent/data";
  EXPECT_THROW(cmd_train(c, log), ConfigError);
  EXPECT_FALSE(fs::exists(c.out));
  c.data = "";
  c.out  = "";
  EXPECT_THROW(cmd_train(c, log), ConfigError);
  EXPECT_TRUE(log.str().empty());
}

TEST(TrainCommandTest, DeterministicArtifactsAndEvalConsistency)
{
  std::ostringstream log;
  RunConfig          a = small_train(scratch("train_a"), "cnn-dncp-v2");
  RunConfig          b = small_train(scratch("train_b"), "cnn-dncp-v2");
  ASSERT_EQ(cmd_train(a, log), 0);
  ASSERT_EQ(cmd_train(b, log), 0);
  for (const char *f : {"model.ncpd", "report.txt", "summary.json", "wiring.txt"})
  {
    EXPECT_EQ(slurp(fs::path(a.out) / f), slurp(fs::path(b.out) / f)) << f;
  }
  EXPECT_NE(slurp(fs::path(a.out) / "wiring.txt").find("# right"), std::string::npos);

  // The same frames on disk, evaluated through the checkpoint.
  RunConfig s;
  s.frames = a.frames;
  s.seed   = a.seed;
  s.out    = scratch("train_data").string();
  cmd_synth(s, log);
  RunConfig e;
  e.checkpoint = (fs::path(a.out) / "model.ncpd").string();
  e.eval_data  = s.out;
  e.results    = (scratch("results") / "results.csv").string();
  std::ostringstream eval_log;
  ASSERT_EQ(cmd_eval(e, eval_log), 0);
  double const evaluated = std::stod(eval_log.str().substr(4));

  std::string const summary = slurp(fs::path(a.out) / "summary.json");
  auto const        at      = summary.find("\"best_train_mse\": ");
  double const      trained = std::stod(summary.substr(at + 18));
  EXPECT_NEAR(evaluated, trained, 1e-6);

  // A second checkpoint appends an independent row.
  e.checkpoint = (fs::path(b.out) / "model.ncpd").string();
  ASSERT_EQ(cmd_eval(e, eval_log), 0);
  auto const rows = lines(slurp(e.results));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], kResultsHeader);
  for (std::size_t i = 1; i < rows.size(); ++i)
  {
    EXPECT_EQ(std::count(rows[i].begin(), rows[i].end(), ','), 3) << rows[i];
    EXPECT_EQ(rows[i].rfind("cnn-dncp-v2,sunny,sunny,", 0), 0u) << rows[i];
  }
}

TEST(EvalCommandTest, MissingInputsAreConfigErrors)
{
  std::ostringstream log;
  RunConfig          c;
  EXPECT_THROW(cmd_eval(c, log), ConfigError);
  c.checkpoint = "x.ncpd";
  EXPECT_THROW(cmd_eval(c, log), ConfigError);
}

TEST(ExperimentTest, CompareMatchesHandComputation)
{
  ExperimentResult r;
  r.train_condition = "sunny";
  r.eval_conditions = {"sunny", "night"};
  r.models          = {"cnn", "cnn-ncp"};
  auto add = [&](std::string m, double tr, double a, double b, bool ok = true) {
    ExperimentRun run;
    run.model     = m;
    run.ok        = ok;
    run.train_mse = tr;
    run.eval_mse  = {{"sunny", a}, {"night", b}};
    r.runs.push_back(run);
  };
  add("cnn", 0.1, 0.2, 0.5);
  add("cnn", 0.3, 0.4, 0.6);
  add("cnn-ncp", 0.2, 0.2, 0.3);
  add("cnn-ncp", 9, 9, 9, false);

  auto const rows = compare(r);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].completed, 2u);
  EXPECT_DOUBLE_EQ(rows[0].train_mean, 0.2);
  EXPECT_NEAR(rows[0].train_std, std::sqrt(0.02), 1e-12);
  EXPECT_DOUBLE_EQ(rows[0].eval.at("night").first, 0.55);
  // gaps 0.3 and 0.2
  EXPECT_NEAR(rows[0].gap.at("night").first, 0.25, 1e-12);
  EXPECT_NEAR(rows[0].gap.at("night").second, std::sqrt(0.005), 1e-12);
  EXPECT_EQ(rows[1].completed, 1u);
  EXPECT_EQ(rows[1].failed, 1u);
  EXPECT_NEAR(rows[1].gap.at("night").first, 0.1, 1e-12);
  EXPECT_EQ(rows[1].gap.at("night").second, 0.0);

  auto const csv = lines(format_results_csv(r));
  ASSERT_EQ(csv.size(), 1u + 2 * 2);
  EXPECT_EQ(csv[0], kResultsHeader);
  EXPECT_NE(format_comparison(r).find("failed: cnn-ncp"), std::string::npos);
}

TEST(ExperimentTest, RunsEveryCellAndRecordsFailures)
{
  RunConfig c;
  c.train_frames      = 64;
  c.eval_frames       = 16;
  c.segment           = 32;
  c.seeds             = 1;
  c.experiment_epochs = 1;
  c.variants          = "cnn,cnn-ncp";
  c.eval_conditions   = "cloudy";
  // Windows longer than any segment leave the recurrent model without
  // training data, so that run fails while the baseline completes.
  c.train.window = 40;
  ExperimentResult const r = run_experiment(c, {});
  ASSERT_EQ(r.runs.size(), 2u);
  EXPECT_TRUE(r.runs[0].ok) << r.runs[0].error;
  EXPECT_FALSE(r.runs[1].ok);
  EXPECT_FALSE(r.runs[1].error.empty());
  EXPECT_EQ(r.runs[0].eval_mse.size(), 2u);
  auto const table = format_comparison(r);
  EXPECT_NE(table.find("gap cloudy"), std::string::npos);
  EXPECT_NE(table.find("cnn-ncp"), std::string::npos);
}

TEST(ExperimentTest, CommandWritesTablesAndRuns)
{
  RunConfig c;
  c.train_frames      = 64;
  c.eval_frames       = 16;
  c.segment           = 32;
  c.seeds             = 2;
  c.experiment_epochs = 1;
  c.variants          = "cnn-dncp-v1";
  c.out               = scratch("experiment").string();
  std::ostringstream log;
  ASSERT_EQ(cmd_experiment(c, log), 0);
  auto const rows = lines(slurp(fs::path(c.out) / "results.csv"));
  ASSERT_EQ(rows.size(), 1u + 3);  // sunny, cloudy, night
  EXPECT_EQ(rows[0], kResultsHeader);
  for (const char *f : {"comparison.csv", "comparison.txt"})
  {
    EXPECT_TRUE(fs::exists(fs::path(c.out) / f)) << f;
  }
  for (int s = 0; s < 2; ++s)
  {
    fs::path const run = fs::path(c.out) / "runs" / ("cnn-dncp-v1-seed" + std::to_string(s));
    EXPECT_NO_THROW(load_checkpoint(run / "model.ncpd"));
    EXPECT_TRUE(fs::exists(run / "summary.json"));
  }
}
