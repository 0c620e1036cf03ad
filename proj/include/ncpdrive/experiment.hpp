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


#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ncpdrive/config.hpp"
#include "ncpdrive/training.hpp"

// Train-on-one-condition, evaluate-on-others comparison across architectures.
namespace ncpdrive::inline NCPD_PRECISION_NS {

struct ExperimentRun
{
  std::string   model;
  std::uint64_t seed = 0;
  bool          ok   = false;
  std::string   error;
  TrainReport   report;
  double        train_mse = 0;                // best-epoch MSE on the training split
  std::map<std::string, double> eval_mse;     // by condition
  double        seconds = 0;
};

struct ExperimentResult
{
  std::string              train_condition;
  std::vector<std::string> eval_conditions;  // train condition first
  std::vector<std::string> models;
  std::vector<ExperimentRun> runs;
};

/// One row of the comparison: mean and sample standard deviation over the
/// completed seeds. Gaps are eval(B) - eval(A) per seed, A being held-out
/// frames of the training condition.
struct ComparisonRow
{
  std::string model;
  std::size_t completed = 0;
  std::size_t failed    = 0;
  double      train_mean = 0, train_std = 0;
  std::map<std::string, std::pair<double, double>> eval;  // condition -> (mean, std)
  std::map<std::string, std::pair<double, double>> gap;   // condition B -> (mean, std)
};

using ExperimentLog = std::function<void(const std::string &)>;

/// Runs every model in `config.variants` for `config.seeds` seeds on synthetic
/// data. With a non-empty `out_dir` each run leaves runs/<model>-seed<k>/
/// (model.ncpd, report.txt, summary.json, results.csv). Failed runs are kept
/// with their error and skipped in the summaries.
ExperimentResult run_experiment(const RunConfig &config, const std::filesystem::path &out_dir,
                                const ExperimentLog &log = {});

std::vector<ComparisonRow> compare(const ExperimentResult &result);

/// Results CSV (model,train_condition,eval_condition,mse); one row per model
/// and evaluation condition holding the mean over completed seeds.
std::string format_results_csv(const ExperimentResult &result);
std::string format_comparison_csv(const ExperimentResult &result);
/// Human-readable table.
std::string format_comparison(const ExperimentResult &result);

inline constexpr const char *kResultsHeader = "model,train_condition,eval_condition,mse";

}  // namespace ncpdrive
