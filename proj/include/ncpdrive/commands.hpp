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

#include <ostream>

#include "ncpdrive/config.hpp"

// The command-line operations. Each returns a process exit code and writes
// progress to `log`; configuration problems throw ConfigError before any
// data is touched.
namespace ncpdrive::inline NCPD_PRECISION_NS {

/// Renders `frames` frames of `condition` into `out` (PNG frames + drive log).
int cmd_synth(const RunConfig &config, std::ostream &log);

/// Trains `model` on the drive log in `data` (or, without one, on `frames`
/// synthetic frames of `condition`). Writes the checkpoint, report.txt,
/// summary.json and wiring.txt into `out`.
int cmd_train(const RunConfig &config, std::ostream &log);

/// Evaluates `checkpoint` on `eval_data` (falling back to `data`), prints the
/// MSE and appends a row to the results CSV.
int cmd_eval(const RunConfig &config, std::ostream &log);

/// Full comparison protocol; writes results.csv, comparison.csv and
/// comparison.txt plus one directory per run into `out`.
int cmd_experiment(const RunConfig &config, std::ostream &log);

/// Serves `checkpoint` on `port` until SIGINT or SIGTERM.
int cmd_drive(const RunConfig &config, std::ostream &log);

/// Appends one results row, writing the header when the file is new or empty.
void append_result(const std::filesystem::path &path, const std::string &model,
                   const std::string &train_condition, const std::string &eval_condition,
                   double mse);

}  // namespace ncpdrive
