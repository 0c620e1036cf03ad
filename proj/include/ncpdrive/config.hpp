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
#include <string>
#include <vector>

#include "ncpdrive/models.hpp"
#include "ncpdrive/training.hpp"

// Run configuration: a flat set of documented keys read from "key = value"
// text ('#' starts a comment). Unknown keys are rejected.
namespace ncpdrive::inline NCPD_PRECISION_NS {

struct RunConfig
{
  // Architecture.
  std::string   model = "cnn-ncp";
  std::uint64_t seed  = 0;
  double        dropout = 0.5;
  std::string   fusion;  // empty: the variant's default
  int           unfolds = 6;
  double        elapsed = 1.0;
  std::size_t   sensory_fanout = 2;
  std::size_t   inter_fanout   = 5;
  std::size_t   recurrent_command_synapses = 6;
  std::size_t   motor_fanin    = 6;

  // Training.
  TrainConfig train;
  double      train_fraction = 0.8;
  std::size_t segment        = 100;  // frames per split segment

  // Data.
  std::string data;          // training dataset directory
  std::string eval_data;     // evaluation dataset directory
  std::string condition = "sunny";
  std::size_t frames    = 500;
  std::string out;           // output directory
  std::string checkpoint;
  std::string results;       // results CSV appended by eval (default <out>/results.csv)

  // Experiment.
  std::string train_condition = "sunny";
  std::string eval_conditions = "cloudy,night";
  std::size_t train_frames    = 2000;
  std::size_t eval_frames     = 500;
  std::size_t seeds           = 3;
  std::string variants = "cnn,cnn-ncp,cnn-dncp-v1,cnn-dncp-v2,cnn-dncp-v3,cnn-dncp-v4";
  std::size_t experiment_epochs = 10;
  std::size_t experiment_stride = 16;    // non-overlapping windows
  double      experiment_lr     = 1e-3;

  // Drive server.
  int         port         = 4567;
  double      target_speed = 20.0;
  double      kp           = 0.1;
  std::size_t max_message_bytes = 8 << 20;
};

/// Every key with its documentation, in a stable order.
struct ConfigKey
{
  const char *name;
  const char *help;
};
const std::vector<ConfigKey> &config_keys();

/// Applies one key. Throws ConfigError for unknown keys or bad values.
void set_config_value(RunConfig &config, const std::string &key, const std::string &value);
std::string get_config_value(const RunConfig &config, const std::string &key);

/// Applies "key = value" lines; errors name the line.
void apply_config_text(RunConfig &config, const std::string &text, const std::string &origin);
void apply_config_file(RunConfig &config, const std::filesystem::path &path);

/// Every key in canonical order, one "key = value" per line.
std::string format_config(const RunConfig &config);
/// format_config without the output locations (out, checkpoint, results), so
/// the snapshot stored in reports does not depend on where they were written.
std::string format_run_snapshot(const RunConfig &config);

/// Architecture described by the config's architecture keys.
ArchitectureSpec spec_from_config(const RunConfig &config);

/// Exact text form of an architecture (used inside checkpoints).
std::string      format_spec(const ArchitectureSpec &spec);
ArchitectureSpec parse_spec(const std::string &text);

std::vector<std::string> split_list(const std::string &text);

}  // namespace ncpdrive
