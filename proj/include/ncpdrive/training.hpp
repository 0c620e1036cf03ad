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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ncpdrive/data.hpp"
#include "ncpdrive/models.hpp"
#include "ncpdrive/tensor.hpp"

// Loss, optimizer, training loop and evaluation.
namespace ncpdrive::inline NCPD_PRECISION_NS {

/// Mean of squared differences, accumulated in double.
double mse(const Tensor &pred, const Tensor &target);

struct AdamConfig
{
  double lr      = 1e-4;
  double beta1   = 0.9;
  double beta2   = 0.999;
  double epsilon = 1e-7;
};

struct AdamState
{
  AdamConfig    config;
  std::uint64_t t = 0;
  NamedTensors  m;
  NamedTensors  v;
};

AdamState adam_init(const NamedTensors &params, const AdamConfig &config);

/// One Adam update of every parameter that has a gradient. A non-finite
/// gradient aborts the step before anything is modified (NumericError).
void adam_step(NamedTensors &params, const NamedTensors &grads, AdamState &state);

struct TrainConfig
{
  std::size_t   epochs        = 10;
  std::size_t   batch_frames  = 32;  // stateless models
  std::size_t   batch_windows = 8;   // recurrent models
  std::size_t   window        = 16;
  std::size_t   stride        = 8;
  AdamConfig    adam;
  std::uint64_t seed    = 0;
  bool          augment = false;
  AugmentConfig augment_config;
  /// Stop after this many optimizer steps (0 = no limit).
  std::size_t max_steps = 0;
};

struct EpochRecord
{
  std::size_t epoch = 0;
  std::size_t steps = 0;  // optimizer steps so far
  double      train_mse = 0;
  double      val_mse   = 0;  // NaN without validation data
};

struct TrainReport
{
  std::vector<EpochRecord> epochs;
  std::size_t              best_epoch = 0;
  double                   best_val_mse   = 0;
  double                   best_train_mse = 0;
  std::size_t              steps = 0;
  std::uint64_t            seed  = 0;
  std::string              config;  // snapshot of the run configuration
  bool                     diverged = false;
  std::string              error;
  double                   wall_seconds = 0;
};

using EpochCallback = std::function<void(const EpochRecord &)>;

/// Trains `model` on `train`, measuring train and validation MSE after every
/// epoch with dropout off. On return the model holds the parameters of the
/// epoch with the lowest validation MSE (training MSE when `val` is empty).
/// Recurrent models train on windows with zero initial state; stateless
/// models on shuffled frames.
TrainReport fit(Model &model, const std::vector<Episode> &train, const std::vector<Episode> &val,
                const TrainConfig &config, const EpochCallback &on_epoch = {});

/// Stateful inference over every episode (state reset at each episode start).
double evaluate(const Model &model, const std::vector<PreparedEpisode> &episodes);
double evaluate(const Model &model, const std::vector<Episode> &episodes);

/// Line-oriented report: a header comment then "epoch train_mse val_mse".
std::string format_report(const TrainReport &report);
/// Machine-readable JSON summary. Timing is excluded so reports of seeded runs
/// are byte-reproducible.
std::string format_summary(const TrainReport &report);

/// Shortest round-trip decimal form of a double ("nan" for NaN).
std::string format_double(double value);

}  // namespace ncpdrive
