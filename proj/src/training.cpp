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

#include "ncpdrive/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "ncpdrive/ops.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

double mse(const Tensor &pred, const Tensor &target)
{
  if (pred.size() != target.size())
  {
    throw ShapeError("mse: prediction " + shape_string(pred.shape()) + " vs target " +
                     shape_string(target.shape()));
  }
  if (pred.size() == 0)
  {
    throw ShapeError("mse of empty tensors");
  }
  double total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
  {
    double const d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

AdamState adam_init(const NamedTensors &params, const AdamConfig &config)
{
  AdamState state;
  state.config = config;
  for (const auto &[name, p] : params)
  {
    state.m[name] = Tensor(p.shape());
    state.v[name] = Tensor(p.shape());
  }
  return state;
}

void adam_step(NamedTensors &params, const NamedTensors &grads, AdamState &state)
{
  for (const auto &[name, g] : grads)
  {
    auto it = params.find(name);
    if (it == params.end())
    {
      throw Error("gradient for unknown parameter '" + name + "'");
    }
    if (g.shape() != it->second.shape())
    {
      throw ShapeError("gradient of '" + name + "' has shape " + shape_string(g.shape()));
    }
    if (!g.all_finite())
    {
      throw NumericError("non-finite gradient for '" + name + "'; step aborted");
    }
  }
  state.t += 1;
  const AdamConfig &c   = state.config;
  double const      bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  double const      bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (const auto &[name, g] : grads)
  {
    Tensor &p = params.at(name);
    Tensor &m = state.m.at(name);
    Tensor &v = state.v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i)
    {
      double const gi = g[i];
      double const mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      double const vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i]            = static_cast<Real>(mi);
      v[i]            = static_cast<Real>(vi);
      double const mhat = mi / bc1;
      double const vhat = vi / bc2;
      p[i] = static_cast<Real>(p[i] - c.lr * mhat / (std::sqrt(vhat) + c.epsilon));
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kFrameElements = kFrameHeight * kFrameWidth * kFrameChannels;

struct Item
{
  std::size_t episode;
  std::size_t start;
};

/// Training data in the form the loop consumes: preprocessed up front, or raw
/// frames preprocessed per batch after augmentation.
class Source
{
public:
  Source(const std::vector<Episode> &episodes, const TrainConfig &config)
    : raw_(episodes)
    , config_(config)
  {
    if (!config.augment)
    {
      for (const Episode &e : episodes)
      {
        prepared_.push_back(prepare(e));
      }
    }
  }

  std::size_t episode_count() const
  {
    return raw_.size();
  }
  std::size_t length(std::size_t e) const
  {
    return raw_[e].size();
  }

  /// Copies `length` frames of item `it` into `frames` at frame offset
  /// `offset`, and their labels into `labels`.
  void fill(const Item &it, std::size_t length, Tensor &frames, Tensor &labels,
            std::size_t offset, std::uint64_t augment_seed) const
  {
    auto out = frames.values();
    if (!config_.augment)
    {
      const PreparedEpisode &p = prepared_[it.episode];
      auto const             in = p.frames.values();
      std::copy_n(in.begin() + static_cast<long>(it.start * kFrameElements),
                  length * kFrameElements, out.begin() + static_cast<long>(offset * kFrameElements));
      for (std::size_t t = 0; t < length; ++t)
      {
        labels[offset + t] = p.labels[it.start + t];
      }
      return;
    }
    const Episode &e     = raw_[it.episode];
    Rng            rng   = Rng::derive(augment_seed, it.episode * 1000003 + it.start);
    bool const     sides = !e.samples[it.start].left.empty() && !e.samples[it.start].right.empty();
    AugmentParams const params = draw_augment(rng, config_.augment_config, sides);
    for (std::size_t t = 0; t < length; ++t)
    {
      Sample const s = augment(e.samples[it.start + t], params, config_.augment_config);
      preprocess_into(s.frame, out.subspan((offset + t) * kFrameElements, kFrameElements));
      labels[offset + t] = s.steering;
    }
  }

  const std::vector<PreparedEpisode> &prepared() const
  {
    return prepared_;
  }

private:
  const std::vector<Episode>  &raw_;
  const TrainConfig           &config_;
  std::vector<PreparedEpisode> prepared_;
};

double evaluate_episodes(const Model &model, const Source &source,
                         const std::vector<Episode> &episodes)
{
  if (!source.prepared().empty())
  {
    return evaluate(model, source.prepared());
  }
  return evaluate(model, episodes);
}

}  // namespace

TrainReport fit(Model &model, const std::vector<Episode> &train, const std::vector<Episode> &val,
                const TrainConfig &config, const EpochCallback &on_epoch)
{
  auto const  started = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = config.seed;
  if (config.epochs == 0)
  {
    throw ConfigError("epochs must be at least 1");
  }
  if (config.batch_frames == 0 || config.batch_windows == 0)
  {
    throw ConfigError("batch sizes must be positive");
  }
  std::size_t total_frames = 0;
  for (const Episode &e : train)
  {
    total_frames += e.size();
  }
  if (total_frames == 0)
  {
    throw Error("training set is empty");
  }

  // Validation and training evaluation never augment.
  TrainConfig eval_config = config;
  eval_config.augment     = false;
  Source const train_source(train, config);
  Source const train_eval(train, eval_config);
  Source const val_source(val, eval_config);

  bool const        recurrent = model.recurrent();
  std::size_t const steps_per_item = recurrent ? config.window : 1;
  std::vector<Item> items;
  for (std::size_t e = 0; e < train_source.episode_count(); ++e)
  {
    if (!recurrent)
    {
      for (std::size_t i = 0; i < train_source.length(e); ++i)
      {
        items.push_back({e, i});
      }
    }
    else if (train_source.length(e) >= config.window)
    {
      for (std::size_t s : windows(train_source.length(e), config.window, config.stride))
      {
        items.push_back({e, s});
      }
    }
  }
  if (items.empty())
  {
    throw ConfigError("no training window of length " + std::to_string(config.window) +
                      " fits in the training episodes");
  }
  std::size_t const batch = recurrent ? config.batch_windows : config.batch_frames;

  AdamState    adam = adam_init(model.parameters(), config.adam);
  NamedTensors best = model.parameters();
  double       best_score = std::numeric_limits<double>::infinity();
  bool         stop = false;

  for (std::size_t epoch = 1; epoch <= config.epochs && !stop; ++epoch)
  {
    Rng order_rng = Rng::derive(config.seed, 2 * epoch);
    Rng dropout_rng = Rng::derive(config.seed, 2 * epoch + 1);
    order_rng.shuffle(items);
    for (std::size_t first = 0; first < items.size() && !stop; first += batch)
    {
      std::size_t const n = std::min(batch, items.size() - first);
      Tensor frames(Shape{n * steps_per_item, kFrameHeight, kFrameWidth, kFrameChannels});
      Tensor labels(Shape{n, steps_per_item});
      for (std::size_t b = 0; b < n; ++b)
      {
        train_source.fill(items[first + b], steps_per_item, frames, labels, b * steps_per_item,
                          config.seed ^ (epoch * 0x9e3779b97f4a7c15ULL));
      }
      ad::Graph       graph;
      ModelVars const vars = model.bind(graph);
      ad::Var const   pred =
          model.predict(vars, graph.constant(std::move(frames)), n, steps_per_item, &dropout_rng);
      ad::Var const loss = ad::mse(pred, graph.constant(std::move(labels)));
      Real const    value = graph.forward(loss).item();
      if (!std::isfinite(value))
      {
        report.diverged = true;
        report.error    = "loss became non-finite at step " + std::to_string(report.steps + 1);
        stop            = true;
        break;
      }
      graph.backward(loss);
      try
      {
        adam_step(model.parameters(), graph.parameter_grads(), adam);
      }
      catch (const NumericError &e)
      {
        report.diverged = true;
        report.error    = e.what();
        stop            = true;
        break;
      }
      model.apply_constraints();
      report.steps += 1;
      if (config.max_steps != 0 && report.steps >= config.max_steps)
      {
        stop = true;
      }
    }
    if (report.diverged)
    {
      break;
    }
    EpochRecord record;
    record.epoch     = epoch;
    record.steps     = report.steps;
    record.train_mse = evaluate_episodes(model, train_eval, train);
    record.val_mse   = val.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : evaluate_episodes(model, val_source, val);
    report.epochs.push_back(record);
    double const score = val.empty() ? record.train_mse : record.val_mse;
    if (score < best_score || report.epochs.size() == 1)
    {
      best_score            = score;
      best                  = model.parameters();
      report.best_epoch     = epoch;
      report.best_val_mse   = record.val_mse;
      report.best_train_mse = record.train_mse;
    }
    if (on_epoch)
    {
      on_epoch(record);
    }
  }
  if (!report.epochs.empty())
  {
    model.parameters() = std::move(best);
  }
  model.reset_state();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

double evaluate(const Model &model, const std::vector<PreparedEpisode> &episodes)
{
  double      total = 0;
  std::size_t count = 0;
  for (const PreparedEpisode &e : episodes)
  {
    RecurrentState state = model.initial_state();
    Tensor const   pred  = model.infer(e.frames, state);
    for (std::size_t i = 0; i < e.size(); ++i)
    {
      double const d = static_cast<double>(pred[i]) - static_cast<double>(e.labels[i]);
      total += d * d;
    }
    count += e.size();
  }
  if (count == 0)
  {
    throw Error("cannot evaluate on empty episodes");
  }
  return total / static_cast<double>(count);
}

double evaluate(const Model &model, const std::vector<Episode> &episodes)
{
  // Prepared one at a time to bound memory.
  double      total = 0;
  std::size_t count = 0;
  for (const Episode &e : episodes)
  {
    if (e.size() == 0)
    {
      continue;
    }
    total += evaluate(model, std::vector<PreparedEpisode>{prepare(e)}) * static_cast<double>(e.size());
    count += e.size();
  }
  if (count == 0)
  {
    throw Error("cannot evaluate on empty episodes");
  }
  return total / static_cast<double>(count);
}

std::string format_double(double value)
{
  if (std::isnan(value))
  {
    return "nan";
  }
  char       buf[64];
  auto const r = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, r.ptr);
}

std::string format_report(const TrainReport &report)
{
  std::string out = "# epoch train_mse val_mse\n";
  for (const EpochRecord &r : report.epochs)
  {
    out += std::to_string(r.epoch) + ' ' + format_double(r.train_mse) + ' ' +
           format_double(r.val_mse) + '\n';
  }
  return out;
}

std::string format_summary(const TrainReport &report)
{
  auto number = [](double v) -> nlohmann::json {
    return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
  };
  nlohmann::json j;
  j["seed"]           = report.seed;
  j["steps"]          = report.steps;
  j["best_epoch"]     = report.best_epoch;
  j["best_train_mse"] = number(report.best_train_mse);
  j["best_val_mse"]   = number(report.best_val_mse);
  j["diverged"]       = report.diverged;
  j["error"]          = report.error;
  j["config"]         = report.config;
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochRecord &r : report.epochs)
  {
    epochs.push_back({{"epoch", r.epoch},
                      {"steps", r.steps},
                      {"train_mse", number(r.train_mse)},
                      {"val_mse", number(r.val_mse)}});
  }
  j["epochs"] = epochs;
  return j.dump(2) + "\n";
}

}  // namespace ncpdrive
