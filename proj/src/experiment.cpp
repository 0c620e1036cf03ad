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


#include "ncpdrive/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ncpdrive/checkpoint.hpp"
#include "ncpdrive/rng.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

namespace {

void write_text(const std::filesystem::path &path, const std::string &text)
{
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out)
  {
    throw Error("cannot write " + path.string());
  }
}

std::pair<double, double> mean_std(const std::vector<double> &xs)
{
  if (xs.empty())
  {
    return {std::nan(""), std::nan("")};
  }
  double sum = 0;
  for (double x : xs)
  {
    sum += x;
  }
  double const mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2)
  {
    return {mean, 0.0};
  }
  double ss = 0;
  for (double x : xs)
  {
    ss += (x - mean) * (x - mean);
  }
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::string run_results_csv(const ExperimentResult &result, const ExperimentRun &run)
{
  std::string out = std::string(kResultsHeader) + "\n";
  for (const std::string &c : result.eval_conditions)
  {
    out += run.model + "," + result.train_condition + "," + c + "," +
           format_double(run.eval_mse.at(c)) + "\n";
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig &config, const std::filesystem::path &out_dir,
                                const ExperimentLog &log)
{
  auto say = [&](const std::string &s) {
    if (log)
    {
      log(s);
    }
  };

  ExperimentResult result;
  result.train_condition = condition_name(parse_condition(config.train_condition));
  result.eval_conditions.push_back(result.train_condition);
  for (const std::string &c : split_list(config.eval_conditions))
  {
    std::string const name = condition_name(parse_condition(c));
    if (name != result.train_condition)
    {
      result.eval_conditions.push_back(name);
    }
  }
  for (const std::string &m : split_list(config.variants))
  {
    result.models.push_back(variant_name(parse_variant(m)));
  }
  if (result.models.empty())
  {
    throw ConfigError("experiment needs at least one model");
  }

  // One training trajectory and one evaluation trajectory, the latter rendered
  // under every condition so the conditions differ only in appearance.
  SynthOptions const  opts{.side_cameras = config.train.augment};
  std::uint64_t const train_seed = Rng::derive(config.seed, 100).next_u64();
  std::uint64_t const eval_seed  = Rng::derive(config.seed, 101).next_u64();
  say("rendering " + std::to_string(config.train_frames) + " " + result.train_condition +
      " training frames");
  std::vector<Episode> const all{synth_generate(parse_condition(result.train_condition),
                                                config.train_frames, train_seed, opts)};
  auto const [train, val] =
      split_episodes(all, config.segment, config.train_fraction, Rng::derive(config.seed, 102).next_u64());

  std::map<std::string, std::vector<PreparedEpisode>> eval_sets;
  for (const std::string &c : result.eval_conditions)
  {
    say("rendering " + std::to_string(config.eval_frames) + " " + c + " evaluation frames");
    eval_sets[c] = {prepare(synth_generate(parse_condition(c), config.eval_frames, eval_seed, {.side_cameras = false}))};
  }

  TrainConfig tc  = config.train;
  tc.epochs       = config.experiment_epochs;
  tc.stride       = config.experiment_stride;
  tc.adam.lr      = config.experiment_lr;

  for (const std::string &model_name : result.models)
  {
    for (std::size_t k = 0; k < config.seeds; ++k)
    {
      ExperimentRun run;
      run.model = model_name;
      run.seed  = config.seed + k;
      auto const start = std::chrono::steady_clock::now();
      try
      {
        RunConfig rc = config;
        rc.model     = model_name;
        rc.seed      = run.seed;
        Model model(spec_from_config(rc));
        tc.seed      = run.seed;
        run.report   = fit(model, train, val, tc, [&](const EpochRecord &r) {
          say(model_name + " seed " + std::to_string(run.seed) + " epoch " +
              std::to_string(r.epoch) + " train " + format_double(r.train_mse) + " val " +
              format_double(r.val_mse));
        });
        run.report.config = format_run_snapshot(rc);
        if (run.report.diverged)
        {
          throw NumericError(run.report.error);
        }
        run.train_mse = run.report.best_train_mse;
        for (const std::string &c : result.eval_conditions)
        {
          run.eval_mse[c] = evaluate(model, eval_sets.at(c));
        }
        run.ok = true;
        if (!out_dir.empty())
        {
          auto const dir = out_dir / "runs" / (model_name + "-seed" + std::to_string(run.seed));
          std::filesystem::create_directories(dir);
          save_checkpoint(model, dir / "model.ncpd");
          write_text(dir / "report.txt", format_report(run.report));
          write_text(dir / "summary.json", format_summary(run.report));
          write_text(dir / "results.csv", run_results_csv(result, run));
        }
      }
      catch (const std::exception &e)
      {
        run.ok    = false;
        run.error = e.what();
        say(model_name + " seed " + std::to_string(run.seed) + " failed: " + run.error);
      }
      run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (run.ok)
      {
        std::string line = model_name + " seed " + std::to_string(run.seed) + " train " +
                           format_double(run.train_mse);
        for (const auto &[c, v] : run.eval_mse)
        {
          line += " " + c + " " + format_double(v);
        }
        char secs[32];
        std::snprintf(secs, sizeof secs, " (%.0f s)", run.seconds);
        say(line + secs);
      }
      result.runs.push_back(std::move(run));
    }
  }
  return result;
}

std::vector<ComparisonRow> compare(const ExperimentResult &result)
{
  std::vector<ComparisonRow> rows;
  const std::string &a = result.train_condition;
  for (const std::string &m : result.models)
  {
    ComparisonRow row;
    row.model = m;
    std::vector<double> train;
    std::map<std::string, std::vector<double>> eval, gap;
    for (const ExperimentRun &r : result.runs)
    {
      if (r.model != m)
      {
        continue;
      }
      if (!r.ok)
      {
        ++row.failed;
        continue;
      }
      ++row.completed;
      train.push_back(r.train_mse);
      for (const std::string &c : result.eval_conditions)
      {
        eval[c].push_back(r.eval_mse.at(c));
        if (c != a)
        {
          gap[c].push_back(r.eval_mse.at(c) - r.eval_mse.at(a));
        }
      }
    }
    std::tie(row.train_mean, row.train_std) = mean_std(train);
    for (const std::string &c : result.eval_conditions)
    {
      row.eval[c] = mean_std(eval[c]);
      if (c != a)
      {
        row.gap[c] = mean_std(gap[c]);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_results_csv(const ExperimentResult &result)
{
  std::string out = std::string(kResultsHeader) + "\n";
  for (const ComparisonRow &row : compare(result))
  {
    for (const std::string &c : result.eval_conditions)
    {
      out += row.model + "," + result.train_condition + "," + c + "," +
             format_double(row.eval.at(c).first) + "\n";
    }
  }
  return out;
}

std::string format_comparison_csv(const ExperimentResult &result)
{
  std::string out = "model,completed,failed,train_mse_mean,train_mse_std";
  for (const std::string &c : result.eval_conditions)
  {
    out += "," + c + "_mse_mean," + c + "_mse_std";
  }
  for (std::size_t i = 1; i < result.eval_conditions.size(); ++i)
  {
    const std::string &c = result.eval_conditions[i];
    out += ",gap_" + c + "_mean,gap_" + c + "_std";
  }
  out += "\n";
  for (const ComparisonRow &row : compare(result))
  {
    out += row.model + "," + std::to_string(row.completed) + "," + std::to_string(row.failed) +
           "," + format_double(row.train_mean) + "," + format_double(row.train_std);
    for (const std::string &c : result.eval_conditions)
    {
      out += "," + format_double(row.eval.at(c).first) + "," + format_double(row.eval.at(c).second);
    }
    for (std::size_t i = 1; i < result.eval_conditions.size(); ++i)
    {
      const auto &g = row.gap.at(result.eval_conditions[i]);
      out += "," + format_double(g.first) + "," + format_double(g.second);
    }
    out += "\n";
  }
  return out;
}

std::string format_comparison(const ExperimentResult &result)
{
  auto cell = [](std::pair<double, double> ms) {
    char buf[48];
    if (std::isnan(ms.first))
    {
      std::snprintf(buf, sizeof buf, "%21s", "-");
    }
    else
    {
      std::snprintf(buf, sizeof buf, "%10.5f +- %-7.5f", ms.first, ms.second);
    }
    return std::string(buf);
  };
  auto head = [](const std::string &s) {
    char buf[48];
    std::snprintf(buf, sizeof buf, " %21s", s.c_str());
    return std::string(buf);
  };

  std::string out = "trained on " + result.train_condition + "; MSE mean +- std over seeds\n";
  char        buf[64];
  std::snprintf(buf, sizeof buf, "%-12s %5s", "model", "runs");
  out += buf;
  out += head("train");
  for (const std::string &c : result.eval_conditions)
  {
    out += head("eval " + c);
  }
  for (std::size_t i = 1; i < result.eval_conditions.size(); ++i)
  {
    out += head("gap " + result.eval_conditions[i]);
  }
  out += "\n";
  for (const ComparisonRow &row : compare(result))
  {
    std::snprintf(buf, sizeof buf, "%-12s %2zu/%-2zu", row.model.c_str(), row.completed,
                  row.completed + row.failed);
    out += buf;
    out += " " + cell({row.train_mean, row.train_std});
    for (const std::string &c : result.eval_conditions)
    {
      out += " " + cell(row.eval.at(c));
    }
    for (std::size_t i = 1; i < result.eval_conditions.size(); ++i)
    {
      out += " " + cell(row.gap.at(result.eval_conditions[i]));
    }
    out += "\n";
  }
  for (const ExperimentRun &r : result.runs)
  {
    if (!r.ok)
    {
      out += "failed: " + r.model + " seed " + std::to_string(r.seed) + ": " + r.error + "\n";
    }
  }
  return out;
}

}  // namespace ncpdrive
