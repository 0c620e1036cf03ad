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


#include "ncpdrive/commands.hpp"

#include <csignal>
#include <fstream>
#include <thread>

#include "ncpdrive/checkpoint.hpp"
#include "ncpdrive/data.hpp"
#include "ncpdrive/experiment.hpp"
#include "ncpdrive/rng.hpp"
#include "ncpdrive/server.hpp"
#include "ncpdrive/training.hpp"

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

void require(bool ok, const std::string &message)
{
  if (!ok)
  {
    throw ConfigError(message);
  }
}

std::filesystem::path prepare_out(const RunConfig &config)
{
  require(!config.out.empty(), "out is required");
  std::filesystem::path const out = config.out;
  std::error_code             ec;
  std::filesystem::create_directories(out, ec);
  if (!std::filesystem::is_directory(out))
  {
    throw Error("cannot create output directory " + out.string());
  }
  return out;
}

Episode load_or_synth(const RunConfig &config, std::ostream &log)
{
  if (!config.data.empty())
  {
    auto [drive_log, episode] = load_drive_log(config.data, config.train.augment);
    log << "loaded " << episode.size() << " frames from " << config.data << "\n";
    return episode;
  }
  log << "rendering " << config.frames << " synthetic " << config.condition << " frames\n";
  return synth_generate(parse_condition(config.condition), config.frames, config.seed,
                        {.side_cameras = config.train.augment});
}

std::string wiring_dump(const Model &model)
{
  static const char *const kNames[] = {"ncp", "left", "right"};
  std::string out;
  for (std::size_t i = 0; i < model.wirings().size(); ++i)
  {
    std::string const name = model.wirings().size() == 1 ? kNames[0] : kNames[i + 1];
    out += "# " + name + "\n" + export_text(model.wirings()[i]);
  }
  return out;
}

}  // namespace

void append_result(const std::filesystem::path &path, const std::string &model,
                   const std::string &train_condition, const std::string &eval_condition,
                   double mse)
{
  bool const fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (path.has_parent_path())
  {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (fresh)
  {
    out << kResultsHeader << "\n";
  }
  out << model << "," << train_condition << "," << eval_condition << "," << format_double(mse)
      << "\n";
  if (!out)
  {
    throw Error("cannot append to " + path.string());
  }
}

int cmd_synth(const RunConfig &config, std::ostream &log)
{
  Condition const condition = parse_condition(config.condition);
  auto const      out       = prepare_out(config);
  Episode const   episode   = synth_generate(condition, config.frames, config.seed);
  save_episode(episode, out);
  log << "wrote " << episode.size() << " " << condition_name(condition) << " frames to "
      << out.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig &config, std::ostream &log)
{
  ArchitectureSpec const spec = spec_from_config(config);
  require(!config.out.empty(), "out is required");
  if (!config.data.empty())
  {
    require(std::filesystem::is_directory(config.data), "data directory " + config.data +
                                                            " does not exist");
  }
  auto const                  out  = prepare_out(config);
  std::filesystem::path const ckpt =
      config.checkpoint.empty() ? out / "model.ncpd" : std::filesystem::path(config.checkpoint);

  Model   model(spec);
  Episode episode = load_or_synth(config, log);
  std::vector<Episode> train{episode}, val;
  if (config.train_fraction < 1)
  {
    std::tie(train, val) = split_episodes({episode}, config.segment, config.train_fraction,
                                          Rng::derive(config.seed, 102).next_u64());
  }
  log << variant_name(spec.variant) << ": " << model.parameter_count() << " parameters, "
      << train.size() << " training / " << val.size() << " validation segments\n";

  TrainConfig tc = config.train;
  tc.seed        = config.seed;
  TrainReport report = fit(model, train, val, tc, [&](const EpochRecord &r) {
    log << "epoch " << r.epoch << " steps " << r.steps << " train " << format_double(r.train_mse)
        << " val " << format_double(r.val_mse) << "\n";
  });
  report.config = format_run_snapshot(config);
  save_checkpoint(model, ckpt);
  write_text(out / "report.txt", format_report(report));
  write_text(out / "summary.json", format_summary(report));
  write_text(out / "wiring.txt", wiring_dump(model));
  log << "best epoch " << report.best_epoch << " train " << format_double(report.best_train_mse)
      << " val " << format_double(report.best_val_mse) << "; checkpoint " << ckpt.string() << "\n";
  if (report.diverged)
  {
    log << "training diverged: " << report.error << "\n";
    return 1;
  }
  return 0;
}

int cmd_eval(const RunConfig &config, std::ostream &log)
{
  require(!config.checkpoint.empty(), "checkpoint is required");
  std::string const data = config.eval_data.empty() ? config.data : config.eval_data;
  require(!data.empty(), "eval_data (or data) is required");
  std::filesystem::path results = config.results;
  if (results.empty() && !config.out.empty())
  {
    results = std::filesystem::path(config.out) / "results.csv";
  }

  Model const model     = load_checkpoint(config.checkpoint);
  auto [drive_log, episode] = load_drive_log(data);
  if (episode.samples.empty())
  {
    throw Error("dataset " + data + " has no frames");
  }
  double const value = evaluate(model, std::vector<Episode>{episode});
  std::string const eval_condition = episode.condition.empty() ? "unknown" : episode.condition;
  log << "mse " << format_double(value) << "\n";
  if (!results.empty())
  {
    append_result(results, variant_name(model.spec().variant), config.train_condition,
                  eval_condition, value);
  }
  return 0;
}

int cmd_experiment(const RunConfig &config, std::ostream &log)
{
  auto const             out    = prepare_out(config);
  ExperimentResult const result = run_experiment(config, out, [&](const std::string &line) {
    log << line << "\n" << std::flush;
  });
  write_text(out / "results.csv", format_results_csv(result));
  write_text(out / "comparison.csv", format_comparison_csv(result));
  std::string const table = format_comparison(result);
  write_text(out / "comparison.txt", table);
  log << table;
  for (const ExperimentRun &r : result.runs)
  {
    if (!r.ok)
    {
      return 1;
    }
  }
  return 0;
}

int cmd_drive(const RunConfig &config, std::ostream &log)
{
  require(!config.checkpoint.empty(), "checkpoint is required");
  Model const model = load_checkpoint(config.checkpoint);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  DriveServer server(model,
                     {.target_speed      = config.target_speed,
                      .kp                = config.kp,
                      .max_message_bytes = config.max_message_bytes},
                     config.port);
  log << "serving " << variant_name(model.spec().variant) << " on port " << server.port() << "\n"
      << std::flush;
  std::thread runner([&] { server.run(); });
  int sig = 0;
  sigwait(&signals, &sig);
  log << "stopping\n";
  server.stop();
  runner.join();
  return 0;
}

}  // namespace ncpdrive
