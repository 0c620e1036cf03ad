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


// ncpdrive: synth | train | eval | experiment | drive
//
// Every configuration key is also a flag (--key value). A --config file is
// applied first and flags override it.

#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "ncpdrive/commands.hpp"
#include "ncpdrive/config.hpp"

using namespace ncpdrive;

int main(int argc, char **argv)
{
  CLI::App app{"Steering prediction with liquid time-constant circuit policies"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  bool        print_config = false;
  app.add_option("-c,--config", config_file, "key = value configuration file");
  app.add_flag("--print-config", print_config, "print the effective configuration and exit");

  std::map<std::string, std::string> flags;
  for (const ConfigKey &key : config_keys())
  {
    std::string name = std::string("--") + key.name;
    std::string dashed = key.name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != key.name)
    {
      name += ",--" + dashed;
    }
    app.add_option(name, flags[key.name], key.help)->group("Configuration");
  }

  struct Command
  {
    const char *name;
    const char *help;
    int (*run)(const RunConfig &, std::ostream &);
  };
  const Command commands[] = {
      {"synth", "render a synthetic dataset", cmd_synth},
      {"train", "train a model", cmd_train},
      {"eval", "evaluate a checkpoint on a dataset", cmd_eval},
      {"experiment", "train every architecture and compare generalisation", cmd_experiment},
      {"drive", "serve steering predictions over TCP", cmd_drive},
  };
  std::map<CLI::App *, const Command *> by_app;
  for (const Command &c : commands)
  {
    by_app[app.add_subcommand(c.name, c.help)] = &c;
  }

  CLI11_PARSE(app, argc, argv);

  try
  {
    RunConfig config;
    if (!config_file.empty())
    {
      apply_config_file(config, config_file);
    }
    for (const ConfigKey &key : config_keys())
    {
      if (app.count(std::string("--") + key.name) > 0)
      {
        set_config_value(config, key.name, flags[key.name]);
      }
    }
    if (print_config)
    {
      std::cout << format_config(config);
      return 0;
    }
    const Command *command = by_app.at(app.get_subcommands().front());
    return command->run(config, std::cout);
  }
  catch (const ConfigError &e)
  {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
