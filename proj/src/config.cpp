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

#include "ncpdrive/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace ncpdrive::inline NCPD_PRECISION_NS {

namespace {

std::string trim(const std::string &s)
{
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
  {
    return {};
  }
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string &key, const std::string &text)
{
  T           value{};
  char const *end = text.data() + text.size();
  auto const  r   = std::from_chars(text.data(), end, value);
  if (text.empty() || r.ec != std::errc() || r.ptr != end)
  {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  if constexpr (std::is_floating_point_v<T>)
  {
    if (!std::isfinite(value))
    {
      throw ConfigError("invalid value '" + text + "' for " + key);
    }
  }
  return value;
}

bool parse_bool(const std::string &key, const std::string &text)
{
  if (text == "true" || text == "1" || text == "yes" || text == "on")
  {
    return true;
  }
  if (text == "false" || text == "0" || text == "no" || text == "off")
  {
    return false;
  }
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

template <typename T>
std::string to_text(const T &value)
{
  if constexpr (std::is_same_v<T, bool>)
  {
    return value ? "true" : "false";
  }
  else if constexpr (std::is_same_v<T, std::string>)
  {
    return value;
  }
  else if constexpr (std::is_floating_point_v<T>)
  {
    return format_double(value);
  }
  else
  {
    return std::to_string(value);
  }
}

struct KeyEntry
{
  ConfigKey                                                   key;
  std::function<void(RunConfig &, const std::string &)>       set;
  std::function<std::string(const RunConfig &)>               get;
};

template <typename T, typename Access>
KeyEntry make_key(const char *name, const char *help, Access access,
                  std::function<void(const T &)> check = {})
{
  KeyEntry e;
  e.key = {name, help};
  e.set = [name, access, check](RunConfig &c, const std::string &text) {
    T value;
    if constexpr (std::is_same_v<T, bool>)
    {
      value = parse_bool(name, text);
    }
    else if constexpr (std::is_same_v<T, std::string>)
    {
      value = text;
    }
    else
    {
      value = parse_number<T>(name, text);
    }
    if (check)
    {
      check(value);
    }
    access(c) = value;
  };
  e.get = [access](const RunConfig &c) { return to_text<T>(access(const_cast<RunConfig &>(c))); };
  return e;
}

#define NCPD_FIELD(expr) [](RunConfig &c) -> auto & { return c.expr; }

template <typename T>
std::function<void(const T &)> positive(const char *name)
{
  return [name](const T &v) {
    if (!(v > T(0)))
    {
      throw ConfigError(std::string(name) + " must be positive");
    }
  };
}

std::function<void(const double &)> within(const char *name, double lo, double hi, bool open_hi)
{
  return [=](const double &v) {
    if (!(v >= lo && (open_hi ? v < hi : v <= hi)))
    {
      throw ConfigError(std::string(name) + " must lie in [" + format_double(lo) + ", " +
                        format_double(hi) + (open_hi ? ")" : "]"));
    }
  };
}

const std::vector<KeyEntry> &entries()
{
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> t;
    // Architecture
    t.push_back(make_key<std::string>(
        "model", "architecture: cnn, cnn-ncp, cnn-dncp-v1 .. cnn-dncp-v4", NCPD_FIELD(model),
        [](const std::string &v) { parse_variant(v); }));
    t.push_back(make_key<std::uint64_t>("seed", "seed for initialisation, wiring and training",
                                        NCPD_FIELD(seed)));
    t.push_back(make_key<double>("dropout", "dropout rate after the convolutions",
                                 NCPD_FIELD(dropout), within("dropout", 0, 1, true)));
    t.push_back(make_key<std::string>("fusion",
                                      "dual-circuit fusion: mean or weighted (empty: variant default)",
                                      NCPD_FIELD(fusion), [](const std::string &v) {
                                        if (!v.empty()) parse_fusion(v);
                                      }));
    t.push_back(make_key<int>("unfolds", "LTC solver sub-steps per frame", NCPD_FIELD(unfolds),
                              positive<int>("unfolds")));
    t.push_back(make_key<double>("elapsed", "LTC time units per frame", NCPD_FIELD(elapsed),
                                 positive<double>("elapsed")));
    t.push_back(make_key<std::size_t>("sensory_fanout", "inter neurons per sensory neuron",
                                      NCPD_FIELD(sensory_fanout),
                                      positive<std::size_t>("sensory_fanout")));
    t.push_back(make_key<std::size_t>("inter_fanout", "command neurons per inter neuron",
                                      NCPD_FIELD(inter_fanout),
                                      positive<std::size_t>("inter_fanout")));
    t.push_back(make_key<std::size_t>("recurrent_command_synapses",
                                      "command-to-command synapses",
                                      NCPD_FIELD(recurrent_command_synapses)));
    t.push_back(make_key<std::size_t>("motor_fanin", "command neurons per motor neuron",
                                      NCPD_FIELD(motor_fanin),
                                      positive<std::size_t>("motor_fanin")));
    // Training
    t.push_back(make_key<std::size_t>("epochs", "maximum training epochs",
                                      NCPD_FIELD(train.epochs), positive<std::size_t>("epochs")));
    t.push_back(make_key<std::size_t>("batch_frames", "frames per batch (stateless models)",
                                      NCPD_FIELD(train.batch_frames),
                                      positive<std::size_t>("batch_frames")));
    t.push_back(make_key<std::size_t>("batch_windows", "windows per batch (recurrent models)",
                                      NCPD_FIELD(train.batch_windows),
                                      positive<std::size_t>("batch_windows")));
    t.push_back(make_key<std::size_t>("window", "training window length in frames",
                                      NCPD_FIELD(train.window), positive<std::size_t>("window")));
    t.push_back(make_key<std::size_t>("stride", "training window stride in frames",
                                      NCPD_FIELD(train.stride), positive<std::size_t>("stride")));
    t.push_back(make_key<std::size_t>("max_steps", "stop after this many steps (0: no limit)",
                                      NCPD_FIELD(train.max_steps)));
    t.push_back(make_key<double>("lr", "Adam learning rate", NCPD_FIELD(train.adam.lr),
                                 within("lr", 0, 1, false)));
    t.push_back(make_key<double>("beta1", "Adam first-moment decay",
                                 NCPD_FIELD(train.adam.beta1), within("beta1", 0, 1, true)));
    t.push_back(make_key<double>("beta2", "Adam second-moment decay",
                                 NCPD_FIELD(train.adam.beta2), within("beta2", 0, 1, true)));
    t.push_back(make_key<double>("epsilon", "Adam epsilon", NCPD_FIELD(train.adam.epsilon),
                                 positive<double>("epsilon")));
    t.push_back(make_key<double>("train_fraction", "training share of the split (1: no validation)",
                                 NCPD_FIELD(train_fraction), [](const double &v) {
                                   if (!(v > 0 && v <= 1))
                                     throw ConfigError("train_fraction must lie in (0, 1]");
                                 }));
    t.push_back(make_key<std::size_t>("segment", "frames per split segment",
                                      NCPD_FIELD(segment), positive<std::size_t>("segment")));
    t.push_back(make_key<bool>("augment", "augment training frames", NCPD_FIELD(train.augment)));
    t.push_back(make_key<double>("camera_offset", "steering offset of side cameras",
                                 NCPD_FIELD(train.augment_config.camera_offset)));
    t.push_back(make_key<double>("flip_probability", "probability of a horizontal flip",
                                 NCPD_FIELD(train.augment_config.flip_probability),
                                 within("flip_probability", 0, 1, false)));
    t.push_back(make_key<double>("shift_x_max", "maximum horizontal shift in pixels",
                                 NCPD_FIELD(train.augment_config.shift_x_max)));
    t.push_back(make_key<double>("shift_y_max", "maximum vertical shift in pixels",
                                 NCPD_FIELD(train.augment_config.shift_y_max)));
    t.push_back(make_key<double>("shift_correction", "steering change per shifted pixel",
                                 NCPD_FIELD(train.augment_config.shift_correction)));
    t.push_back(make_key<double>("shadow_probability", "probability of a shadow",
                                 NCPD_FIELD(train.augment_config.shadow_probability),
                                 within("shadow_probability", 0, 1, false)));
    t.push_back(make_key<double>("shadow_factor", "luminance factor inside shadows",
                                 NCPD_FIELD(train.augment_config.shadow_factor)));
    t.push_back(make_key<double>("brightness_min", "lower brightness factor",
                                 NCPD_FIELD(train.augment_config.brightness_min)));
    t.push_back(make_key<double>("brightness_max", "upper brightness factor",
                                 NCPD_FIELD(train.augment_config.brightness_max)));
    // Data
    t.push_back(make_key<std::string>("data", "training dataset directory", NCPD_FIELD(data)));
    t.push_back(make_key<std::string>("eval_data", "evaluation dataset directory",
                                      NCPD_FIELD(eval_data)));
    t.push_back(make_key<std::string>("condition", "synthetic condition: sunny, cloudy, night",
                                      NCPD_FIELD(condition),
                                      [](const std::string &v) { parse_condition(v); }));
    t.push_back(make_key<std::size_t>("frames", "synthetic frames to render",
                                      NCPD_FIELD(frames), positive<std::size_t>("frames")));
    t.push_back(make_key<std::string>("out", "output directory", NCPD_FIELD(out)));
    t.push_back(make_key<std::string>("checkpoint", "checkpoint file", NCPD_FIELD(checkpoint)));
    t.push_back(make_key<std::string>("results", "results CSV appended by eval",
                                      NCPD_FIELD(results)));
    // Experiment
    t.push_back(make_key<std::string>("train_condition", "experiment training condition",
                                      NCPD_FIELD(train_condition),
                                      [](const std::string &v) { parse_condition(v); }));
    t.push_back(make_key<std::string>(
        "eval_conditions", "experiment evaluation conditions (comma separated)",
        NCPD_FIELD(eval_conditions), [](const std::string &v) {
          for (const std::string &c : split_list(v)) parse_condition(c);
        }));
    t.push_back(make_key<std::size_t>("train_frames", "experiment training frames",
                                      NCPD_FIELD(train_frames),
                                      positive<std::size_t>("train_frames")));
    t.push_back(make_key<std::size_t>("eval_frames", "experiment frames per evaluation condition",
                                      NCPD_FIELD(eval_frames),
                                      positive<std::size_t>("eval_frames")));
    t.push_back(make_key<std::size_t>("seeds", "experiment seeds per model", NCPD_FIELD(seeds),
                                      positive<std::size_t>("seeds")));
    t.push_back(make_key<std::string>("variants", "experiment models (comma separated)",
                                      NCPD_FIELD(variants), [](const std::string &v) {
                                        for (const std::string &m : split_list(v)) parse_variant(m);
                                      }));
    t.push_back(make_key<std::size_t>("experiment_epochs", "epochs per experiment run",
                                      NCPD_FIELD(experiment_epochs),
                                      positive<std::size_t>("experiment_epochs")));
    t.push_back(make_key<std::size_t>("experiment_stride", "window stride in experiment runs",
                                      NCPD_FIELD(experiment_stride),
                                      positive<std::size_t>("experiment_stride")));
    t.push_back(make_key<double>("experiment_lr", "Adam learning rate in experiment runs",
                                 NCPD_FIELD(experiment_lr), within("experiment_lr", 0, 1, false)));
    // Server
    t.push_back(make_key<int>("port", "drive server TCP port (0: any free port)",
                              NCPD_FIELD(port), [](const int &v) {
                                if (v < 0 || v > 65535) throw ConfigError("port out of range");
                              }));
    t.push_back(make_key<double>("target_speed", "drive server target speed",
                                 NCPD_FIELD(target_speed)));
    t.push_back(make_key<double>("kp", "throttle proportional gain", NCPD_FIELD(kp)));
    t.push_back(make_key<std::size_t>("max_message_bytes", "largest accepted request line",
                                      NCPD_FIELD(max_message_bytes),
                                      positive<std::size_t>("max_message_bytes")));
    return t;
  }();
  return table;
}

#undef NCPD_FIELD

const KeyEntry &find_entry(const std::string &key)
{
  for (const KeyEntry &e : entries())
  {
    if (key == e.key.name)
    {
      return e;
    }
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey> &config_keys()
{
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const KeyEntry &e : entries())
    {
      k.push_back(e.key);
    }
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig &config, const std::string &key, const std::string &value)
{
  find_entry(key).set(config, value);
}

std::string get_config_value(const RunConfig &config, const std::string &key)
{
  return find_entry(key).get(config);
}

void apply_config_text(RunConfig &config, const std::string &text, const std::string &origin)
{
  std::istringstream in(text);
  std::string        line;
  std::size_t        line_no = 0;
  while (std::getline(in, line))
  {
    ++line_no;
    std::size_t const hash = line.find('#');
    if (hash != std::string::npos)
    {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty())
    {
      continue;
    }
    std::size_t const eq = line.find('=');
    if (eq == std::string::npos)
    {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try
    {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    catch (const ConfigError &e)
    {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig &config, const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_config_text(config, buffer.str(), path.string());
}

std::string format_config(const RunConfig &config)
{
  std::string out;
  for (const KeyEntry &e : entries())
  {
    out += std::string(e.key.name) + " = " + e.get(config) + "\n";
  }
  return out;
}

std::vector<std::string> split_list(const std::string &text)
{
  std::vector<std::string> out;
  std::stringstream        ss(text);
  std::string              item;
  while (std::getline(ss, item, ','))
  {
    item = trim(item);
    if (!item.empty())
    {
      out.push_back(item);
    }
  }
  return out;
}

std::string format_run_snapshot(const RunConfig &config)
{
  RunConfig c  = config;
  c.out        = {};
  c.checkpoint = {};
  c.results    = {};
  return format_config(c);
}

ArchitectureSpec spec_from_config(const RunConfig &config)
{
  ArchitectureSpec spec = default_spec(parse_variant(config.model), config.seed);
  spec.dropout          = static_cast<Real>(config.dropout);
  if (!config.fusion.empty())
  {
    spec.fusion = parse_fusion(config.fusion);
  }
  spec.solver.unfolds = config.unfolds;
  spec.solver.elapsed = static_cast<Real>(config.elapsed);
  for (WiringConfig *w : {&spec.left, &spec.right})
  {
    w->sensory_fanout             = config.sensory_fanout;
    w->inter_fanout               = config.inter_fanout;
    w->recurrent_command_synapses = config.recurrent_command_synapses;
    w->motor_fanin                = config.motor_fanin;
    *w                            = fit_fanouts(*w);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Architecture text

namespace {

void put_wiring(std::string &out, const std::string &side, const WiringConfig &w)
{
  auto put = [&](const std::string &key, std::uint64_t v) {
    out += side + "." + key + " = " + std::to_string(v) + "\n";
  };
  put("sensory", w.counts.sensory);
  put("inter", w.counts.inter);
  put("command", w.counts.command);
  put("motor", w.counts.motor);
  put("sensory_fanout", w.sensory_fanout);
  put("inter_fanout", w.inter_fanout);
  put("recurrent_command_synapses", w.recurrent_command_synapses);
  put("motor_fanin", w.motor_fanin);
  put("seed", w.seed);
}

}  // namespace

std::string format_spec(const ArchitectureSpec &spec)
{
  std::string out;
  out += "model = " + variant_name(spec.variant) + "\n";
  out += "seed = " + std::to_string(spec.seed) + "\n";
  out += "dropout = " + format_real(spec.dropout) + "\n";
  out += "fusion = " + fusion_name(spec.fusion) + "\n";
  out += "unfolds = " + std::to_string(spec.solver.unfolds) + "\n";
  out += "elapsed = " + format_real(spec.solver.elapsed) + "\n";
  put_wiring(out, "left", spec.left);
  put_wiring(out, "right", spec.right);
  return out;
}

ArchitectureSpec parse_spec(const std::string &text)
{
  ArchitectureSpec   spec;
  std::istringstream in(text);
  std::string        line;
  std::size_t        seen = 0;
  while (std::getline(in, line))
  {
    line = trim(line);
    if (line.empty())
    {
      continue;
    }
    std::size_t const eq = line.find('=');
    if (eq == std::string::npos)
    {
      throw FormatError("bad architecture line '" + line + "'");
    }
    std::string const key   = trim(line.substr(0, eq));
    std::string const value = trim(line.substr(eq + 1));
    ++seen;
    auto u64 = [&] { return parse_number<std::uint64_t>(key, value); };
    if (key == "model")
      spec.variant = parse_variant(value);
    else if (key == "seed")
      spec.seed = u64();
    else if (key == "dropout")
      spec.dropout = static_cast<Real>(parse_number<double>(key, value));
    else if (key == "fusion")
      spec.fusion = parse_fusion(value);
    else if (key == "unfolds")
      spec.solver.unfolds = parse_number<int>(key, value);
    else if (key == "elapsed")
      spec.solver.elapsed = static_cast<Real>(parse_number<double>(key, value));
    else
    {
      std::size_t const dot = key.find('.');
      if (dot == std::string::npos)
      {
        throw FormatError("unknown architecture key '" + key + "'");
      }
      std::string const side  = key.substr(0, dot);
      std::string const field = key.substr(dot + 1);
      if (side != "left" && side != "right")
      {
        throw FormatError("unknown architecture key '" + key + "'");
      }
      WiringConfig &w = side == "left" ? spec.left : spec.right;
      if (field == "sensory")
        w.counts.sensory = u64();
      else if (field == "inter")
        w.counts.inter = u64();
      else if (field == "command")
        w.counts.command = u64();
      else if (field == "motor")
        w.counts.motor = u64();
      else if (field == "sensory_fanout")
        w.sensory_fanout = u64();
      else if (field == "inter_fanout")
        w.inter_fanout = u64();
      else if (field == "recurrent_command_synapses")
        w.recurrent_command_synapses = u64();
      else if (field == "motor_fanin")
        w.motor_fanin = u64();
      else if (field == "seed")
        w.seed = u64();
      else
        throw FormatError("unknown architecture key '" + key + "'");
    }
  }
  if (seen != 24)
  {
    throw FormatError("architecture description is incomplete");
  }
  return spec;
}

}  // namespace ncpdrive
