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

#include "ncpdrive/wiring.hpp"

#include <deque>
#include <sstream>

#include "ncpdrive/rng.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

namespace {

int draw_polarity(Rng &rng)
{
  return rng.bernoulli(0.5) ? 1 : -1;
}

void check_polarity(int polarity)
{
  if (polarity < -1 || polarity > 1)
  {
    throw ConfigError("synapse polarity must be -1, 0 or +1, got " + std::to_string(polarity));
  }
}

bool allowed(const LayerCounts &c, Layer pre, Layer post)
{
  (void)c;
  return (pre == Layer::kInter && post == Layer::kCommand) ||
         (pre == Layer::kCommand && (post == Layer::kCommand || post == Layer::kMotor));
}

bool has_sensory_input(const NcpWiring &w, std::size_t post)
{
  for (std::size_t s = 0; s < w.counts().sensory; ++s)
  {
    if (w.sensory_synapse(s, post) != 0)
    {
      return true;
    }
  }
  return false;
}

bool has_input_from(const NcpWiring &w, std::size_t post, std::size_t begin, std::size_t end)
{
  for (std::size_t pre = begin; pre < end; ++pre)
  {
    if (w.synapse(pre, post) != 0)
    {
      return true;
    }
  }
  return false;
}

bool has_output_to(const NcpWiring &w, std::size_t pre, std::size_t begin, std::size_t end)
{
  for (std::size_t post = begin; post < end; ++post)
  {
    if (w.synapse(pre, post) != 0)
    {
      return true;
    }
  }
  return false;
}

// Coverage patching shared by the NCP and random builders: every inter neuron
// gets a sensory input, every command neuron an inter input and every motor
// neuron a command input.
void patch_coverage(NcpWiring &w, Rng &rng)
{
  LayerCounts const &c = w.counts();
  for (std::size_t i = 0; i < c.inter; ++i)
  {
    if (!has_sensory_input(w, i))
    {
      w.set_sensory_synapse(rng.below(c.sensory), i, draw_polarity(rng));
    }
  }
  for (std::size_t k = c.command_begin(); k < c.motor_begin(); ++k)
  {
    if (!has_input_from(w, k, 0, c.inter))
    {
      w.set_synapse(rng.below(c.inter), k, draw_polarity(rng));
    }
  }
  for (std::size_t m = c.motor_begin(); m < c.neurons(); ++m)
  {
    if (!has_input_from(w, m, c.command_begin(), c.motor_begin()))
    {
      w.set_synapse(c.command_begin() + rng.below(c.command), m, draw_polarity(rng));
    }
  }
}

}  // namespace

const char *layer_name(Layer layer)
{
  switch (layer)
  {
  case Layer::kInter:
    return "inter";
  case Layer::kCommand:
    return "command";
  case Layer::kMotor:
    return "motor";
  }
  return "?";
}

void check_config(const WiringConfig &config)
{
  LayerCounts const &c = config.counts;
  if (c.sensory == 0 || c.inter == 0 || c.command == 0 || c.motor == 0)
  {
    throw ConfigError("every layer needs at least one neuron");
  }
  auto check_fanout = [](const char *what, std::size_t value, std::size_t limit) {
    if (value < 1 || value > limit)
    {
      throw ConfigError(std::string(what) + " = " + std::to_string(value) + " must lie in [1, " +
                        std::to_string(limit) + "]");
    }
  };
  check_fanout("sensory_fanout", config.sensory_fanout, c.inter);
  check_fanout("inter_fanout", config.inter_fanout, c.command);
  check_fanout("motor_fanin", config.motor_fanin, c.command);
  if (config.recurrent_command_synapses > c.command * c.command)
  {
    throw ConfigError("recurrent_command_synapses = " +
                      std::to_string(config.recurrent_command_synapses) + " exceeds " +
                      std::to_string(c.command * c.command) + " command pairs");
  }
}

NcpWiring::NcpWiring(LayerCounts counts)
  : counts_(counts)
  , adj_(counts.neurons() * counts.neurons(), 0)
  , sensory_adj_(counts.sensory * counts.neurons(), 0)
{}

Layer NcpWiring::layer_of(std::size_t neuron) const
{
  if (neuron < counts_.command_begin())
  {
    return Layer::kInter;
  }
  if (neuron < counts_.motor_begin())
  {
    return Layer::kCommand;
  }
  if (neuron < counts_.neurons())
  {
    return Layer::kMotor;
  }
  throw ConfigError("neuron " + std::to_string(neuron) + " out of range");
}

int NcpWiring::synapse(std::size_t pre, std::size_t post) const
{
  return adj_.at(pre * neurons() + post);
}

void NcpWiring::set_synapse(std::size_t pre, std::size_t post, int polarity)
{
  check_polarity(polarity);
  adj_.at(pre * neurons() + post) = static_cast<std::int8_t>(polarity);
}

int NcpWiring::sensory_synapse(std::size_t sensory, std::size_t post) const
{
  return sensory_adj_.at(sensory * neurons() + post);
}

void NcpWiring::set_sensory_synapse(std::size_t sensory, std::size_t post, int polarity)
{
  check_polarity(polarity);
  sensory_adj_.at(sensory * neurons() + post) = static_cast<std::int8_t>(polarity);
}

std::size_t NcpWiring::synapse_count() const
{
  std::size_t n = 0;
  for (auto v : adj_)
  {
    n += v != 0 ? 1 : 0;
  }
  return n;
}

std::size_t NcpWiring::sensory_synapse_count() const
{
  std::size_t n = 0;
  for (auto v : sensory_adj_)
  {
    n += v != 0 ? 1 : 0;
  }
  return n;
}

namespace {

Tensor to_tensor(const std::vector<std::int8_t> &cells, std::size_t rows, std::size_t cols, bool as_mask)
{
  Tensor t(Shape{rows, cols});
  for (std::size_t i = 0; i < cells.size(); ++i)
  {
    t[i] = as_mask ? Real(cells[i] != 0 ? 1 : 0) : Real(cells[i]);
  }
  return t;
}

}  // namespace

Tensor NcpWiring::polarity() const
{
  return to_tensor(adj_, neurons(), neurons(), false);
}

Tensor NcpWiring::sensory_polarity() const
{
  return to_tensor(sensory_adj_, counts_.sensory, neurons(), false);
}

Tensor NcpWiring::mask() const
{
  return to_tensor(adj_, neurons(), neurons(), true);
}

Tensor NcpWiring::sensory_mask() const
{
  return to_tensor(sensory_adj_, counts_.sensory, neurons(), true);
}

NcpWiring build_ncp(const WiringConfig &config)
{
  check_config(config);
  LayerCounts const &c = config.counts;
  NcpWiring          w(c);
  Rng                rng(config.seed);

  // 1. sensory -> inter fan-out
  for (std::size_t s = 0; s < c.sensory; ++s)
  {
    for (std::size_t i : rng.sample_distinct(c.inter, config.sensory_fanout))
    {
      w.set_sensory_synapse(s, i, draw_polarity(rng));
    }
  }
  // 2. inter neurons left without input
  for (std::size_t i = 0; i < c.inter; ++i)
  {
    if (!has_sensory_input(w, i))
    {
      w.set_sensory_synapse(rng.below(c.sensory), i, draw_polarity(rng));
    }
  }
  // 3. inter -> command fan-out, then uncovered command neurons
  for (std::size_t i = 0; i < c.inter; ++i)
  {
    for (std::size_t k : rng.sample_distinct(c.command, config.inter_fanout))
    {
      w.set_synapse(i, c.command_begin() + k, draw_polarity(rng));
    }
  }
  for (std::size_t k = c.command_begin(); k < c.motor_begin(); ++k)
  {
    if (!has_input_from(w, k, 0, c.inter))
    {
      w.set_synapse(rng.below(c.inter), k, draw_polarity(rng));
    }
  }
  // 4. command recurrence (self-loops allowed)
  for (std::size_t pair : rng.sample_distinct(c.command * c.command, config.recurrent_command_synapses))
  {
    std::size_t const pre  = c.command_begin() + pair / c.command;
    std::size_t const post = c.command_begin() + pair % c.command;
    w.set_synapse(pre, post, draw_polarity(rng));
  }
  // 5. command -> motor fan-in, then command neurons that reach no motor
  for (std::size_t m = c.motor_begin(); m < c.neurons(); ++m)
  {
    for (std::size_t k : rng.sample_distinct(c.command, config.motor_fanin))
    {
      w.set_synapse(c.command_begin() + k, m, draw_polarity(rng));
    }
  }
  for (std::size_t k = c.command_begin(); k < c.motor_begin(); ++k)
  {
    if (!has_output_to(w, k, c.motor_begin(), c.neurons()))
    {
      w.set_synapse(k, c.motor_begin() + rng.below(c.motor), draw_polarity(rng));
    }
  }
  return w;
}

NcpWiring build_fc(LayerCounts counts, std::uint64_t seed)
{
  return build_random(counts, 1.0, seed);
}

NcpWiring build_random(LayerCounts counts, double density, std::uint64_t seed)
{
  if (!(density > 0.0 && density <= 1.0))
  {
    throw ConfigError("wiring density must lie in (0, 1], got " + std::to_string(density));
  }
  WiringConfig probe;
  probe.counts         = counts;
  probe.sensory_fanout = probe.inter_fanout = probe.motor_fanin = 1;
  probe.recurrent_command_synapses                               = 0;
  check_config(probe);

  NcpWiring w(counts);
  Rng       rng(seed);
  for (std::size_t s = 0; s < counts.sensory; ++s)
  {
    for (std::size_t i = 0; i < counts.inter; ++i)
    {
      if (rng.uniform() < density)
      {
        w.set_sensory_synapse(s, i, draw_polarity(rng));
      }
    }
  }
  for (std::size_t pre = 0; pre < counts.neurons(); ++pre)
  {
    for (std::size_t post = 0; post < counts.neurons(); ++post)
    {
      if (allowed(counts, w.layer_of(pre), w.layer_of(post)) && rng.uniform() < density)
      {
        w.set_synapse(pre, post, draw_polarity(rng));
      }
    }
  }
  patch_coverage(w, rng);
  return w;
}

std::size_t allowed_synapse_count(const LayerCounts &c)
{
  return c.sensory * c.inter + c.inter * c.command + c.command * c.command + c.command * c.motor;
}

double sparsity(const NcpWiring &wiring)
{
  LayerCounts const &c       = wiring.counts();
  std::size_t        present = 0;
  for (std::size_t s = 0; s < c.sensory; ++s)
  {
    for (std::size_t i = 0; i < c.inter; ++i)
    {
      present += wiring.sensory_synapse(s, i) != 0 ? 1 : 0;
    }
  }
  for (std::size_t pre = 0; pre < c.neurons(); ++pre)
  {
    for (std::size_t post = 0; post < c.neurons(); ++post)
    {
      if (allowed(c, wiring.layer_of(pre), wiring.layer_of(post)) && wiring.synapse(pre, post) != 0)
      {
        ++present;
      }
    }
  }
  double const total = static_cast<double>(allowed_synapse_count(c));
  return 1.0 - static_cast<double>(present) / total;
}

std::vector<std::string> validate(const NcpWiring &wiring)
{
  std::vector<std::string> violations;
  LayerCounts const       &c = wiring.counts();
  if (c.sensory == 0 || c.inter == 0 || c.command == 0 || c.motor == 0)
  {
    violations.emplace_back("every layer needs at least one neuron");
    return violations;
  }

  for (std::size_t s = 0; s < c.sensory; ++s)
  {
    for (std::size_t post = 0; post < c.neurons(); ++post)
    {
      Layer const layer = wiring.layer_of(post);
      if (wiring.sensory_synapse(s, post) != 0 && layer != Layer::kInter)
      {
        violations.push_back("sensory " + std::to_string(s) + " -> " + layer_name(layer) +
                             " neuron " + std::to_string(post) +
                             ": sensory synapses may only target inter neurons");
      }
    }
  }
  for (std::size_t pre = 0; pre < c.neurons(); ++pre)
  {
    for (std::size_t post = 0; post < c.neurons(); ++post)
    {
      Layer const from = wiring.layer_of(pre);
      Layer const to   = wiring.layer_of(post);
      if (wiring.synapse(pre, post) != 0 && !allowed(c, from, to))
      {
        violations.push_back(std::string(layer_name(from)) + " neuron " + std::to_string(pre) + " -> " +
                             layer_name(to) + " neuron " + std::to_string(post) +
                             ": synapse not allowed by the layer rules");
      }
    }
  }
  for (std::size_t i = 0; i < c.inter; ++i)
  {
    if (!has_sensory_input(wiring, i))
    {
      violations.push_back("inter neuron " + std::to_string(i) + " has no incoming sensory synapse");
    }
  }
  for (std::size_t k = c.command_begin(); k < c.motor_begin(); ++k)
  {
    if (!has_input_from(wiring, k, 0, c.inter))
    {
      violations.push_back("command neuron " + std::to_string(k) + " has no incoming inter synapse");
    }
  }
  for (std::size_t m = c.motor_begin(); m < c.neurons(); ++m)
  {
    if (!has_input_from(wiring, m, c.command_begin(), c.motor_begin()))
    {
      violations.push_back("motor neuron " + std::to_string(m) + " has no incoming command synapse");
    }
  }
  return violations;
}

bool motors_reachable(const NcpWiring &wiring)
{
  LayerCounts const &c = wiring.counts();
  std::vector<char>  seen(c.neurons(), 0);
  std::deque<std::size_t> frontier;
  for (std::size_t s = 0; s < c.sensory; ++s)
  {
    for (std::size_t post = 0; post < c.neurons(); ++post)
    {
      if (wiring.sensory_synapse(s, post) != 0 && seen[post] == 0)
      {
        seen[post] = 1;
        frontier.push_back(post);
      }
    }
  }
  while (!frontier.empty())
  {
    std::size_t const pre = frontier.front();
    frontier.pop_front();
    for (std::size_t post = 0; post < c.neurons(); ++post)
    {
      if (wiring.synapse(pre, post) != 0 && seen[post] == 0)
      {
        seen[post] = 1;
        frontier.push_back(post);
      }
    }
  }
  for (std::size_t m = c.motor_begin(); m < c.neurons(); ++m)
  {
    if (seen[m] == 0)
    {
      return false;
    }
  }
  return true;
}

std::string export_text(const NcpWiring &wiring)
{
  LayerCounts const &c = wiring.counts();
  std::ostringstream os;
  os << "ncp " << c.sensory << ' ' << c.inter << ' ' << c.command << ' ' << c.motor << '\n';
  for (std::size_t s = 0; s < c.sensory; ++s)
  {
    for (std::size_t post = 0; post < c.neurons(); ++post)
    {
      if (int p = wiring.sensory_synapse(s, post); p != 0)
      {
        os << s << ' ' << c.sensory + post << ' ' << p << '\n';
      }
    }
  }
  for (std::size_t pre = 0; pre < c.neurons(); ++pre)
  {
    for (std::size_t post = 0; post < c.neurons(); ++post)
    {
      if (int p = wiring.synapse(pre, post); p != 0)
      {
        os << c.sensory + pre << ' ' << c.sensory + post << ' ' << p << '\n';
      }
    }
  }
  return os.str();
}

NcpWiring parse_text(std::string_view text)
{
  std::istringstream is{std::string(text)};
  std::string        tag;
  LayerCounts        c;
  if (!(is >> tag >> c.sensory >> c.inter >> c.command >> c.motor) || tag != "ncp")
  {
    throw FormatError("wiring dump must start with 'ncp <S> <I> <C> <M>'");
  }
  NcpWiring   w(c);
  long long   src = 0;
  long long   dst = 0;
  int         polarity = 0;
  std::size_t line     = 1;
  auto const  total    = static_cast<long long>(c.sensory + c.neurons());
  while (is >> src >> dst >> polarity)
  {
    ++line;
    if (src < 0 || dst < static_cast<long long>(c.sensory) || src >= total || dst >= total ||
        (polarity != 1 && polarity != -1))
    {
      throw FormatError("bad synapse on line " + std::to_string(line));
    }
    auto const s = static_cast<std::size_t>(src);
    auto const d = static_cast<std::size_t>(dst) - c.sensory;
    if (s < c.sensory)
    {
      w.set_sensory_synapse(s, d, polarity);
    }
    else
    {
      w.set_synapse(s - c.sensory, d, polarity);
    }
  }
  if (!is.eof())
  {
    throw FormatError("malformed synapse after line " + std::to_string(line));
  }
  return w;
}

}  // namespace ncpdrive
