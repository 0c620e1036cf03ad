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


// Acceptance run: one PASS/FAIL line per criterion. Arguments select
// criteria by number (default: all).
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "ncpdrive/checkpoint.hpp"
#include "ncpdrive/commands.hpp"
#include "ncpdrive/data.hpp"
#include "ncpdrive/experiment.hpp"
#include "ncpdrive/image.hpp"
#include "ncpdrive/ltc.hpp"
#include "ncpdrive/server.hpp"
#include "ncpdrive/training.hpp"
#include "outcome.hpp"

using namespace ncpdrive;
using acceptance::Outcome;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t)
{
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char *f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path work_dir(const std::string &name)
{
  fs::path const p = fs::temp_directory_path() / "ncpd_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path &p)
{
  std::ifstream     in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// --------------------------------------------------------------------------
// 2. Wiring validity

// Counts synapses in the four layer-allowed blocks straight from the
// adjacency accessors.
double counted_sparsity(const NcpWiring &w)
{
  LayerCounts const c = w.counts();
  std::size_t       present = 0;
  for (std::size_t s = 0; s < c.sensory; ++s)
    for (std::size_t i = 0; i < c.inter; ++i) present += w.sensory_synapse(s, i) != 0;
  for (std::size_t i = 0; i < c.inter; ++i)
    for (std::size_t k = 0; k < c.command; ++k) present += w.synapse(i, c.inter + k) != 0;
  for (std::size_t a = 0; a < c.command; ++a)
    for (std::size_t b = 0; b < c.command; ++b) present += w.synapse(c.inter + a, c.inter + b) != 0;
  for (std::size_t a = 0; a < c.command; ++a)
    for (std::size_t m = 0; m < c.motor; ++m)
      present += w.synapse(c.inter + a, c.inter + c.command + m) != 0;
  double const slots = static_cast<double>(c.sensory * c.inter + c.inter * c.command +
                                           c.command * c.command + c.command * c.motor);
  return 1.0 - static_cast<double>(present) / slots;
}

Outcome check_wiring()
{
  std::size_t violations = 0, built = 0;
  std::string first;
  for (Variant v : kAllVariants)
  {
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
      Model const m(default_spec(v, seed));
      for (const NcpWiring &w : m.wirings())
      {
        ++built;
        auto const problems = validate(w);
        if (!problems.empty() && first.empty())
        {
          first = variant_name(v) + " seed " + std::to_string(seed) + ": " + problems.front();
        }
        violations += problems.size();
      }
    }
  }
  double const s = counted_sparsity(Model(default_spec(Variant::kCnnNcp, 0)).wirings().at(0));
  std::string detail = std::to_string(built) + " circuits over 6 variants x 100 seeds, " +
                       std::to_string(violations) + " violations; CNN-NCP sparsity " +
                       fmt("%.4f", s) + " (counted)";
  if (!first.empty()) detail += "; first: " + first;
  return {violations == 0 && s > 0.75, detail};
}

// --------------------------------------------------------------------------
// 3. LTC stability

Outcome check_ltc()
{
  // Envelope: every potential stays within [min(vleak, -1, v0), max(vleak, 1, v0)].
  std::size_t escapes = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed)
  {
    NcpWiring const w = build_ncp(WiringConfig{{100, 12, 8, 1}, 2, 5, 6, 6, seed});
    Rng             rng(seed + 100);
    LtcParams const p = init_params(w, rng);
    LtcState        s{Tensor(Shape{w.neurons()})};
    for (Real &v : s.v.values()) v = static_cast<Real>(rng.uniform(-0.5, 0.5));
    double lo = -1, hi = 1;
    for (Real x : p.vleak.values()) lo = std::min<double>(lo, x), hi = std::max<double>(hi, x);
    for (Real x : s.v.values()) lo = std::min<double>(lo, x), hi = std::max<double>(hi, x);
    Tensor input(Shape{100});
    for (int step = 0; step < 1000; ++step)
    {
      for (Real &v : input.values()) v = static_cast<Real>(rng.uniform(-5, 5));
      s = ltc_step(s, input, p, w, 1, 6).first;
      for (Real v : s.v.values()) escapes += (v < lo - 1e-5 || v > hi + 1e-5);
    }
  }
  // Unfold doubling: successive refinements move the state by less each time.
  std::size_t non_monotone = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed)
  {
    NcpWiring const w = build_ncp(WiringConfig{{6, 4, 3, 2}, 2, 2, 3, 2, seed});
    Rng             rng(seed);
    LtcParams const p = init_params(w, rng);
    LtcState        s0{Tensor(Shape{w.neurons()})};
    for (Real &v : s0.v.values()) v = static_cast<Real>(rng.uniform(-0.5, 0.5));
    Tensor in(Shape{6});
    for (Real &v : in.values()) v = static_cast<Real>(rng.uniform(-1, 1));
    double previous = INFINITY;
    Tensor coarse   = ltc_step(s0, in, p, w, 1, 1).first.v;
    for (int k = 1; k <= 32; k *= 2)
    {
      Tensor const fine = ltc_step(s0, in, p, w, 1, 2 * k).first.v;
      double       gap  = 0;
      for (std::size_t i = 0; i < fine.size(); ++i)
        gap += std::pow(static_cast<double>(fine[i]) - coarse[i], 2);
      gap = std::sqrt(gap);
      if (!(gap < previous))
      {
        ++non_monotone;
        break;
      }
      previous = gap;
      coarse   = fine;
    }
  }
  return {escapes == 0 && non_monotone == 0,
          "5 x 1000 random-input steps: " + std::to_string(escapes) +
              " envelope escapes; unfolds 1..64 doubling: " + std::to_string(non_monotone) +
              " of 50 instances non-monotone"};
}

// --------------------------------------------------------------------------
// 4. Shape conformance

Outcome check_shapes()
{
  bool        ok = true;
  std::string detail;
  Tensor      frames(Shape{2, kFrameHeight, kFrameWidth, kFrameChannels}, Real(0.1));
  for (Variant v : kAllVariants)
  {
    if (!is_recurrent(v)) continue;
    Model const m(default_spec(v, 0));
    ad::Graph   g;
    ModelVars   vars = m.bind(g);
    Tensor const &f  = g.forward(m.features(vars, g.constant(frames), nullptr));
    ok               = ok && f.shape() == Shape{2, 100};
    if (v == Variant::kCnnNcp) detail = "features [2,66,200,3] -> " + shape_string(f.shape());
  }
  // (inter, command) per hemisphere.
  struct Row { Variant v; std::size_t li, lc, ri, rc; };
  const Row table[] = {{Variant::kCnnDncp1, 3, 5, 4, 6},
                       {Variant::kCnnDncp2, 9, 7, 12, 8},
                       {Variant::kCnnDncp3, 12, 8, 5, 3},
                       {Variant::kCnnDncp4, 12, 8, 5, 3}};
  std::size_t matches = 0;
  for (const Row &r : table)
  {
    Model const m(default_spec(r.v, 3));
    auto const &w = m.wirings();
    bool const  match = w.size() == 2 && w[0].counts() == LayerCounts{100, r.li, r.lc, 1} &&
                       w[1].counts() == LayerCounts{100, r.ri, r.rc, 1};
    matches += match;
  }
  ok = ok && matches == 4;
  return {ok, detail + "; DNCP hemisphere counts matching: " + std::to_string(matches) + "/4"};
}

// --------------------------------------------------------------------------
// 5. Overfit

struct Reached
{
  std::size_t step;
  double      mse;
};

Episode overfit_set()
{
  // 16 frames spread over a longer drive so the labels vary.
  Episode const full = synth_generate(Condition::kSunny, 800, 7, {.side_cameras = false});
  Episode       e;
  e.condition = full.condition;
  for (int i = 0; i < 16; ++i) e.samples.push_back(full.samples[static_cast<std::size_t>(i) * 50]);
  return e;
}

Outcome check_overfit()
{
  Episode const set     = overfit_set();
  bool          all     = true;
  std::string   detail;
  for (Variant v : kAllVariants)
  {
    auto const  start = Clock::now();
    Model       model(default_spec(v, 1));
    TrainConfig cfg;
    cfg.adam.lr       = 1e-3;
    cfg.batch_frames  = 16;  // the whole set per step
    cfg.batch_windows = 1;
    cfg.window        = 16;
    cfg.epochs        = 500;  // one optimizer step per epoch
    cfg.max_steps     = 500;
    cfg.seed          = 1;
    std::size_t hit   = 0;
    double      best  = INFINITY;
    try
    {
      fit(model, {set}, {}, cfg, [&](const EpochRecord &r) {
        best = std::min(best, r.train_mse);
        if (r.train_mse < 1e-2) throw Reached{r.steps, r.train_mse};
      });
    }
    catch (const Reached &r)
    {
      hit  = r.step;
      best = r.mse;
    }
    double const secs = seconds_since(start);
    bool const   pass = hit > 0 && secs < 600;
    all               = all && pass;
    detail += (detail.empty() ? "" : "; ") + variant_name(v) + " " +
              (hit ? "step " + std::to_string(hit) : "not reached (best " + fmt("%.4g", best) + ")") +
              fmt(" %.0fs", secs);
  }
  return {all, detail};
}

// --------------------------------------------------------------------------
// 6. Protocol reproduction

Outcome check_experiment()
{
  RunConfig c;  // defaults: sunny 2000 frames, cloudy + night 500, 3 seeds, all 6 models
  c.out = work_dir("experiment").string();
  auto const start = Clock::now();
  std::ostringstream log;
  int const  rc   = cmd_experiment(c, log);
  double const secs = seconds_since(start);
  std::string const table = slurp(fs::path(c.out) / "comparison.txt");
  std::cout << table << std::flush;
  std::size_t rows = 0;
  for (Variant v : kAllVariants)
  {
    rows += table.find("\n" + variant_name(v) + " ") != std::string::npos;
  }
  bool const has_columns = table.find("train") != std::string::npos &&
                           table.find("eval cloudy") != std::string::npos &&
                           table.find("gap night") != std::string::npos;
  return {rc == 0 && rows == 6 && has_columns && secs < 3600,
          std::to_string(rows) + "/6 models in the table, exit " + std::to_string(rc) +
              fmt(", %.1f min", secs / 60)};
}

// --------------------------------------------------------------------------
// 7. Determinism

Outcome check_determinism()
{
  std::ostringstream log;
  std::vector<std::string> differing;
  auto compare = [&](const fs::path &a, const fs::path &b) {
    for (const auto &e : fs::recursive_directory_iterator(a))
    {
      if (!e.is_regular_file()) continue;
      fs::path const rel = fs::relative(e.path(), a);
      if (slurp(e.path()) != slurp(b / rel)) differing.push_back(rel.string());
    }
  };
  // Two consecutive runs into the same directory; the first is kept aside.
  fs::path dirs[2] = {work_dir("determinism_first"), {}};
  for (int k = 0; k < 2; ++k)
  {
    dirs[1] = work_dir("determinism");
    RunConfig s;
    s.frames    = 60;
    s.seed      = 3;
    s.condition = "cloudy";
    s.out       = (dirs[1] / "synth").string();
    cmd_synth(s, log);

    RunConfig t;
    t.model        = "cnn-dncp-v4";
    t.data         = s.out;
    t.seed         = 5;
    t.train.epochs = 2;
    t.segment      = 30;
    t.out          = (dirs[1] / "train").string();
    cmd_train(t, log);

    RunConfig e;
    e.checkpoint = (dirs[1] / "train" / "model.ncpd").string();
    e.eval_data  = s.out;
    e.results    = (dirs[1] / "eval" / "results.csv").string();
    cmd_eval(e, log);

    RunConfig x;
    x.train_frames      = 64;
    x.eval_frames       = 16;
    x.segment           = 32;
    x.seeds             = 1;
    x.experiment_epochs = 1;
    x.variants          = "cnn,cnn-ncp";
    x.out               = (dirs[1] / "experiment").string();
    cmd_experiment(x, log);
    if (k == 0) fs::copy(dirs[1], dirs[0], fs::copy_options::recursive);
  }
  compare(dirs[0], dirs[1]);
  std::size_t files = 0;
  for (const auto &e : fs::recursive_directory_iterator(dirs[0])) files += e.is_regular_file();
  std::string detail = std::to_string(files) + " files from synth/train/eval/experiment, " +
                       std::to_string(differing.size()) + " differ";
  if (!differing.empty()) detail += " (first: " + differing.front() + ")";
  return {differing.empty() && files > 0, detail};
}

// --------------------------------------------------------------------------
// 8. Round trips

Outcome check_round_trips()
{
  std::size_t fixed = 0;
  for (Variant v : kAllVariants)
  {
    Model const  m(default_spec(v, 17));
    auto const   bytes = serialize_checkpoint(m);
    fs::path const path = work_dir("ckpt") / "m.ncpd";
    save_checkpoint(m, path);
    Model const back = load_checkpoint(path);
    fixed += serialize_checkpoint(back) == bytes && back.parameters() == m.parameters() &&
             back.spec() == m.spec();
  }
  // White and black frames: Y, Cb, Cr = (255|0, 128, 128) then x / 127.5 - 1.
  auto golden = [](std::uint8_t level, Real y) {
    Image img;
    img.height = kRawHeight;
    img.width  = kRawWidth;
    img.rgb.assign(img.height * img.width * 3, level);
    Tensor const t       = preprocess(img);
    Real const   chroma  = static_cast<Real>(128.0 / 127.5 - 1.0);
    for (std::size_t i = 0; i < t.size(); i += 3)
    {
      if (t[i] != y || t[i + 1] != chroma || t[i + 2] != chroma) return false;
    }
    return true;
  };
  bool const white = golden(255, Real(1));
  bool const black = golden(0, Real(-1));
  return {fixed == 6 && white && black,
          "checkpoint fixed point " + std::to_string(fixed) + "/6 variants; white frame " +
              (white ? "exact" : "MISMATCH") + ", black frame " + (black ? "exact" : "MISMATCH")};
}

// --------------------------------------------------------------------------
// 9. Server contract

class Client
{
public:
  explicit Client(int port)
  {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family      = AF_INET;
    addr.sin_port        = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd_, reinterpret_cast<sockaddr *>(&addr), sizeof addr) != 0)
      throw std::runtime_error("connect failed");
  }
  ~Client() { ::close(fd_); }

  std::string exchange(const std::string &line)
  {
    std::string const data = line + "\n";
    for (std::size_t sent = 0; sent < data.size();)
    {
      ssize_t const n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return "";
      sent += static_cast<std::size_t>(n);
    }
    for (;;)
    {
      std::size_t const nl = buffer_.find('\n');
      if (nl != std::string::npos)
      {
        std::string reply = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return reply;
      }
      char          buf[4096];
      ssize_t const n = ::recv(fd_, buf, sizeof buf, 0);
      if (n <= 0) return "";
      buffer_.append(buf, static_cast<std::size_t>(n));
    }
  }

private:
  int         fd_ = -1;
  std::string buffer_;
};

Outcome check_server()
{
  Model const model(default_spec(Variant::kCnnDncp2, 4));
  DriveServer server(model, DriveConfig{}, 0);
  std::thread runner([&] { server.run(); });

  Episode const drive = synth_generate(Condition::kSunny, 96, 11, {.side_cameras = false});
  auto request = [&](std::size_t i, double speed) {
    return json{{"image", base64_encode(encode_png(drive.samples.at(i).frame))}, {"speed", speed}}.dump();
  };

  std::size_t cycles = 0, schema_ok = 0;
  double      first = 0, second = 0, after_reset[2] = {0, 0};
  int         resets = 0;
  {
    Client client(server.port());
    auto   steer = [&](const std::string &req) {
      ++cycles;
      json const j = json::parse(client.exchange(req), nullptr, false);
      bool const ok = j.is_object() && j.size() == 2 && j.contains("steering") &&
                      j["steering"].is_number() && j.contains("throttle") &&
                      j["throttle"].is_number() && std::isfinite(j["steering"].get<double>()) &&
                      j["throttle"].get<double>() >= 0 && j["throttle"].get<double>() <= 1;
      schema_ok += ok;
      return ok ? j["steering"].get<double>() : NAN;
    };
    auto reset = [&] {
      ++cycles;
      schema_ok += json::parse(client.exchange("{\"reset\": true}"), nullptr, false) ==
                   json{{"reset", true}};
    };
    auto malformed = [&] {
      ++cycles;
      json const j = json::parse(client.exchange("{\"image\": 42"), nullptr, false);
      schema_ok += j.is_object() && j.size() == 1 && j.contains("error") && j["error"].is_string();
    };

    first  = steer(request(0, 10));
    second = steer(request(0, 10));
    for (std::size_t i = 1; cycles < 40; ++i) steer(request(i, 5 + static_cast<double>(i % 20)));
    malformed();
    for (std::size_t i = 40; cycles < 70; ++i) steer(request(i, 20));
    reset();
    after_reset[resets++] = steer(request(0, 10));
    for (std::size_t i = 70; cycles < 98; ++i) steer(request(i, 25));
    reset();
    after_reset[resets++] = steer(request(0, 10));
  }
  server.stop();
  runner.join();

  bool const carried  = first != second;
  bool const restored = after_reset[0] == after_reset[1] && after_reset[0] == first;
  return {cycles == 100 && schema_ok == 100 && carried && restored,
          std::to_string(cycles) + " cycles, " + std::to_string(schema_ok) +
              " schema-valid; repeated frame " + (carried ? "differs" : "DOES NOT differ") +
              " before reset; after two resets " + (restored ? "identical" : "NOT identical")};
}

struct Criterion
{
  int         id;
  const char *name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char **argv)
{
  const Criterion criteria[] = {
      {1, "gradient correctness", acceptance::check_gradients},
      {2, "wiring validity", check_wiring},
      {3, "LTC stability", check_ltc},
      {4, "shape conformance", check_shapes},
      {5, "overfit", check_overfit},
      {6, "protocol reproduction", check_experiment},
      {7, "determinism", check_determinism},
      {8, "round trips", check_round_trips},
      {9, "server contract", check_server},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion &c : criteria)
  {
    if (!selected.empty() && !selected.count(c.id)) continue;
    auto const start = Clock::now();
    Outcome    out;
    try
    {
      out = c.run();
    }
    catch (const std::exception &e)
    {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += !out.pass;
    std::printf("criterion %d (%s): %s: %s [%.1f s]\n", c.id, c.name, out.pass ? "PASS" : "FAIL",
                out.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
