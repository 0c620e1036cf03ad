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

#include "ncpdrive/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ncpdrive/models.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

namespace {

std::uint8_t clip_u8(double v)
{
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

// ---------------------------------------------------------------------------
// Preprocessing

void preprocess_into(const Image &frame, std::span<Real> out)
{
  if (frame.empty() || frame.rgb.size() != frame.height * frame.width * 3)
  {
    throw ShapeError("preprocess needs a non-empty 3-channel RGB frame");
  }
  if (out.size() != kFrameHeight * kFrameWidth * kFrameChannels)
  {
    throw ShapeError("preprocess output buffer has the wrong size");
  }
  Image resized;
  const Image *src = &frame;
  if (frame.height != kRawHeight || frame.width != kRawWidth)
  {
    resized = resize(frame, kRawHeight, kRawWidth);
    src     = &resized;
  }
  double const rows = static_cast<double>(kCropEnd - kCropTop);
  double const sy   = rows / static_cast<double>(kFrameHeight);
  double const sx   = static_cast<double>(kRawWidth) / static_cast<double>(kFrameWidth);
  std::size_t  k    = 0;
  for (std::size_t y = 0; y < kFrameHeight; ++y)
  {
    double const fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, rows - 1);
    std::size_t const y0 = static_cast<std::size_t>(fy);
    std::size_t const y1 = std::min<std::size_t>(y0 + 1, kCropEnd - kCropTop - 1);
    double const      ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < kFrameWidth; ++x)
    {
      double const fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(kRawWidth - 1));
      std::size_t const x0 = static_cast<std::size_t>(fx);
      std::size_t const x1 = std::min<std::size_t>(x0 + 1, kRawWidth - 1);
      double const      tx = fx - static_cast<double>(x0);
      double            rgb[3];
      for (std::size_t c = 0; c < 3; ++c)
      {
        double const p00 = src->at(kCropTop + y0, x0, c), p01 = src->at(kCropTop + y0, x1, c);
        double const p10 = src->at(kCropTop + y1, x0, c), p11 = src->at(kCropTop + y1, x1, c);
        double const top = p00 + (p01 - p00) * tx;
        double const bot = p10 + (p11 - p10) * tx;
        rgb[c]           = top + (bot - top) * ty;
      }
      double const yy = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
      double const cb = 128.0 - 0.168736 * rgb[0] - 0.331264 * rgb[1] + 0.5 * rgb[2];
      double const cr = 128.0 + 0.5 * rgb[0] - 0.418688 * rgb[1] - 0.081312 * rgb[2];
      out[k++]        = static_cast<Real>(yy / 127.5 - 1.0);
      out[k++]        = static_cast<Real>(cb / 127.5 - 1.0);
      out[k++]        = static_cast<Real>(cr / 127.5 - 1.0);
    }
  }
}

Tensor preprocess(const Image &frame)
{
  Tensor out(Shape{kFrameHeight, kFrameWidth, kFrameChannels});
  preprocess_into(frame, out.values());
  return out;
}

PreparedEpisode prepare(const Episode &episode)
{
  if (episode.samples.empty())
  {
    throw Error("cannot prepare an empty episode");
  }
  PreparedEpisode   out;
  std::size_t const per_frame = kFrameHeight * kFrameWidth * kFrameChannels;
  out.condition               = episode.condition;
  out.frames = Tensor(Shape{episode.size(), kFrameHeight, kFrameWidth, kFrameChannels});
  for (std::size_t i = 0; i < episode.size(); ++i)
  {
    preprocess_into(episode.samples[i].frame, out.frames.values().subspan(i * per_frame, per_frame));
    out.labels.push_back(episode.samples[i].steering);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

AugmentParams draw_augment(Rng &rng, const AugmentConfig &config, bool side_cameras)
{
  AugmentParams p;
  if (side_cameras)
  {
    p.camera = static_cast<Camera>(rng.below(3));
  }
  p.flip    = rng.bernoulli(config.flip_probability);
  p.shift_x = static_cast<int>(std::lround(rng.uniform(-config.shift_x_max, config.shift_x_max)));
  p.shift_y = static_cast<int>(std::lround(rng.uniform(-config.shift_y_max, config.shift_y_max)));
  p.shadow  = rng.bernoulli(config.shadow_probability);
  p.x_top   = rng.uniform(0, static_cast<double>(kRawWidth));
  p.x_bottom    = rng.uniform(0, static_cast<double>(kRawWidth));
  p.shadow_left = rng.bernoulli(0.5);
  p.brightness  = rng.uniform(config.brightness_min, config.brightness_max);
  return p;
}

Sample select_camera(const Sample &sample, Camera camera, double offset)
{
  Sample out;
  out.steering = sample.steering;
  if (camera == Camera::kCenter)
  {
    out.frame = sample.frame;
    return out;
  }
  const Image &side = camera == Camera::kLeft ? sample.left : sample.right;
  if (side.empty())
  {
    throw Error("camera-select needs the side camera frames");
  }
  out.frame    = side;
  out.steering = static_cast<Real>(sample.steering + (camera == Camera::kLeft ? offset : -offset));
  return out;
}

Sample flip(const Sample &sample)
{
  auto mirror = [](const Image &image) {
    Image out = image;
    for (std::size_t y = 0; y < image.height; ++y)
    {
      for (std::size_t x = 0; x < image.width; ++x)
      {
        for (std::size_t c = 0; c < 3; ++c)
        {
          out.at(y, image.width - 1 - x, c) = image.at(y, x, c);
        }
      }
    }
    return out;
  };
  Sample out;
  out.frame    = mirror(sample.frame);
  out.steering = -sample.steering;
  // Mirroring swaps the roles of the side cameras.
  if (!sample.right.empty())
  {
    out.left = mirror(sample.right);
  }
  if (!sample.left.empty())
  {
    out.right = mirror(sample.left);
  }
  return out;
}

Sample shift(const Sample &sample, int dx, int dy, double correction)
{
  const Image &in = sample.frame;
  Sample       out;
  out.frame    = Image(in.height, in.width);
  out.steering = static_cast<Real>(sample.steering + dx * correction);
  auto const h = static_cast<long>(in.height), w = static_cast<long>(in.width);
  for (long y = 0; y < h; ++y)
  {
    long const sy = y - dy;
    if (sy < 0 || sy >= h)
    {
      continue;
    }
    for (long x = 0; x < w; ++x)
    {
      long const sx = x - dx;
      if (sx < 0 || sx >= w)
      {
        continue;
      }
      for (std::size_t c = 0; c < 3; ++c)
      {
        out.frame.at(y, x, c) = in.at(sy, sx, c);
      }
    }
  }
  return out;
}

namespace {

void scale_pixel_luma(Image &image, std::size_t y, std::size_t x, double factor)
{
  double const r  = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
  double const yy = std::clamp((0.299 * r + 0.587 * g + 0.114 * b) * factor, 0.0, 255.0);
  double const cb = -0.168736 * r - 0.331264 * g + 0.5 * b;
  double const cr = 0.5 * r - 0.418688 * g - 0.081312 * b;
  image.at(y, x, 0) = clip_u8(yy + 1.402 * cr);
  image.at(y, x, 1) = clip_u8(yy - 0.344136 * cb - 0.714136 * cr);
  image.at(y, x, 2) = clip_u8(yy + 1.772 * cb);
}

}  // namespace

Image scale_luminance(const Image &image, double factor)
{
  Image out = image;
  for (std::size_t y = 0; y < image.height; ++y)
  {
    for (std::size_t x = 0; x < image.width; ++x)
    {
      scale_pixel_luma(out, y, x, factor);
    }
  }
  return out;
}

Image shadow(const Image &image, double x_top, double x_bottom, bool left_side, double factor)
{
  Image        out = image;
  double const span = image.height > 1 ? static_cast<double>(image.height - 1) : 1.0;
  for (std::size_t y = 0; y < image.height; ++y)
  {
    double const boundary = x_top + (x_bottom - x_top) * static_cast<double>(y) / span;
    for (std::size_t x = 0; x < image.width; ++x)
    {
      bool const left = static_cast<double>(x) + 0.5 < boundary;
      if (left == left_side)
      {
        scale_pixel_luma(out, y, x, factor);
      }
    }
  }
  return out;
}

Sample augment(const Sample &sample, const AugmentParams &params, const AugmentConfig &config)
{
  Sample out = select_camera(sample, params.camera, config.camera_offset);
  if (params.flip)
  {
    out = flip(out);
  }
  out = shift(out, params.shift_x, params.shift_y, config.shift_correction);
  if (params.shadow)
  {
    out.frame = shadow(out.frame, params.x_top * out.frame.width / kRawWidth,
                       params.x_bottom * out.frame.width / kRawWidth, params.shadow_left,
                       config.shadow_factor);
  }
  out.frame = scale_luminance(out.frame, params.brightness);
  return out;
}

Sample augment(const Sample &sample, Rng &rng, const AugmentConfig &config)
{
  bool const sides = !sample.left.empty() && !sample.right.empty();
  return augment(sample, draw_augment(rng, config, sides), config);
}

// ---------------------------------------------------------------------------
// Synthetic road

std::string condition_name(Condition condition)
{
  switch (condition)
  {
  case Condition::kSunny:
    return "sunny";
  case Condition::kCloudy:
    return "cloudy";
  case Condition::kNight:
    return "night";
  }
  return "?";
}

Condition parse_condition(const std::string &name)
{
  for (Condition c : {Condition::kSunny, Condition::kCloudy, Condition::kNight})
  {
    if (condition_name(c) == name)
    {
      return c;
    }
  }
  throw ConfigError("unknown condition '" + name + "' (expected sunny, cloudy or night)");
}

namespace {

// Pinhole camera 1.5 m above a flat ground plane.
constexpr double kHorizon      = 55.0;   // image row of the horizon
constexpr double kFocal        = 160.0;  // pixels
constexpr double kCameraHeight = 1.5;    // metres
constexpr double kMaxCurvature = 0.015;  // 1/m at |kappa| = 1
constexpr double kHalfLane     = 1.8;    // metres
constexpr double kEdgeWidth    = 0.15;
constexpr double kSideCamera   = 0.6;  // lateral offset of side cameras

struct Conditioning
{
  double brightness;
  double contrast;
  double noise;
};

Conditioning conditioning(Condition c)
{
  switch (c)
  {
  case Condition::kSunny:
    return {1.0, 1.0, 2.0};
  case Condition::kCloudy:
    return {0.7, 0.75, 4.0};
  case Condition::kNight:
    return {0.35, 0.6, 8.0};
  }
  return {1.0, 1.0, 0.0};
}

void set_pixel(Image &image, std::size_t y, std::size_t x, double r, double g, double b)
{
  image.at(y, x, 0) = clip_u8(r);
  image.at(y, x, 1) = clip_u8(g);
  image.at(y, x, 2) = clip_u8(b);
}

Image apply_condition(Image image, Condition condition, Rng &rng)
{
  Conditioning const k = conditioning(condition);
  for (std::uint8_t &p : image.rgb)
  {
    double v = 128.0 + (p - 128.0) * k.contrast;
    v        = v * k.brightness + rng.normal(0.0, k.noise);
    p        = clip_u8(v);
  }
  return image;
}

}  // namespace

Image render_road(double kappa, double lateral_offset, double phase)
{
  Image        image(kRawHeight, kRawWidth);
  double const curvature = std::clamp(kappa, -1.0, 1.0) * kMaxCurvature;
  double const centre    = static_cast<double>(kRawWidth) / 2.0;
  for (std::size_t y = 0; y < kRawHeight; ++y)
  {
    double const below = static_cast<double>(y) + 0.5 - kHorizon;
    if (below <= 0)
    {
      double const t = (static_cast<double>(y) + 0.5) / kHorizon;
      for (std::size_t x = 0; x < kRawWidth; ++x)
      {
        set_pixel(image, y, x, 110 + 70 * t, 160 + 50 * t, 220 + 20 * t);
      }
      continue;
    }
    double const depth  = kCameraHeight * kFocal / below;
    double const road_x = 0.5 * curvature * depth * depth - lateral_offset;
    bool const   dash   = std::fmod(depth + phase, 6.0) < 3.0;
    double const band   = std::fmod(depth + phase, 4.0) < 2.0 ? 1.0 : 0.92;
    for (std::size_t x = 0; x < kRawWidth; ++x)
    {
      double const lateral = (static_cast<double>(x) + 0.5 - centre) * depth / kFocal;
      double const off     = std::abs(lateral - road_x);
      if (off > kHalfLane + kEdgeWidth)
      {
        set_pixel(image, y, x, 70 * band, 120 * band, 50 * band);
      }
      else if (off > kHalfLane || (dash && off < kEdgeWidth / 2))
      {
        set_pixel(image, y, x, 235, 235, 235);
      }
      else
      {
        set_pixel(image, y, x, 90, 90, 95);
      }
    }
  }
  return image;
}

Episode synth_generate(Condition condition, std::size_t frames, std::uint64_t seed,
                       const SynthOptions &options)
{
  if (frames == 0)
  {
    throw ConfigError("synthetic episode needs at least one frame");
  }
  Episode episode;
  episode.condition = condition_name(condition);
  Rng    walk       = Rng::derive(seed, 0);
  double kappa      = walk.uniform(-0.5, 0.5);
  double velocity   = 0.0;
  for (std::size_t t = 0; t < frames; ++t)
  {
    double const phase = 1.5 * static_cast<double>(t);
    Rng          noise = Rng::derive(seed, t + 1);
    Sample       s;
    s.steering = static_cast<Real>(kappa);
    s.frame    = apply_condition(render_road(kappa, 0.0, phase), condition, noise);
    if (options.side_cameras)
    {
      s.left  = apply_condition(render_road(kappa, -kSideCamera, phase), condition, noise);
      s.right = apply_condition(render_road(kappa, kSideCamera, phase), condition, noise);
    }
    episode.samples.push_back(std::move(s));

    velocity = 0.95 * velocity + walk.normal(0.0, 0.015);
    kappa += velocity;
    if (kappa > 1.0 || kappa < -1.0)
    {
      kappa    = std::clamp(kappa, -1.0, 1.0);
      velocity = -velocity;
    }
  }
  return episode;
}

// ---------------------------------------------------------------------------
// Splits and windows

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split(std::size_t n,
                                                                     double fraction,
                                                                     std::uint64_t seed)
{
  if (n == 0)
  {
    throw Error("cannot split an empty dataset");
  }
  if (!(fraction > 0.0 && fraction < 1.0))
  {
    throw ConfigError("split fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    order[i] = i;
  }
  Rng rng(seed);
  rng.shuffle(order);
  auto train_count = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
  train_count      = std::clamp<std::size_t>(train_count, 1, n);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<long>(train_count));
  std::vector<std::size_t> val(order.begin() + static_cast<long>(train_count), order.end());
  return {train, val};
}

std::pair<std::vector<Episode>, std::vector<Episode>> split_episodes(
    const std::vector<Episode> &episodes, std::size_t segment, double fraction,
    std::uint64_t seed)
{
  if (segment == 0)
  {
    throw ConfigError("segment length must be positive");
  }
  std::vector<Episode> segments;
  for (const Episode &e : episodes)
  {
    for (std::size_t start = 0; start < e.size(); start += segment)
    {
      Episode part;
      part.condition = e.condition;
      std::size_t const end = std::min(e.size(), start + segment);
      part.samples.assign(e.samples.begin() + static_cast<long>(start),
                          e.samples.begin() + static_cast<long>(end));
      segments.push_back(std::move(part));
    }
  }
  auto [train_idx, val_idx] = split(segments.size(), fraction, seed);
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::vector<Episode> train, val;
  for (std::size_t i : train_idx)
  {
    train.push_back(segments[i]);
  }
  for (std::size_t i : val_idx)
  {
    val.push_back(segments[i]);
  }
  return {train, val};
}

std::vector<std::size_t> windows(std::size_t episode_length, std::size_t length,
                                 std::size_t stride)
{
  if (length == 0 || stride == 0)
  {
    throw ConfigError("window length and stride must be positive");
  }
  if (length > episode_length)
  {
    throw ConfigError("window length " + std::to_string(length) + " exceeds episode length " +
                      std::to_string(episode_length));
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + length <= episode_length; s += stride)
  {
    starts.push_back(s);
  }
  return starts;
}

// ---------------------------------------------------------------------------
// Drive logs

std::string format_real(double value)
{
  char       buf[64];
  auto const r = std::to_chars(buf, buf + sizeof(buf), static_cast<Real>(value));
  return std::string(buf, r.ptr);
}

namespace {

std::string trim(const std::string &s)
{
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '"'))
  {
    ++b;
  }
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"'))
  {
    --e;
  }
  return s.substr(b, e - b);
}

bool parse_double(const std::string &text, double &out)
{
  if (text.empty())
  {
    return false;
  }
  char const *end = text.data() + text.size();
  auto const  r   = std::from_chars(text.data(), end, out);
  return r.ec == std::errc() && r.ptr == end && std::isfinite(out);
}

std::vector<std::string> split_fields(const std::string &line)
{
  std::vector<std::string> fields;
  std::stringstream        ss(line);
  std::string              field;
  while (std::getline(ss, field, ','))
  {
    fields.push_back(trim(field));
  }
  if (!line.empty() && line.back() == ',')
  {
    fields.emplace_back();
  }
  return fields;
}

}  // namespace

std::filesystem::path resolve_image(const std::filesystem::path &dir, const std::string &ref)
{
  std::filesystem::path const p(ref);
  if (p.is_absolute() && std::filesystem::exists(p))
  {
    return p;
  }
  if (std::filesystem::exists(dir / p))
  {
    return dir / p;
  }
  std::filesystem::path const in_img = dir / "IMG" / p.filename();
  if (std::filesystem::exists(in_img))
  {
    return in_img;
  }
  return p.is_absolute() ? p : dir / p;
}

DriveLog parse_drive_log(const std::filesystem::path &dir)
{
  std::filesystem::path const path = dir / kDriveLogName;
  std::ifstream               in(path);
  if (!in)
  {
    throw Error("missing drive log " + path.string());
  }
  DriveLog log;
  log.directory = dir;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line))
  {
    ++line_no;
    if (trim(line).empty())
    {
      continue;
    }
    std::vector<std::string> const f = split_fields(line);
    DriveLogRow                    row;
    bool const steering_ok = f.size() >= 4 && parse_double(f[3], row.steering);
    if (log.rows.empty() && line_no == 1 && !steering_ok)
    {
      continue;  // header
    }
    auto fail = [&](const std::string &why) {
      return FormatError(path.string() + " row " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() < 4)
    {
      throw fail("expected at least 4 columns (center, left, right, steering), got " +
                 std::to_string(f.size()));
    }
    if (!steering_ok)
    {
      throw fail("steering '" + f[3] + "' is not a number");
    }
    double *extra[] = {&row.throttle, &row.brake, &row.speed};
    for (std::size_t i = 4; i < std::min<std::size_t>(f.size(), 7); ++i)
    {
      if (!f[i].empty() && !parse_double(f[i], *extra[i - 4]))
      {
        throw fail("column " + std::to_string(i + 1) + " '" + f[i] + "' is not a number");
      }
    }
    if (f[0].empty())
    {
      throw fail("missing center image path");
    }
    row.center = f[0];
    row.left   = f[1];
    row.right  = f[2];
    for (const std::string *ref : {&row.center, &row.left, &row.right})
    {
      if (!ref->empty() && !std::filesystem::exists(resolve_image(dir, *ref)))
      {
        throw Error(path.string() + " row " + std::to_string(line_no) + ": missing image " +
                    resolve_image(dir, *ref).string());
      }
    }
    log.rows.push_back(std::move(row));
  }
  if (log.rows.empty())
  {
    throw FormatError(path.string() + " has no data rows");
  }
  return log;
}

std::pair<DriveLog, Episode> load_drive_log(const std::filesystem::path &dir, bool side_cameras)
{
  DriveLog log = parse_drive_log(dir);
  Episode  episode;
  episode.condition = "unknown";
  std::ifstream cond(dir / kConditionFileName);
  if (cond)
  {
    std::string name;
    std::getline(cond, name);
    episode.condition = trim(name);
  }
  for (const DriveLogRow &row : log.rows)
  {
    Sample s;
    s.frame    = read_png(resolve_image(dir, row.center));
    s.steering = static_cast<Real>(row.steering);
    if (side_cameras && !row.left.empty() && !row.right.empty())
    {
      s.left  = read_png(resolve_image(dir, row.left));
      s.right = read_png(resolve_image(dir, row.right));
    }
    episode.samples.push_back(std::move(s));
  }
  return {std::move(log), std::move(episode)};
}

void save_episode(const Episode &episode, const std::filesystem::path &dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir / "IMG", ec);
  if (ec)
  {
    throw Error("cannot create " + (dir / "IMG").string() + ": " + ec.message());
  }
  std::ofstream csv(dir / kDriveLogName, std::ios::binary);
  if (!csv)
  {
    throw Error("cannot write " + (dir / kDriveLogName).string());
  }
  csv << "center,left,right,steering,throttle,brake,speed\n";
  for (std::size_t i = 0; i < episode.size(); ++i)
  {
    const Sample &s = episode.samples[i];
    char          index[16];
    std::snprintf(index, sizeof(index), "%05zu", i);
    std::string const center = std::string("IMG/center_") + index + ".png";
    write_png(dir / center, s.frame);
    std::string left, right;
    if (!s.left.empty() && !s.right.empty())
    {
      left  = std::string("IMG/left_") + index + ".png";
      right = std::string("IMG/right_") + index + ".png";
      write_png(dir / left, s.left);
      write_png(dir / right, s.right);
    }
    csv << center << ',' << left << ',' << right << ',' << format_real(s.steering) << ",0,0,0\n";
  }
  std::ofstream cond(dir / kConditionFileName, std::ios::binary);
  cond << episode.condition << '\n';
  if (!csv || !cond)
  {
    throw Error("failed writing dataset to " + dir.string());
  }
}

}  // namespace ncpdrive
