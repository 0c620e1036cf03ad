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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ncpdrive/image.hpp"
#include "ncpdrive/rng.hpp"
#include "ncpdrive/tensor.hpp"

// Driving data: preprocessing, augmentation, synthetic episodes, splits,
// sequence windows and drive-log ingestion.
namespace ncpdrive::inline NCPD_PRECISION_NS {

inline constexpr std::size_t kRawHeight = 160;
inline constexpr std::size_t kRawWidth  = 320;
inline constexpr std::size_t kCropTop   = 60;
inline constexpr std::size_t kCropEnd   = 135;

/// One camera frame with its steering label. `left` and `right` hold the side
/// cameras when available (needed for camera-select augmentation).
struct Sample
{
  Image frame;
  Real  steering = 0;
  Image left;
  Image right;
};

struct Episode
{
  std::string         condition;
  std::vector<Sample> samples;

  std::size_t size() const noexcept
  {
    return samples.size();
  }
};

/// Crop rows [60, 135) of a 160x320 frame (other sizes are first resized to
/// 160x320), bilinear resize to 66x200, full-range BT.601 YCbCr, x/127.5 - 1.
Tensor preprocess(const Image &frame);
/// Writes the 66*200*3 preprocessed values to `out`.
void preprocess_into(const Image &frame, std::span<Real> out);

/// Preprocessed frames [T, 66, 200, 3] and labels [T] of an episode.
struct PreparedEpisode
{
  std::string       condition;
  Tensor            frames;
  std::vector<Real> labels;

  std::size_t size() const noexcept
  {
    return labels.size();
  }
};

PreparedEpisode prepare(const Episode &episode);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentConfig
{
  double camera_offset    = 0.2;
  double flip_probability = 0.5;
  double shift_x_max      = 50;
  double shift_y_max      = 10;
  double shift_correction = 0.002;
  double shadow_probability = 0.5;
  double shadow_factor    = 0.5;
  double brightness_min   = 0.6;
  double brightness_max   = 1.4;
};

enum class Camera
{
  kLeft,
  kCenter,
  kRight,
};

/// One draw of augmentation parameters. A window of frames shares a draw so
/// the sequence stays temporally coherent.
struct AugmentParams
{
  Camera camera = Camera::kCenter;
  bool   flip   = false;
  int    shift_x = 0;
  int    shift_y = 0;
  bool   shadow = false;
  // Shadow boundary: the line through (x_top, 0) and (x_bottom, height - 1);
  // pixels left of it are darkened when shadow_left, right of it otherwise.
  double x_top = 0;
  double x_bottom = 0;
  bool   shadow_left = true;
  double brightness  = 1;
};

AugmentParams draw_augment(Rng &rng, const AugmentConfig &config, bool side_cameras);

/// Applies camera select, flip, shift, shadow and brightness in that order.
Sample augment(const Sample &sample, const AugmentParams &params, const AugmentConfig &config);
Sample augment(const Sample &sample, Rng &rng, const AugmentConfig &config);

/// Camera-select. Left adds +offset, right -offset.
Sample select_camera(const Sample &sample, Camera camera, double offset);
/// Mirror horizontally and negate the label.
Sample flip(const Sample &sample);
/// Translate by (dx, dy) pixels, vacated area black; label += dx * correction.
Sample shift(const Sample &sample, int dx, int dy, double correction);
/// Scale the BT.601 luma of every pixel by `factor`, clipping to valid RGB.
Image scale_luminance(const Image &image, double factor);
/// Scale luma by `factor` on one side of the line (x_top, 0)-(x_bottom, H-1).
Image shadow(const Image &image, double x_top, double x_bottom, bool left_side, double factor);

// ---------------------------------------------------------------------------
// Synthetic data

enum class Condition
{
  kSunny,
  kCloudy,
  kNight,
};

std::string condition_name(Condition condition);
Condition   parse_condition(const std::string &name);

struct SynthOptions
{
  bool side_cameras = true;
};

/// Renders one frame of the synthetic road: curvature `kappa` in [-1, 1],
/// camera lateral offset in metres (left camera negative), `phase` advancing
/// the lane dashes. Without condition effects.
Image render_road(double kappa, double lateral_offset, double phase);

/// A deterministic synthetic episode: curvature follows a seeded smooth
/// random walk in [-1, 1], label = curvature, and the condition sets the
/// global brightness (1.0 / 0.7 / 0.35), contrast and pixel noise.
Episode synth_generate(Condition condition, std::size_t frames, std::uint64_t seed,
                       const SynthOptions &options = {});

// ---------------------------------------------------------------------------
// Splits and windows

/// Seeded shuffle of [0, n) then partition: the first round(n * fraction)
/// indices are training.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split(std::size_t n,
                                                                     double fraction,
                                                                     std::uint64_t seed);

/// Cuts episodes into consecutive segments of at most `segment` frames and
/// splits the segments. Temporal order inside each segment is preserved.
std::pair<std::vector<Episode>, std::vector<Episode>> split_episodes(
    const std::vector<Episode> &episodes, std::size_t segment, double fraction,
    std::uint64_t seed);

/// Start indices of the sliding windows of length `length` with `stride`.
std::vector<std::size_t> windows(std::size_t episode_length, std::size_t length,
                                 std::size_t stride);

// ---------------------------------------------------------------------------
// Drive logs

struct DriveLogRow
{
  std::string center;
  std::string left;
  std::string right;
  double      steering = 0;
  double      throttle = 0;
  double      brake    = 0;
  double      speed    = 0;
};

struct DriveLog
{
  std::filesystem::path    directory;
  std::vector<DriveLogRow> rows;
};

inline constexpr const char *kDriveLogName = "driving_log.csv";
inline constexpr const char *kConditionFileName = "condition.txt";

/// Parses `dir`/driving_log.csv (header optional) and checks every referenced
/// image exists. Relative paths are resolved against `dir`, then `dir`/IMG.
DriveLog parse_drive_log(const std::filesystem::path &dir);

/// Resolved path of an image referenced by a log.
std::filesystem::path resolve_image(const std::filesystem::path &dir, const std::string &ref);

/// Log plus one episode in log order. Side cameras are loaded when
/// `side_cameras` is set and the row names them.
std::pair<DriveLog, Episode> load_drive_log(const std::filesystem::path &dir,
                                            bool side_cameras = false);

/// Writes IMG/<prefix>_NNNNN.png frames and the drive log; the episode's
/// condition goes to condition.txt.
void save_episode(const Episode &episode, const std::filesystem::path &dir);

/// Steering formatted so parsing it back gives the same value.
std::string format_real(double value);

}  // namespace ncpdrive
