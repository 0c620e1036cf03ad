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

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ncpdrive/models.hpp"

// Steering server. Newline-delimited JSON over TCP, one request per line:
//
//   {"image": "<base64 PNG>", "speed": 12.5}
//   {"image": "<base64 RGB bytes>", "width": 320, "height": 160, "speed": 12.5}
//   {"reset": true}            (or the bare line "reset")
//
// Replies are one line each: {"steering": s, "throttle": t}, {"reset": true}
// or {"error": "..."}. Frames go through the usual preprocessing; each
// connection keeps its own recurrent state.
namespace ncpdrive::inline NCPD_PRECISION_NS {

struct DriveConfig
{
  double      target_speed      = 20.0;
  double      kp                = 0.1;
  std::size_t max_message_bytes = 8 << 20;
};

/// clamp(kp * (target - speed), 0, 1).
double throttle_for(double speed, const DriveConfig &config);

std::string              base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Protocol state of one client.
class DriveSession
{
public:
  DriveSession(const Model &model, const DriveConfig &config);

  /// Reply line (without the newline) for one request line.
  std::string handle(std::string_view line);

  /// Reply for a request line longer than max_message_bytes.
  static std::string oversized_reply(std::size_t limit);

private:
  const Model   &model_;
  DriveConfig    config_;
  RecurrentState state_;
};

class DriveServer
{
public:
  /// Listens on all interfaces at `port` (0 picks a free one).
  DriveServer(const Model &model, const DriveConfig &config, int port);
  ~DriveServer();
  DriveServer(const DriveServer &)            = delete;
  DriveServer &operator=(const DriveServer &) = delete;

  int port() const noexcept
  {
    return port_;
  }

  /// Accepts clients until stop(); each connection is served on its own thread.
  void run();
  void stop();

private:
  void serve(int fd);

  const Model              &model_;
  DriveConfig               config_;
  int                       listen_fd_ = -1;
  int                       port_      = 0;
  std::atomic<bool>         stopping_{false};
  std::vector<std::thread>  workers_;
  std::vector<int>          clients_;
  std::mutex                clients_mutex_;
};

}  // namespace ncpdrive
