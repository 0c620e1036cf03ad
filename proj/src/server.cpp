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


#include "ncpdrive/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>

#include "json.hpp"

#include "ncpdrive/data.hpp"
#include "ncpdrive/image.hpp"

namespace ncpdrive::inline NCPD_PRECISION_NS {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string error_reply(const std::string &message)
{
  return json{{"error", message}}.dump();
}

bool send_all(int fd, std::string_view data)
{
  while (!data.empty())
  {
    ssize_t const n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR)
    {
      continue;
    }
    if (n <= 0)
    {
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

double throttle_for(double speed, const DriveConfig &config)
{
  return std::clamp(config.kp * (config.target_speed - speed), 0.0, 1.0);
}

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3)
  {
    std::uint32_t v = std::uint32_t(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= std::uint32_t(bytes[i + 1]) << 8;
    if (i + 2 < bytes.size()) v |= bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? kAlphabet[v & 63] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
  static const std::array<int, 256> table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    for (int i = 0; i < 64; ++i)
    {
      t[static_cast<unsigned char>(kAlphabet[i])] = i;
    }
    return t;
  }();
  while (!text.empty() && text.back() == '=')
  {
    text.remove_suffix(1);
  }
  if (text.size() % 4 == 1)
  {
    throw FormatError("invalid base64 length");
  }
  std::vector<std::uint8_t> out;
  out.reserve(text.size() * 3 / 4);
  std::uint32_t acc  = 0;
  int           bits = 0;
  for (char c : text)
  {
    int const v = table[static_cast<unsigned char>(c)];
    if (v < 0)
    {
      throw FormatError("invalid base64 character");
    }
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8)
    {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>(acc >> bits));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// DriveSession

DriveSession::DriveSession(const Model &model, const DriveConfig &config)
  : model_(model)
  , config_(config)
  , state_(model.initial_state())
{}

std::string DriveSession::oversized_reply(std::size_t limit)
{
  return error_reply("message exceeds " + std::to_string(limit) + " bytes");
}

std::string DriveSession::handle(std::string_view line)
{
  while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
  {
    line.remove_suffix(1);
  }
  if (line.size() > config_.max_message_bytes)
  {
    return oversized_reply(config_.max_message_bytes);
  }
  if (line == "reset")
  {
    state_ = model_.initial_state();
    return json{{"reset", true}}.dump();
  }
  json const msg = json::parse(line, nullptr, false);
  if (msg.is_discarded() || !msg.is_object())
  {
    return error_reply("request is not a JSON object");
  }
  if (msg.contains("reset"))
  {
    if (!msg["reset"].is_boolean())
    {
      return error_reply("\"reset\" must be a boolean");
    }
    if (msg["reset"].get<bool>())
    {
      state_ = model_.initial_state();
      return json{{"reset", true}}.dump();
    }
  }
  if (!msg.contains("image") || !msg["image"].is_string())
  {
    return error_reply("missing string field \"image\"");
  }
  if (!msg.contains("speed") || !msg["speed"].is_number())
  {
    return error_reply("missing numeric field \"speed\"");
  }
  double const speed = msg["speed"].get<double>();
  if (!std::isfinite(speed))
  {
    return error_reply("\"speed\" must be finite");
  }
  try
  {
    std::vector<std::uint8_t> const bytes = base64_decode(msg["image"].get<std::string>());
    Image                           frame;
    if (msg.contains("width") || msg.contains("height"))
    {
      if (!msg.contains("width") || !msg.contains("height") ||
          !msg["width"].is_number_unsigned() || !msg["height"].is_number_unsigned())
      {
        return error_reply("raw frames need unsigned \"width\" and \"height\"");
      }
      frame.width  = msg["width"].get<std::size_t>();
      frame.height = msg["height"].get<std::size_t>();
      if (frame.width == 0 || frame.height == 0 || bytes.size() / 3 / frame.width != frame.height ||
          bytes.size() != frame.width * frame.height * 3)
      {
        return error_reply("raw frame holds " + std::to_string(bytes.size()) +
                           " bytes, expected width * height * 3");
      }
      frame.rgb = bytes;
    }
    else
    {
      frame = decode_png(bytes);
    }
    Tensor const steering = model_.infer(preprocess(frame), state_);
    return json{{"steering", static_cast<double>(steering[0])},
                {"throttle", throttle_for(speed, config_)}}
        .dump();
  }
  catch (const Error &e)
  {
    return error_reply(e.what());
  }
}

// ---------------------------------------------------------------------------
// DriveServer

DriveServer::DriveServer(const Model &model, const DriveConfig &config, int port)
  : model_(model)
  , config_(config)
{
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0)
  {
    throw Error(std::string("socket: ") + std::strerror(errno));
  }
  int const one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family      = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port        = htons(static_cast<std::uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr *>(&addr), sizeof addr) < 0 ||
      ::listen(listen_fd_, 16) < 0)
  {
    std::string const why = std::strerror(errno);
    ::close(listen_fd_);
    throw Error("cannot listen on port " + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr *>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

DriveServer::~DriveServer()
{
  stop();
  for (std::thread &t : workers_)
  {
    if (t.joinable())
    {
      t.join();
    }
  }
  if (listen_fd_ >= 0)
  {
    ::close(listen_fd_);
  }
}

void DriveServer::stop()
{
  stopping_ = true;
  std::lock_guard lock(clients_mutex_);
  for (int fd : clients_)
  {
    ::shutdown(fd, SHUT_RDWR);
  }
}

void DriveServer::run()
{
  while (!stopping_)
  {
    pollfd p{listen_fd_, POLLIN, 0};
    int const ready = ::poll(&p, 1, 100);
    if (ready <= 0)
    {
      continue;
    }
    int const fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0)
    {
      continue;
    }
    {
      std::lock_guard lock(clients_mutex_);
      if (stopping_)
      {
        ::close(fd);
        break;
      }
      clients_.push_back(fd);
    }
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void DriveServer::serve(int fd)
{
  DriveSession        session(model_, config_);
  std::string         pending;
  bool                discarding = false;  // inside an oversized line
  std::array<char, 65536> buf;
  while (!stopping_)
  {
    ssize_t const n = ::recv(fd, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR)
    {
      continue;
    }
    if (n <= 0)
    {
      break;
    }
    std::string_view chunk(buf.data(), static_cast<std::size_t>(n));
    bool              ok = true;
    while (ok && !chunk.empty())
    {
      std::size_t const nl = chunk.find('\n');
      if (discarding)
      {
        if (nl == std::string_view::npos)
        {
          chunk = {};
          break;
        }
        discarding = false;
        chunk.remove_prefix(nl + 1);
        ok = send_all(fd, DriveSession::oversized_reply(config_.max_message_bytes) + "\n");
        continue;
      }
      if (nl == std::string_view::npos)
      {
        pending.append(chunk);
        chunk = {};
        if (pending.size() > config_.max_message_bytes)
        {
          pending.clear();
          discarding = true;
        }
        break;
      }
      pending.append(chunk.substr(0, nl));
      chunk.remove_prefix(nl + 1);
      std::string const reply = pending.empty() ? std::string() : session.handle(pending);
      pending.clear();
      if (!reply.empty())
      {
        ok = send_all(fd, reply + "\n");
      }
    }
    if (!ok)
    {
      break;
    }
  }
  std::lock_guard lock(clients_mutex_);
  clients_.erase(std::remove(clients_.begin(), clients_.end(), fd), clients_.end());
  ::close(fd);
}

}  // namespace ncpdrive
