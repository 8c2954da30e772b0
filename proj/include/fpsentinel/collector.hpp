// Copyright 2026 The FP Sentinel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Telemetry collector.
//
//   POST /v1/telemetry   Content-Type: application/x-ndjson
//                        Authorization: Bearer <token>
//                        -> {"accepted":A,"rejected":R}
//   GET  /v1/health      -> {"status":"ok","version":...}
//
// Valid lines are re-serialized in canonical form and appended to a spool
// file in the telemetry JSONL format, so `ingest` reads the spool directly.

#ifndef FPSENTINEL_COLLECTOR_HPP_
#define FPSENTINEL_COLLECTOR_HPP_

#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>

#include "fpsentinel/common.hpp"
#include "fpsentinel/telemetry.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fpsentinel {

inline constexpr std::size_t kDefaultMaxBodyBytes = 8u << 20;
inline constexpr const char* kTokenEnvVar = "FP_SENTINEL_TOKEN";

struct CollectorConfig {
  std::string host = "127.0.0.1";
  int port = 8787;  // 0 picks a free port
  std::string spool_path = "telemetry.spool.jsonl";
  std::size_t max_body_bytes = kDefaultMaxBodyBytes;
  std::string token;
};

struct CollectorResponse {
  int status = 200;
  Json body;
};

// Appends lines to the spool under one lock; each batch is flushed before
// the request is answered.
class SpoolWriter {
 public:
  explicit SpoolWriter(const std::string& path)
      : out_(path, std::ios::app | std::ios::binary) {
    if (!out_) throw Error(ErrorCode::kIo, "cannot open spool " + path);
  }

  void Append(const std::string& lines) {
    if (lines.empty()) return;
    std::lock_guard<std::mutex> lock(mu_);
    out_ << lines;
    out_.flush();
    if (!out_) throw Error(ErrorCode::kIo, "spool write failed");
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

inline bool ConstantTimeEquals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  return diff == 0;
}

inline bool IsNdjsonContentType(std::string_view content_type) {
  const auto semi = content_type.find(';');
  std::string base(content_type.substr(0, semi));
  while (!base.empty() && base.back() == ' ') base.pop_back();
  for (auto& c : base) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return base == "application/x-ndjson";
}

// Transport-independent request handling.
class TelemetryCollector {
 public:
  TelemetryCollector(CollectorConfig config)
      : config_(std::move(config)), spool_(config_.spool_path) {
    if (config_.token.empty()) {
      throw Error(ErrorCode::kConfig,
                  std::string("collector token not set (") + kTokenEnvVar + ")");
    }
  }

  const CollectorConfig& config() const noexcept { return config_; }

  CollectorResponse HandleTelemetry(std::string_view authorization,
                                    std::string_view content_type,
                                    std::string_view body) {
    constexpr std::string_view kBearer = "Bearer ";
    if (authorization.substr(0, kBearer.size()) != kBearer ||
        !ConstantTimeEquals(authorization.substr(kBearer.size()), config_.token)) {
      return {401, Json{{"error", "unauthorized"}}};
    }
    if (!IsNdjsonContentType(content_type)) {
      return {415, Json{{"error", "expected application/x-ndjson"}}};
    }
    if (body.size() > config_.max_body_bytes) {
      return {413, Json{{"error", "payload too large"}}};
    }
    std::uint64_t accepted = 0, rejected = 0;
    std::string spooled;
    std::size_t pos = 0;
    while (pos < body.size()) {
      std::size_t end = body.find('\n', pos);
      if (end == std::string_view::npos) end = body.size();
      std::string_view line = body.substr(pos, end - pos);
      pos = end + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
      try {
        spooled += SerializeTelemetryLine(ParseTelemetryLine(line));
        spooled += '\n';
        ++accepted;
      } catch (const Error&) {
        ++rejected;
      }
    }
    try {
      spool_.Append(spooled);
    } catch (const Error& e) {
      return {500, Json{{"error", e.what()}}};
    }
    return {200, Json{{"accepted", accepted}, {"rejected", rejected}}};
  }

  static CollectorResponse HandleHealth() {
    return {200, Json{{"status", "ok"}, {"version", std::string(kVersion)}}};
  }

 private:
  CollectorConfig config_;
  SpoolWriter spool_;
};

// HTTP front end. Start() binds and serves on a background thread.
class CollectorServer {
 public:
  explicit CollectorServer(CollectorConfig config)
      : collector_(std::move(config)) {
    server_.set_payload_max_length(collector_.config().max_body_bytes);
    server_.Post("/v1/telemetry", [this](const httplib::Request& req,
                                         httplib::Response& res) {
      const auto r = collector_.HandleTelemetry(req.get_header_value("Authorization"),
                                                req.get_header_value("Content-Type"),
                                                req.body);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    });
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      const auto r = TelemetryCollector::HandleHealth();
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    });
  }

  ~CollectorServer() { Stop(); }

  // Returns the bound port.
  int Start() {
    const auto& cfg = collector_.config();
    port_ = cfg.port == 0 ? server_.bind_to_any_port(cfg.host)
                          : (server_.bind_to_port(cfg.host, cfg.port) ? cfg.port : -1);
    if (port_ < 0) {
      throw Error(ErrorCode::kIo, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void Stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  // Blocks until the server stops.
  void Wait() {
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }

 private:
  TelemetryCollector collector_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace fpsentinel

#endif  // FPSENTINEL_COLLECTOR_HPP_
