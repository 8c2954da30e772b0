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


#include "fpsentinel/collector.hpp"

#include <gtest/gtest.h>

#include <sstream>
#include <thread>
#include <vector>

#include "httplib.h"
#include "test_util.hpp"

namespace fpsentinel {
namespace {

constexpr const char* kNdjson = "application/x-ndjson";

std::string Line(std::uint64_t id) {
  return SerializeTelemetryLine(testutil::CanvasTrace("a.com", "/", id)) + "\n";
}

CollectorConfig Config(const testutil::TempDir& dir) {
  CollectorConfig c;
  c.spool_path = dir.File("spool.jsonl");
  c.token = "s3cret";
  c.port = 0;
  return c;
}

std::size_t CountLines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

TEST(CollectorTest, RefusesToStartWithoutToken) {
  testutil::TempDir dir;
  auto cfg = Config(dir);
  cfg.token.clear();
  EXPECT_THROW(TelemetryCollector{cfg}, Error);
}

TEST(CollectorTest, AcceptsValidBatch) {
  testutil::TempDir dir;
  TelemetryCollector c(Config(dir));
  const auto r = c.HandleTelemetry("Bearer s3cret", kNdjson, Line(1) + Line(2) + Line(3));
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["accepted"], 3);
  EXPECT_EQ(r.body["rejected"], 0);
  const auto spool = testutil::ReadFile(dir.File("spool.jsonl"));
  EXPECT_EQ(spool, Line(1) + Line(2) + Line(3));
}

TEST(CollectorTest, CountsMalformedLines) {
  testutil::TempDir dir;
  TelemetryCollector c(Config(dir));
  const auto r =
      c.HandleTelemetry("Bearer s3cret", "application/x-ndjson; charset=utf-8",
                        Line(1) + "{not json\n" + Line(2));
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["accepted"], 2);
  EXPECT_EQ(r.body["rejected"], 1);
  EXPECT_EQ(CountLines(testutil::ReadFile(dir.File("spool.jsonl"))), 2u);
}

TEST(CollectorTest, RawArgumentsAreNeverSpooled) {
  testutil::TempDir dir;
  TelemetryCollector c(Config(dir));
  auto j = Json::parse(Line(1));
  j["apis"][0]["raw_args"] = Json::array({"secret-user-string"});
  const auto r = c.HandleTelemetry("Bearer s3cret", kNdjson, j.dump() + "\n");
  EXPECT_EQ(r.body["rejected"], 1);
  EXPECT_EQ(testutil::ReadFile(dir.File("spool.jsonl")).find("secret-user-string"),
            std::string::npos);
}

TEST(CollectorTest, RejectsUnauthorizedWrongTypeAndOversize) {
  testutil::TempDir dir;
  auto cfg = Config(dir);
  cfg.max_body_bytes = 100;
  TelemetryCollector c(cfg);
  EXPECT_EQ(c.HandleTelemetry("", kNdjson, Line(1)).status, 401);
  EXPECT_EQ(c.HandleTelemetry("Bearer wrong", kNdjson, Line(1)).status, 401);
  EXPECT_EQ(c.HandleTelemetry("Basic s3cret", kNdjson, Line(1)).status, 401);
  EXPECT_EQ(c.HandleTelemetry("Bearer s3cret", "application/json", Line(1)).status, 415);
  EXPECT_EQ(c.HandleTelemetry("Bearer s3cret", kNdjson, std::string(101, ' ')).status, 413);
  EXPECT_EQ(testutil::ReadFile(dir.File("spool.jsonl")), "");
}

TEST(CollectorTest, Health) {
  const auto r = TelemetryCollector::HandleHealth();
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["status"], "ok");
  EXPECT_TRUE(r.body.contains("version"));
}

TEST(CollectorTest, HelperPredicates) {
  EXPECT_TRUE(ConstantTimeEquals("abc", "abc"));
  EXPECT_FALSE(ConstantTimeEquals("abc", "abd"));
  EXPECT_FALSE(ConstantTimeEquals("abc", "abcd"));
  EXPECT_TRUE(IsNdjsonContentType("Application/X-NDJSON"));
  EXPECT_FALSE(IsNdjsonContentType("text/plain"));
}

TEST(CollectorServerTest, ServesOverHttp) {
  testutil::TempDir dir;
  CollectorServer server(Config(dir));
  const int port = server.Start();
  ASSERT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(Json::parse(health->body)["status"], "ok");

  httplib::Headers auth = {{"Authorization", "Bearer s3cret"}};
  auto ok = client.Post("/v1/telemetry", auth, Line(1) + Line(2), kNdjson);
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  EXPECT_EQ(Json::parse(ok->body)["accepted"], 2);
  auto denied = client.Post("/v1/telemetry", Line(1), kNdjson);
  ASSERT_TRUE(denied);
  EXPECT_EQ(denied->status, 401);
  auto wrong = client.Post("/v1/telemetry", auth, Line(1), "text/plain");
  ASSERT_TRUE(wrong);
  EXPECT_EQ(wrong->status, 415);

  // Concurrent batches must land as whole lines.
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([port, t, &auth] {
      httplib::Client c("127.0.0.1", port);
      std::string batch;
      for (int i = 0; i < 25; ++i) batch += Line(1000 * (t + 1) + i);
      c.Post("/v1/telemetry", auth, batch, kNdjson);
    });
  }
  for (auto& th : threads) th.join();
  server.Stop();
  const auto spool = testutil::ReadFile(dir.File("spool.jsonl"));
  EXPECT_EQ(CountLines(spool), 202u);
  std::istringstream in(spool);
  const auto ingest = ReadTelemetryStream(in);
  EXPECT_EQ(ingest.traces.size(), 202u);
  EXPECT_EQ(ingest.rejected, 0u);
}

}  // namespace
}  // namespace fpsentinel
