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


#include "fpsentinel/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include "cli_util.hpp"
#include "test_util.hpp"

namespace fpsentinel {
namespace {

using testutil::ReadFile;
using testutil::RunCli;

class CliTest : public ::testing::Test {
 protected:
  std::string F(const std::string& name) { return dir_.File(name); }

  // Small synthetic real/crawl pair shared by the pipeline tests.
  void Synth() {
    const auto r = RunCli({"--seed", "5", "synth", "--sites", "300", "--scripts-per-site", "4",
                           "--fp-fraction", "0.2", "--home-fraction", "0.5",
                           "--crawl-out", F("crawl.fpc"), "-o", F("real.fpc")});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  void ExpectReplayIdentical(const std::string& out) {
    const auto manifest = RunManifestPath(out);
    ASSERT_TRUE(std::filesystem::exists(manifest)) << manifest;
    const auto j = Json::parse(ReadFile(manifest));
    EXPECT_EQ(j["format"], "fp-run-manifest");
    EXPECT_EQ(j["version"], 1);
    EXPECT_TRUE(j.contains("config") && j.contains("tool_version") && j.contains("seed"));
    const std::string replayed = out + ".replay";
    const auto r = RunCli({"replay", "--manifest", manifest, "-o", replayed});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(ReadFile(replayed), ReadFile(out)) << out;
  }

  testutil::TempDir dir_;
};

TEST_F(CliTest, SynthIsDeterministic) {
  Synth();
  const std::string first = ReadFile(F("real.fpc"));
  Synth();
  EXPECT_EQ(ReadFile(F("real.fpc")), first);
  EXPECT_FALSE(first.empty());
  ExpectReplayIdentical(F("real.fpc"));
}

TEST_F(CliTest, CompareReportsMissPercentage) {
  const auto [real, crawl] = testutil::MissFixture();
  SaveCorpus(real, F("r.fpc"));
  SaveCorpus(crawl, F("c.fpc"));
  const auto r = RunCli({"--format", "json", "compare", "--real", F("r.fpc"), "--crawl",
                         F("c.fpc")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"miss_percentage\": 44.8"), std::string::npos) << r.out;
  const auto table = RunCli({"compare", "--real", F("r.fpc"), "--crawl", F("c.fpc")});
  EXPECT_NE(table.out.find("44.8"), std::string::npos);
}

TEST_F(CliTest, IngestBuildsCorpusAndReplays) {
  {
    std::ofstream a(F("a.jsonl")), b(F("b.jsonl"));
    a << SerializeTelemetryLine(testutil::CanvasTrace("x.com", "/", 1)) << '\n'
      << "garbage\n";
    b << SerializeTelemetryLine(testutil::BenignTrace("y.com", "/", 2)) << '\n';
  }
  const auto r = RunCli({"--format", "json", "ingest", "-i", F("a.jsonl"), "-i", F("b.jsonl"),
                         "-o", F("in.fpc")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  const auto c = LoadCorpus(F("in.fpc"));
  EXPECT_EQ(c.traces.size(), 2u);
  EXPECT_EQ(c.websites.size(), 2u);
  ExpectReplayIdentical(F("in.fpc"));
  EXPECT_EQ(RunCli({"ingest", "--strict", "-i", F("a.jsonl"), "-o", F("s.fpc")}).code, 1);
}

TEST_F(CliTest, ReportCommandsReplay) {
  Synth();
  for (const std::string cmd : {"label", "prevalence", "call-ratio"}) {
    const auto out = F(cmd + ".json");
    const auto r = RunCli({"--format", "json", cmd, "--corpus", F("real.fpc"), "-o", out});
    ASSERT_EQ(r.code, 0) << cmd << ": " << r.err;
    EXPECT_NO_THROW(Json::parse(ReadFile(out))) << cmd;
    ExpectReplayIdentical(out);
  }
  const auto r = RunCli({"--format", "json", "compare", "--real", F("real.fpc"), "--crawl",
                         F("crawl.fpc"), "-o", F("cmp.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  ExpectReplayIdentical(F("cmp.json"));
}

TEST_F(CliTest, TrainingPipelineReplays) {
  Synth();
  auto r = RunCli({"--seed", "2", "pretrain", "--crawl", F("crawl.fpc"), "--epochs", "3",
                   "-o", F("pre.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  ExpectReplayIdentical(F("pre.json"));
  r = RunCli({"--seed", "2", "fedtrain", "--crawl", F("crawl.fpc"), "--users", F("real.fpc"),
              "--rounds", "5", "--clients-per-round", "20", "--total-clients", "100",
              "--epsilon", "5", "-o", F("fed.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  ExpectReplayIdentical(F("fed.json"));
  const auto ckpt = LoadCheckpoint(F("fed.json"));
  EXPECT_LE(ckpt.epsilon_spent, 5.0);
  r = RunCli({"--format", "json", "evaluate", "--model", F("fed.json"), "--corpus",
              F("real.fpc"), "-o", F("eval.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = Json::parse(ReadFile(F("eval.json")));
  EXPECT_TRUE(metrics.contains("precision") && metrics.contains("auprc")) << metrics.dump();
  ExpectReplayIdentical(F("eval.json"));
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  {
    std::ofstream c(F("cfg.json"));
    c << R"({"corpus": {"n_sites": 40, "scripts_per_site": 2}})";
  }
  auto r = RunCli({"--config", F("cfg.json"), "synth", "--sites", "30", "-o", F("s.fpc")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(LoadCorpus(F("s.fpc")).websites.size(), 30u);
  const auto m = Json::parse(ReadFile(RunManifestPath(F("s.fpc"))));
  EXPECT_EQ(m["config"]["corpus"]["n_sites"], 30);
  EXPECT_EQ(m["config"]["corpus"]["scripts_per_site"], 2);
}

TEST_F(CliTest, InfeasibleBudgetFails) {
  Synth();
  const auto r = RunCli({"fedtrain", "--crawl", F("crawl.fpc"), "--users", F("real.fpc"),
                         "--rounds", "50", "--clients-per-round", "100", "--total-clients",
                         "100", "--epsilon", "0.01", "--grid-max-sigma", "1", "-o",
                         F("f.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("infeasible privacy budget"), std::string::npos) << r.err;
}

TEST_F(CliTest, ErrorExitCodes) {
  EXPECT_EQ(RunCli({"prevalence", "--bogus-flag"}).code, 1);
  EXPECT_EQ(RunCli({}).code, 1);
  const auto missing = RunCli({"prevalence", "--corpus", F("nope.fpc")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("error:"), std::string::npos);
  EXPECT_EQ(RunCli({"prevalence"}).code, 1);
  EXPECT_EQ(RunCli({"--format", "xml", "prevalence"}).code, 1);
  {
    std::ofstream bad(F("bad.fpc"));
    bad << "{\"format\":\"fp-corpus\",\"version\":99}\n";
  }
  EXPECT_EQ(RunCli({"prevalence", "--corpus", F("bad.fpc")}).code, 1);
}

TEST_F(CliTest, CollectRequiresToken) {
  ::unsetenv(kTokenEnvVar);
  const auto r = RunCli({"collect", "--port", "0", "--spool", F("spool.jsonl")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find(kTokenEnvVar), std::string::npos) << r.err;
}

TEST_F(CliTest, VersionAndHelp) {
  const auto v = RunCli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, std::string(kVersion) + "\n");
  EXPECT_EQ(RunCli({"--help"}).code, 0);
}

}  // namespace
}  // namespace fpsentinel
