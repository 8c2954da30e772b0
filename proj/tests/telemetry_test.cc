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

#include "fpsentinel/telemetry.hpp"

#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "fpsentinel/synthgen.hpp"
#include "test_util.hpp"

namespace fpsentinel {
namespace {

using testutil::MakeTrace;

constexpr const char* kValidLine =
    R"({"script_id":"9f3a","script_url":"https://cdn.example.com/a.js",)"
    R"("page_url":"https://www.example.com/news","site":"example.com",)"
    R"("frame_depth":0,"apis":[{"name":"CanvasRenderingContext2D.fillText","calls":3}]})";

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kUndefined;
}

TEST(ApiIdentifierTest, LowercasesNames) {
  EXPECT_EQ(CanonicalizeApiName("CanvasRenderingContext2D.fillText").str(),
            "canvasrenderingcontext2d.filltext");
}

TEST(ApiIdentifierTest, KeepsWhitespaceInsideSelector) {
  EXPECT_EQ(CanonicalizeApiName("window.navigator.plugins[Chrome PDF Plugin]").str(),
            "window.navigator.plugins[chrome pdf plugin]");
}

TEST(ApiIdentifierTest, IsIdempotent) {
  const auto once = CanonicalizeApiName("audiocontext.sinkid");
  EXPECT_EQ(once.str(), "audiocontext.sinkid");
  EXPECT_EQ(CanonicalizeApiName(once.str()), once);
  const auto p = CanonicalizeApiName("  Window.Navigator.Plugins[PDF Viewer] ");
  EXPECT_EQ(CanonicalizeApiName(p.str()), p);
}

TEST(ApiIdentifierTest, RejectsMalformedNames) {
  for (const char* bad : {"", "   ", "foo bar", "a[b", "a]b", "a[b[c]]"}) {
    EXPECT_EQ(CodeOf([&] { CanonicalizeApiName(bad); }), ErrorCode::kInvalidIdentifier)
        << bad;
  }
}

TEST(ParseTelemetryLineTest, DecodesOneAggregate) {
  const ScriptTrace t = ParseTelemetryLine(kValidLine);
  ASSERT_EQ(t.aggregates.size(), 1u);
  const auto& agg = t.aggregates.at(CanonicalizeApiName("canvasrenderingcontext2d.filltext"));
  EXPECT_EQ(agg.call_count, 3u);
  EXPECT_EQ(t.site, "example.com");
  EXPECT_EQ(t.script_id, "9f3a");
}

TEST(ParseTelemetryLineTest, MissingScriptIdNamesTheField) {
  std::string line = kValidLine;
  line.replace(line.find("\"script_id\""), std::string("\"script_id\"").size(), "\"other\"");
  try {
    ParseTelemetryLine(line);
    FAIL() << "expected schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
    EXPECT_EQ(e.field(), "script_id");
  }
}

TEST(ParseTelemetryLineTest, IgnoresUnknownFields) {
  std::string line = kValidLine;
  line.insert(1, R"("debug":true,)");
  const ScriptTrace t = ParseTelemetryLine(line);
  EXPECT_EQ(TraceToJson(t).contains("debug"), false);
  EXPECT_EQ(t, ParseTelemetryLine(kValidLine));
}

TEST(ParseTelemetryLineTest, RejectsRawArguments) {
  std::string line = kValidLine;
  line.insert(1, R"("raw_args":["secret"],)");
  EXPECT_EQ(CodeOf([&] { ParseTelemetryLine(line); }), ErrorCode::kValidation);
  std::string nested = kValidLine;
  nested.replace(nested.find("\"calls\":3"), 9, R"("calls":3,"raw_args":["x"])");
  EXPECT_EQ(CodeOf([&] { ParseTelemetryLine(nested); }), ErrorCode::kValidation);
}

TEST(ParseTelemetryLineTest, MalformedJsonCarriesOffset) {
  try {
    ParseTelemetryLine(R"({"script_id": )");
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_GT(e.byte_offset(), 0u);
  }
}

TEST(ParseTelemetryLineTest, ValidatesCountsAndSite) {
  auto with = [](const std::string& from, const std::string& to) {
    std::string line = kValidLine;
    line.replace(line.find(from), from.size(), to);
    return line;
  };
  EXPECT_EQ(CodeOf([&] { ParseTelemetryLine(with("\"calls\":3", "\"calls\":-1")); }),
            ErrorCode::kValidation);
  EXPECT_EQ(CodeOf([&] {
              ParseTelemetryLine(with("\"calls\":3", "\"calls\":3,\"distinct_str_args\":4"));
            }),
            ErrorCode::kValidation);
  EXPECT_EQ(CodeOf([&] {
              ParseTelemetryLine(with("\"site\":\"example.com\"", "\"site\":\"other.com\""));
            }),
            ErrorCode::kValidation);
  EXPECT_EQ(CodeOf([&] { ParseTelemetryLine(with("\"9f3a\"", "\"zz\"")); }),
            ErrorCode::kValidation);
  // Zero-call entries are dropped rather than stored.
  EXPECT_TRUE(ParseTelemetryLine(with("\"calls\":3", "\"calls\":0")).aggregates.empty());
}

TEST(ParseTelemetryLineTest, RoundTripsThroughSerialization) {
  ScriptTrace t = MakeTrace("example.co.uk", "/a?b=1", 77,
                            {{"canvasrenderingcontext2d.font", 9, 4},
                             {"window.navigator.plugins[chrome pdf viewer]", 2}});
  t.frame_depth = 2;
  t.aggregates.begin()->second.max_string_arg_len = 12;
  EXPECT_EQ(ParseTelemetryLine(SerializeTelemetryLine(t)), t);
}

TEST(ReadTelemetryStreamTest, CountsRejectedLinesWithoutAborting) {
  std::stringstream in;
  in << kValidLine << "\n\nnot json\n" << kValidLine << "\r\n";
  const IngestResult r = ReadTelemetryStream(in);
  EXPECT_EQ(r.traces.size(), 2u);
  EXPECT_EQ(r.rejected, 1u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].rfind("line 3:", 0), 0u);
}

TEST(MergeTracesTest, AddsCountsOfSameTriple) {
  auto a = MakeTrace("x.com", "/", 1, {{"document.cookie", 2}});
  auto b = MakeTrace("x.com", "/", 1, {{"document.cookie", 3}});
  const auto merged = MergeTraces({a, b});
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].aggregates.begin()->second.call_count, 5u);
}

TEST(MergeTracesTest, KeepsDistinctPagesApart) {
  auto a = MakeTrace("x.com", "/", 1, {{"document.cookie", 2}});
  auto b = MakeTrace("x.com", "/other", 1, {{"document.cookie", 3}});
  EXPECT_EQ(MergeTraces({a, b}).size(), 2u);
}

TEST(MergeTracesTest, TakesMaxOfLengthAndDistinctFields) {
  auto a = MakeTrace("x.com", "/", 1, {{"canvasrenderingcontext2d.font", 4, 3}});
  auto b = MakeTrace("x.com", "/", 1, {{"canvasrenderingcontext2d.font", 2, 2}});
  a.aggregates.begin()->second.max_string_arg_len = 10;
  b.aggregates.begin()->second.max_string_arg_len = 7;
  a.aggregates.begin()->second.sum_string_arg_len = 20;
  b.aggregates.begin()->second.sum_string_arg_len = 5;
  const auto m = MergeTraces({b, a})[0].aggregates.begin()->second;
  EXPECT_EQ(m.max_string_arg_len, 10u);
  EXPECT_EQ(m.distinct_string_args, 3u);
  EXPECT_EQ(m.sum_string_arg_len, 25u);
  EXPECT_EQ(m.call_count, 6u);
}

TEST(MergeTracesTest, IsOrderIndependent) {
  auto a = MakeTrace("x.com", "/", 1, {{"document.cookie", 2}});
  auto b = MakeTrace("x.com", "/", 1, {{"window.screen.width", 1}});
  b.script_url = "https://a.x.com/first.js";
  b.frame_depth = 1;
  EXPECT_EQ(MergeTraces({a, b}), MergeTraces({b, a}));
}

Corpus ThreeSiteCorpus() {
  Corpus c;
  c.label = "real";
  c.websites = {testutil::Site("a.com", 1, {"/"}, "Gambling"),
                testutil::Site("b.com", 2, {"/"}, "unknown"),
                testutil::Site("c.com", 3, {"/"}, "News & Media")};
  for (const char* s : {"a.com", "b.com", "c.com"}) {
    c.traces.push_back(testutil::BenignTrace(s, "/", c.traces.size()));
  }
  return c;
}

TEST(FilterWebsitesByCategoryTest, DropsExcludedSitesAndTheirTraces) {
  const Corpus out = FilterWebsitesByCategory(ThreeSiteCorpus());
  ASSERT_EQ(out.websites.size(), 2u);
  EXPECT_EQ(out.FindWebsite("a.com"), nullptr);
  for (const auto& t : out.traces) EXPECT_NE(t.site, "a.com");
  EXPECT_NE(out.FindWebsite("b.com"), nullptr);  // "unknown" is kept
}

TEST(FilterWebsitesByCategoryTest, EmptyExclusionIsIdentity) {
  const Corpus c = ThreeSiteCorpus();
  EXPECT_TRUE(SameCorpus(FilterWebsitesByCategory(c, {}), c));
}

TEST(CategoryCsvTest, ParsesWithHeaderAndQuotes) {
  std::stringstream in("site,category\nA.com,\"News & Media\"\nb.com,\n\n");
  const auto m = ReadCategoryCsv(in);
  EXPECT_EQ(m.at("a.com"), "News & Media");
  EXPECT_EQ(m.at("b.com"), "unknown");
}

TEST(BuildCorpusTest, DerivesWebsitesAndRanks) {
  std::vector<ScriptTrace> traces = {
      MakeTrace("b.com", "/", 1, {{"document.cookie", 1}}),
      MakeTrace("a.com", "/x", 2, {{"document.cookie", 1}}),
      MakeTrace("a.com", "/", 3, {{"document.cookie", 1}}),
      MakeTrace("c.com", "/", 4, {{"document.cookie", 1}})};
  const Corpus c = BuildCorpus("real", traces, {{"a.com", 5}, {"b.com", 2}});
  ASSERT_EQ(c.websites.size(), 3u);
  EXPECT_EQ(c.websites[0].site, "b.com");
  EXPECT_EQ(c.websites[1].site, "a.com");
  EXPECT_EQ(c.websites[1].pages,
            (std::vector<std::string>{"https://a.com/x", "https://a.com/"}));
  EXPECT_EQ(c.websites[2].site, "c.com");
  EXPECT_EQ(c.websites[2].rank, 6u);
}

TEST(CorpusFileTest, EmptyCorpusRoundTrips) {
  Corpus c;
  c.label = "empty";
  std::stringstream s;
  WriteCorpus(c, s);
  EXPECT_TRUE(SameCorpus(ReadCorpus(s), c));
}

TEST(CorpusFileTest, GeneratedCorpusRoundTrips) {
  CorpusConfig cfg;
  cfg.n_sites = 50;
  cfg.scripts_per_site = 20;  // 1000 traces
  const Corpus c = GenerateCorpus(cfg, 5);
  ASSERT_EQ(c.traces.size(), 1000u);
  std::stringstream s;
  WriteCorpus(c, s);
  const std::string bytes = s.str();
  const Corpus back = ReadCorpus(s);
  // Structural oracle: compare field by field after sorting both.
  Corpus a = c, b = back;
  SortCorpus(a);
  SortCorpus(b);
  ASSERT_EQ(a.traces.size(), b.traces.size());
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    EXPECT_EQ(a.traces[i].key(), b.traces[i].key());
    EXPECT_EQ(a.traces[i].aggregates, b.traces[i].aggregates);
  }
  EXPECT_EQ(a.websites, b.websites);
  std::stringstream again;
  WriteCorpus(back, again);
  EXPECT_EQ(again.str(), bytes);
}

TEST(CorpusFileTest, CorruptedHeaderIsVersionError) {
  std::stringstream s("{\"format\":\"fp-corpus\",\"vers");
  EXPECT_EQ(CodeOf([&] { ReadCorpus(s); }), ErrorCode::kVersion);
  std::stringstream wrong(R"({"format":"fp-corpus","version":9,"websites":0,"traces":0})");
  EXPECT_EQ(CodeOf([&] { ReadCorpus(wrong); }), ErrorCode::kVersion);
}

TEST(CorpusFileTest, MissingFileIsIoError) {
  EXPECT_EQ(CodeOf([] { LoadCorpus("/nonexistent/dir/c.corpus"); }), ErrorCode::kIo);
}

TEST(RegistrableDomainTest, HandlesCommonSuffixes) {
  EXPECT_EQ(RegistrableDomain("www.example.com"), "example.com");
  EXPECT_EQ(RegistrableDomain("a.b.example.co.uk"), "example.co.uk");
  EXPECT_EQ(RegistrableDomain("localhost"), "localhost");
}

}  // namespace
}  // namespace fpsentinel
