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

// Telemetry data model and the JSON Lines wire format emitted by the
// in-browser instrumentation. A ScriptTrace holds processed per-API
// aggregates only; raw argument and return values never enter the model.

#ifndef FPSENTINEL_TELEMETRY_HPP_
#define FPSENTINEL_TELEMETRY_HPP_

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fpsentinel/common.hpp"
#include "json.hpp"

namespace fpsentinel {

using Json = nlohmann::json;

// A canonical monitored-API name such as
// "canvasrenderingcontext2d.filltext" or
// "window.navigator.plugins[chrome pdf plugin]". Only constructible through
// Canonicalize, so holding one implies the invariants hold.
class ApiIdentifier {
 public:
  ApiIdentifier() = default;

  // Lowercases and trims. Whitespace is only allowed inside a bracketed
  // selector; brackets must balance and may not nest.
  static ApiIdentifier Canonicalize(std::string_view raw) {
    std::size_t begin = 0;
    std::size_t end = raw.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin])))
      ++begin;
    while (end > begin &&
           std::isspace(static_cast<unsigned char>(raw[end - 1])))
      --end;
    if (begin == end) {
      throw Error(ErrorCode::kInvalidIdentifier, "empty API identifier");
    }
    std::string out;
    out.reserve(end - begin);
    bool in_selector = false;
    for (std::size_t i = begin; i < end; ++i) {
      const unsigned char c = static_cast<unsigned char>(raw[i]);
      if (c == '[') {
        if (in_selector) {
          throw Error(ErrorCode::kInvalidIdentifier,
                      "nested selector in API identifier: " + std::string(raw));
        }
        in_selector = true;
      } else if (c == ']') {
        if (!in_selector) {
          throw Error(ErrorCode::kInvalidIdentifier,
                      "unbalanced ']' in API identifier: " + std::string(raw));
        }
        in_selector = false;
      } else if (std::isspace(c) && !in_selector) {
        throw Error(ErrorCode::kInvalidIdentifier,
                    "whitespace in API identifier: " + std::string(raw));
      }
      out.push_back(static_cast<char>(std::tolower(c)));
    }
    if (in_selector) {
      throw Error(ErrorCode::kInvalidIdentifier,
                  "unterminated selector in API identifier: " +
                      std::string(raw));
    }
    ApiIdentifier id;
    id.name_ = std::move(out);
    return id;
  }

  const std::string& str() const noexcept { return name_; }
  bool empty() const noexcept { return name_.empty(); }

  friend auto operator<=>(const ApiIdentifier&, const ApiIdentifier&) = default;
  friend bool operator==(const ApiIdentifier&, const ApiIdentifier&) = default;

 private:
  std::string name_;
};

inline ApiIdentifier CanonicalizeApiName(std::string_view raw) {
  return ApiIdentifier::Canonicalize(raw);
}

struct ApiCallAggregate {
  std::uint64_t call_count = 0;
  std::uint64_t distinct_string_args = 0;
  std::uint64_t max_string_arg_len = 0;
  std::uint64_t sum_string_arg_len = 0;
  std::uint64_t list_return_len_sum = 0;

  friend bool operator==(const ApiCallAggregate&,
                         const ApiCallAggregate&) = default;
};

using AggregateMap = std::map<ApiIdentifier, ApiCallAggregate>;

struct ScriptTrace {
  std::string script_id;
  std::string script_url;
  std::string page_url;
  std::string site;
  std::uint32_t frame_depth = 0;
  AggregateMap aggregates;

  // Merge and dedup key.
  auto key() const { return std::tie(site, page_url, script_id); }

  friend bool operator==(const ScriptTrace&, const ScriptTrace&) = default;
};

struct WebsiteRecord {
  std::string site;
  std::uint64_t rank = 1;
  std::string category = "unknown";
  std::vector<std::string> pages;
  std::optional<int> http_status;

  friend bool operator==(const WebsiteRecord&, const WebsiteRecord&) = default;
};

struct Corpus {
  std::string label;
  std::vector<WebsiteRecord> websites;
  std::vector<ScriptTrace> traces;

  const WebsiteRecord* FindWebsite(std::string_view site) const {
    for (const auto& w : websites) {
      if (w.site == site) return &w;
    }
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// URLs

struct ParsedUrl {
  std::string scheme;
  std::string host;
  std::string path;  // without query or fragment; may be empty
};

// Minimal absolute-URL splitter; returns nullopt when there is no
// "scheme://host" prefix.
inline std::optional<ParsedUrl> ParseUrl(std::string_view url) {
  const auto sep = url.find("://");
  if (sep == std::string_view::npos || sep == 0) return std::nullopt;
  ParsedUrl out;
  out.scheme = std::string(url.substr(0, sep));
  for (char c : out.scheme) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' &&
        c != '-' && c != '.') {
      return std::nullopt;
    }
  }
  std::string_view rest = url.substr(sep + 3);
  const auto host_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, host_end);
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
    authority = authority.substr(at + 1);
  }
  if (const auto colon = authority.rfind(':');
      colon != std::string_view::npos &&
      authority.find(']') == std::string_view::npos) {
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) return std::nullopt;
  for (char c : authority) {
    if (std::isspace(static_cast<unsigned char>(c))) return std::nullopt;
    out.host.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (host_end != std::string_view::npos && rest[host_end] == '/') {
    std::string_view path = rest.substr(host_end);
    path = path.substr(0, path.find_first_of("?#"));
    out.path = std::string(path);
  }
  return out;
}

// Registrable domain (eTLD+1) using a short built-in list of multi-label
// public suffixes. IP literals are returned unchanged.
inline std::string RegistrableDomain(std::string_view host) {
  static const std::set<std::string, std::less<>> kMultiLabelSuffixes = {
      "co.uk",  "org.uk", "ac.uk",  "gov.uk", "com.au", "net.au", "org.au",
      "co.jp",  "ne.jp",  "or.jp",  "co.nz",  "co.in",  "co.kr",  "com.br",
      "com.cn", "com.mx", "com.tr", "com.sg", "com.hk", "co.za",  "com.ar",
  };
  std::string h(host);
  if (!h.empty() && h.back() == '.') h.pop_back();
  if (h.empty()) return h;
  if (h.front() == '[' ||
      std::all_of(h.begin(), h.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
      })) {
    return h;
  }
  std::vector<std::size_t> dots;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] == '.') dots.push_back(i);
  }
  if (dots.empty()) return h;
  std::size_t labels = 2;
  if (dots.size() >= 2) {
    const std::string last_two = h.substr(dots[dots.size() - 2] + 1);
    if (kMultiLabelSuffixes.contains(last_two)) labels = 3;
  }
  if (dots.size() < labels) return h;
  return h.substr(dots[dots.size() - labels] + 1);
}

// ---------------------------------------------------------------------------
// Wire format

namespace telemetry_internal {

inline const Json& RequireField(const Json& obj, const char* name) {
  const auto it = obj.find(name);
  if (it == obj.end()) throw SchemaError(name);
  return *it;
}

inline std::string RequireString(const Json& obj, const char* name) {
  const Json& v = RequireField(obj, name);
  if (!v.is_string()) throw SchemaError(name);
  return v.get<std::string>();
}

inline std::uint64_t RequireCount(const Json& obj, const char* name,
                                  bool required = true) {
  const auto it = obj.find(name);
  if (it == obj.end()) {
    if (required) throw SchemaError(name);
    return 0;
  }
  if (it->is_number_integer() && it->get<std::int64_t>() < 0) {
    throw Error(ErrorCode::kValidation,
                std::string("negative value for ") + name);
  }
  if (!it->is_number_unsigned() && !it->is_number_integer()) {
    throw SchemaError(name);
  }
  return it->get<std::uint64_t>();
}

inline bool IsHex(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isxdigit(static_cast<unsigned char>(c));
  });
}

inline ScriptTrace TraceFromJson(const Json& obj) {
  if (!obj.is_object()) throw SchemaError("<object>");
  if (obj.contains("raw_args")) {
    throw Error(ErrorCode::kValidation,
                "raw argument values are not accepted (field raw_args)");
  }
  ScriptTrace t;
  t.script_id = RequireString(obj, "script_id");
  if (!IsHex(t.script_id)) {
    throw Error(ErrorCode::kValidation, "script_id must be a hex string");
  }
  std::transform(t.script_id.begin(), t.script_id.end(), t.script_id.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  t.script_url = RequireString(obj, "script_url");
  t.page_url = RequireString(obj, "page_url");
  t.site = RequireString(obj, "site");
  if (t.site.empty()) throw Error(ErrorCode::kValidation, "empty site");
  std::transform(t.site.begin(), t.site.end(), t.site.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  const auto depth = RequireCount(obj, "frame_depth");
  t.frame_depth = static_cast<std::uint32_t>(depth);
  if (const auto url = ParseUrl(t.page_url)) {
    const std::string expected = RegistrableDomain(url->host);
    if (expected != t.site) {
      throw Error(ErrorCode::kValidation, "site '" + t.site +
                                              "' does not match page_url "
                                              "domain '" + expected + "'");
    }
  } else {
    throw Error(ErrorCode::kValidation, "unparsable page_url: " + t.page_url);
  }
  const Json& apis = RequireField(obj, "apis");
  if (!apis.is_array()) throw SchemaError("apis");
  for (const Json& a : apis) {
    if (!a.is_object()) throw SchemaError("apis[]");
    if (a.contains("raw_args")) {
      throw Error(ErrorCode::kValidation,
                  "raw argument values are not accepted (field raw_args)");
    }
    const ApiIdentifier id = ApiIdentifier::Canonicalize(RequireString(a, "name"));
    ApiCallAggregate agg;
    agg.call_count = RequireCount(a, "calls");
    agg.distinct_string_args = RequireCount(a, "distinct_str_args", false);
    agg.max_string_arg_len = RequireCount(a, "max_str_len", false);
    agg.sum_string_arg_len = RequireCount(a, "sum_str_len", false);
    agg.list_return_len_sum = RequireCount(a, "list_ret_len_sum", false);
    if (agg.distinct_string_args > agg.call_count) {
      throw Error(ErrorCode::kValidation,
                  "distinct_str_args exceeds calls for " + id.str());
    }
    if (agg.call_count == 0) continue;  // zero-call APIs are not stored
    if (!t.aggregates.emplace(id, agg).second) {
      throw Error(ErrorCode::kValidation, "duplicate api entry " + id.str());
    }
  }
  return t;
}

}  // namespace telemetry_internal

inline Json TraceToJson(const ScriptTrace& t) {
  Json apis = Json::array();
  for (const auto& [id, agg] : t.aggregates) {
    apis.push_back({{"name", id.str()},
                    {"calls", agg.call_count},
                    {"distinct_str_args", agg.distinct_string_args},
                    {"max_str_len", agg.max_string_arg_len},
                    {"sum_str_len", agg.sum_string_arg_len},
                    {"list_ret_len_sum", agg.list_return_len_sum}});
  }
  return Json{{"script_id", t.script_id}, {"script_url", t.script_url},
              {"page_url", t.page_url},   {"site", t.site},
              {"frame_depth", t.frame_depth}, {"apis", std::move(apis)}};
}

inline std::string SerializeTelemetryLine(const ScriptTrace& t) {
  return TraceToJson(t).dump();
}

// Decodes one JSON Lines record. Unknown top-level fields are ignored.
inline ScriptTrace ParseTelemetryLine(std::string_view line) {
  Json obj;
  try {
    obj = Json::parse(line.begin(), line.end());
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  return telemetry_internal::TraceFromJson(obj);
}

struct IngestResult {
  std::vector<ScriptTrace> traces;
  std::size_t rejected = 0;
  std::vector<std::string> errors;  // "line N: message"
};

// Reads a JSON Lines stream; malformed lines are counted, not fatal.
inline IngestResult ReadTelemetryStream(std::istream& in) {
  IngestResult out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.traces.push_back(ParseTelemetryLine(line));
    } catch (const Error& e) {
      ++out.rejected;
      out.errors.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Merge / filter

// Counts and sums add; distinct_string_args and max_string_arg_len take the
// element-wise max. Where two records disagree on script_url or frame_depth
// the smaller value wins so the result is independent of input order.
inline std::vector<ScriptTrace> MergeTraces(std::vector<ScriptTrace> traces) {
  std::sort(traces.begin(), traces.end(),
            [](const ScriptTrace& a, const ScriptTrace& b) {
              return a.key() < b.key();
            });
  std::vector<ScriptTrace> out;
  out.reserve(traces.size());
  for (auto& t : traces) {
    if (!out.empty() && out.back().key() == t.key()) {
      ScriptTrace& m = out.back();
      m.script_url = std::min(m.script_url, t.script_url);
      m.frame_depth = std::min(m.frame_depth, t.frame_depth);
      for (const auto& [id, agg] : t.aggregates) {
        auto [it, inserted] = m.aggregates.emplace(id, agg);
        if (inserted) continue;
        ApiCallAggregate& dst = it->second;
        dst.call_count += agg.call_count;
        dst.sum_string_arg_len += agg.sum_string_arg_len;
        dst.list_return_len_sum += agg.list_return_len_sum;
        dst.distinct_string_args =
            std::max(dst.distinct_string_args, agg.distinct_string_args);
        dst.max_string_arg_len =
            std::max(dst.max_string_arg_len, agg.max_string_arg_len);
      }
    } else {
      out.push_back(std::move(t));
    }
  }
  return out;
}

inline const std::set<std::string>& DefaultExcludedCategories() {
  static const std::set<std::string> kExcluded = {
      "Adult Themes",     "Gambling", "Questionable Content",
      "Security Threats", "Violence", "Security Risks"};
  return kExcluded;
}

inline Corpus FilterWebsitesByCategory(
    const Corpus& corpus,
    const std::set<std::string>& excluded = DefaultExcludedCategories()) {
  Corpus out;
  out.label = corpus.label;
  std::set<std::string, std::less<>> dropped;
  for (const auto& w : corpus.websites) {
    if (excluded.contains(w.category)) {
      dropped.insert(w.site);
    } else {
      out.websites.push_back(w);
    }
  }
  for (const auto& t : corpus.traces) {
    if (!dropped.contains(t.site)) out.traces.push_back(t);
  }
  return out;
}

// "site,category" CSV. An optional header row whose first cell is "site" is
// skipped. Only the first comma separates the columns.
inline std::unordered_map<std::string, std::string> ReadCategoryCsv(
    std::istream& in) {
  std::unordered_map<std::string, std::string> out;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    const auto e = s.find_last_not_of(" \t\r\"");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  bool first = true;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      if (trim(line).empty()) continue;
      throw Error(ErrorCode::kValidation, "category CSV row without comma: " + line);
    }
    std::string site = trim(line.substr(0, comma));
    std::string category = trim(line.substr(comma + 1));
    std::transform(site.begin(), site.end(), site.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (first && site == "site") {
      first = false;
      continue;
    }
    first = false;
    if (site.empty()) continue;
    out[site] = category.empty() ? "unknown" : category;
  }
  return out;
}

inline std::unordered_map<std::string, std::string> LoadCategoryCsv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open category file " + path);
  return ReadCategoryCsv(in);
}

inline void ApplyCategories(
    Corpus& corpus,
    const std::unordered_map<std::string, std::string>& categories) {
  for (auto& w : corpus.websites) {
    if (const auto it = categories.find(w.site); it != categories.end()) {
      w.category = it->second;
    }
  }
}

// Builds a corpus from raw traces: merges them, derives one WebsiteRecord per
// site with pages in first-seen order, and assigns ranks from `ranks` (sites
// without a rank follow, in first-seen order).
inline Corpus BuildCorpus(
    std::string label, std::vector<ScriptTrace> traces,
    const std::unordered_map<std::string, std::uint64_t>& ranks = {}) {
  Corpus c;
  c.label = std::move(label);
  std::unordered_map<std::string, std::size_t> site_index;
  for (const auto& t : traces) {
    auto [it, inserted] = site_index.emplace(t.site, c.websites.size());
    if (inserted) {
      WebsiteRecord w;
      w.site = t.site;
      c.websites.push_back(std::move(w));
    }
    auto& pages = c.websites[it->second].pages;
    if (std::find(pages.begin(), pages.end(), t.page_url) == pages.end()) {
      pages.push_back(t.page_url);
    }
  }
  std::uint64_t max_rank = 0;
  for (const auto& [site, r] : ranks) max_rank = std::max(max_rank, r);
  std::uint64_t next = max_rank + 1;
  for (auto& w : c.websites) {
    if (const auto it = ranks.find(w.site); it != ranks.end()) {
      w.rank = std::max<std::uint64_t>(1, it->second);
    } else {
      w.rank = next++;
    }
  }
  std::stable_sort(c.websites.begin(), c.websites.end(),
                   [](const WebsiteRecord& a, const WebsiteRecord& b) {
                     return std::tie(a.rank, a.site) < std::tie(b.rank, b.site);
                   });
  c.traces = MergeTraces(std::move(traces));
  return c;
}

// ---------------------------------------------------------------------------
// Corpus persistence
//
//   {"format":"fp-corpus","version":1,"label":...,"websites":W,"traces":T}
//   W website lines
//   T trace lines (telemetry schema)
//
// Websites are written in (rank, site) order and traces in key order so equal
// corpora serialize to identical bytes.

inline constexpr int kCorpusFormatVersion = 1;

inline void SortCorpus(Corpus& c) {
  std::sort(c.websites.begin(), c.websites.end(),
            [](const WebsiteRecord& a, const WebsiteRecord& b) {
              return std::tie(a.rank, a.site) < std::tie(b.rank, b.site);
            });
  std::sort(c.traces.begin(), c.traces.end(),
            [](const ScriptTrace& a, const ScriptTrace& b) {
              return a.key() < b.key();
            });
}

inline void WriteCorpus(const Corpus& corpus, std::ostream& out) {
  Corpus c = corpus;
  SortCorpus(c);
  out << Json{{"format", "fp-corpus"},
              {"version", kCorpusFormatVersion},
              {"label", c.label},
              {"websites", c.websites.size()},
              {"traces", c.traces.size()}}
             .dump()
      << '\n';
  for (const auto& w : c.websites) {
    Json j{{"site", w.site},
           {"rank", w.rank},
           {"category", w.category},
           {"pages", w.pages}};
    if (w.http_status) j["http_status"] = *w.http_status;
    out << j.dump() << '\n';
  }
  for (const auto& t : c.traces) out << SerializeTelemetryLine(t) << '\n';
}

inline Corpus ReadCorpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kVersion, "missing corpus header");
  }
  Json header;
  try {
    header = Json::parse(line);
  } catch (const Json::parse_error&) {
    throw Error(ErrorCode::kVersion, "corrupted corpus header");
  }
  if (!header.is_object() || header.value("format", "") != "fp-corpus" ||
      !header.contains("version") || !header["version"].is_number_integer()) {
    throw Error(ErrorCode::kVersion, "not an fp-corpus file");
  }
  if (header["version"].get<int>() != kCorpusFormatVersion) {
    throw Error(ErrorCode::kVersion,
                "unsupported corpus version " + header["version"].dump());
  }
  Corpus c;
  c.label = header.value("label", "");
  const auto n_sites = header.value("websites", std::size_t{0});
  const auto n_traces = header.value("traces", std::size_t{0});
  std::set<std::string, std::less<>> sites;
  for (std::size_t i = 0; i < n_sites; ++i) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::kValidation, "truncated corpus: website records");
    }
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(e.what(), e.byte);
    }
    WebsiteRecord w;
    w.site = telemetry_internal::RequireString(j, "site");
    w.rank = telemetry_internal::RequireCount(j, "rank");
    if (w.rank < 1) throw Error(ErrorCode::kValidation, "rank must be >= 1");
    w.category = j.value("category", "unknown");
    for (const auto& p : telemetry_internal::RequireField(j, "pages")) {
      w.pages.push_back(p.get<std::string>());
    }
    if (j.contains("http_status") && !j["http_status"].is_null()) {
      w.http_status = j["http_status"].get<int>();
    }
    sites.insert(w.site);
    c.websites.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < n_traces; ++i) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::kValidation, "truncated corpus: trace records");
    }
    ScriptTrace t = ParseTelemetryLine(line);
    if (!sites.contains(t.site)) {
      throw Error(ErrorCode::kValidation,
                  "trace references unknown site " + t.site);
    }
    c.traces.push_back(std::move(t));
  }
  return c;
}

inline void SaveCorpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  WriteCorpus(corpus, out);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

inline Corpus LoadCorpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return ReadCorpus(in);
}

// Structural equality, insensitive to website and trace order.
inline bool SameCorpus(Corpus a, Corpus b) {
  SortCorpus(a);
  SortCorpus(b);
  return a.label == b.label && a.websites == b.websites &&
         a.traces == b.traces;
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_TELEMETRY_HPP_
