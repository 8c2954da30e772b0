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

// Deterministic synthetic corpora. A "real-like" corpus is generated from
// behavior profiles; a "crawl-like" corpus is derived from it by suppressing
// fingerprinting the way an automated crawler misses it (failed visits,
// interaction-gated auth/content/home pages, device-gated APIs).

#ifndef FPSENTINEL_SYNTHGEN_HPP_
#define FPSENTINEL_SYNTHGEN_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fpsentinel/analysis.hpp"
#include "fpsentinel/common.hpp"
#include "fpsentinel/heuristics.hpp"
#include "fpsentinel/manifest.hpp"
#include "fpsentinel/telemetry.hpp"
#include "json.hpp"

namespace fpsentinel {

enum class ProfileKind {
  kCanvasFp,
  kCanvasFontFp,
  kWebRtcFp,
  kAudioFp,
  kBenignCanvas,
  kBenignMisc,
};

inline constexpr std::array<ProfileKind, 6> kAllProfiles = {
    ProfileKind::kCanvasFp,     ProfileKind::kCanvasFontFp,
    ProfileKind::kWebRtcFp,     ProfileKind::kAudioFp,
    ProfileKind::kBenignCanvas, ProfileKind::kBenignMisc};

inline std::string_view ProfileName(ProfileKind k) {
  switch (k) {
    case ProfileKind::kCanvasFp: return "canvas_fp";
    case ProfileKind::kCanvasFontFp: return "canvas_font_fp";
    case ProfileKind::kWebRtcFp: return "webrtc_fp";
    case ProfileKind::kAudioFp: return "audio_fp";
    case ProfileKind::kBenignCanvas: return "benign_canvas";
    case ProfileKind::kBenignMisc: return "benign_misc";
  }
  return "";
}

inline ProfileKind ParseProfile(std::string_view name) {
  for (ProfileKind k : kAllProfiles) {
    if (ProfileName(k) == name) return k;
  }
  throw Error(ErrorCode::kConfig, "unknown profile: " + std::string(name));
}

inline bool IsFingerprintingProfile(ProfileKind k) {
  return k != ProfileKind::kBenignCanvas && k != ProfileKind::kBenignMisc;
}

// Call-count range for the profile's primary APIs. Heuristic thresholds
// (e.g. the canvas-font minimums) are enforced on top of this range.
struct BehaviorProfile {
  ProfileKind kind = ProfileKind::kBenignMisc;
  std::uint32_t min_calls = 1;
  std::uint32_t max_calls = 6;
};

struct CorpusConfig {
  std::string label = "real";
  std::uint32_t n_sites = 100;
  std::uint32_t scripts_per_site = 20;
  double fp_site_fraction = 0.15;
  std::uint32_t min_fp_scripts_per_site = 1;
  std::uint32_t max_fp_scripts_per_site = 2;
  std::map<ProfileKind, double> fp_mix = {{ProfileKind::kCanvasFp, 0.55},
                                          {ProfileKind::kAudioFp, 0.25},
                                          {ProfileKind::kWebRtcFp, 0.12},
                                          {ProfileKind::kCanvasFontFp, 0.08}};
  std::map<ProfileKind, double> benign_mix = {{ProfileKind::kBenignCanvas, 0.2},
                                              {ProfileKind::kBenignMisc, 0.8}};
  // Share of audio/WebRTC fingerprinting scripts that use device-gated APIs
  // (only observable with real audio hardware or network peers).
  double device_variant_fraction = 0.0;
  // Page kinds hosting a site's fingerprinting scripts (home, content, auth).
  std::array<double, 3> fp_page_weights = {0.6, 0.25, 0.15};
  std::uint32_t min_calls = 1;
  std::uint32_t max_calls = 6;
  std::vector<std::string> categories = {
      "E-commerce", "Shopping", "News & Media", "Society & Lifestyle",
      "Video Streaming", "Technology", "Education", "Travel",
      "Business & Economy", "Entertainment"};
};

// Per-reason probabilities that a fingerprinting site's FP scripts are
// absent from the crawl. Failed is decided first; the page-kind reasons then
// independently drop FP scripts on pages of that kind. FP scripts calling any
// device-gated API never appear in the crawl.
struct SuppressionPolicy {
  double failed_fraction = 0.0;
  double auth_fraction = 0.0;
  double content_fraction = 0.0;
  double home_fraction = 0.0;
  std::vector<ApiIdentifier> device_gated_apis;

  static std::vector<ApiIdentifier> DefaultDeviceGatedApis() {
    std::vector<ApiIdentifier> out;
    for (const char* n :
         {"audiocontext.sinkid", "audiocontext.onsinkchange",
          "rtcpeerconnection.getconfiguration", "rtcpeerconnection.sctp",
          "rtcpeerconnection.gettransceivers",
          "rtcpeerconnection.onicecandidateerror",
          "rtcpeerconnection.tostring", "rtcicecandidate.address"}) {
      out.push_back(ApiIdentifier::Canonicalize(n));
    }
    return out;
  }

  // A crawl that misses roughly half of the fingerprinting sites, with
  // device-gated scripts invisible to it.
  static SuppressionPolicy Desk() {
    SuppressionPolicy p;
    p.failed_fraction = 0.03;
    p.auth_fraction = 0.2;
    p.content_fraction = 0.4;
    p.home_fraction = 0.45;
    p.device_gated_apis = DefaultDeviceGatedApis();
    return p;
  }

  void Validate() const {
    for (double f : {failed_fraction, auth_fraction, content_fraction, home_fraction}) {
      if (!(f >= 0.0 && f <= 1.0)) {
        throw Error(ErrorCode::kConfig, "suppression fractions must be in [0, 1]");
      }
    }
  }
};

namespace synthgen_internal {

using Rng = std::mt19937_64;

inline std::uint32_t Uniform(Rng& rng, std::uint32_t lo, std::uint32_t hi) {
  return std::uniform_int_distribution<std::uint32_t>(lo, std::max(lo, hi))(rng);
}

inline bool Coin(Rng& rng, double p) {
  return std::bernoulli_distribution(std::clamp(p, 0.0, 1.0))(rng);
}

class TraceBuilder {
 public:
  TraceBuilder(Rng& rng, std::uint32_t lo, std::uint32_t hi)
      : rng_(rng), lo_(lo), hi_(std::max(lo, hi)) {}

  // Plain call-counted API.
  TraceBuilder& Call(const char* api) { return Call(api, Uniform(rng_, lo_, hi_)); }

  TraceBuilder& Call(const char* api, std::uint64_t calls) {
    auto& a = aggs_[ApiIdentifier::Canonicalize(api)];
    a.call_count += calls;
    return *this;
  }

  // API with string arguments, `distinct` of them different.
  TraceBuilder& StringCall(const char* api, std::uint64_t calls,
                           std::uint64_t distinct) {
    auto& a = aggs_[ApiIdentifier::Canonicalize(api)];
    a.call_count += calls;
    a.distinct_string_args =
        std::min(a.call_count, std::max(a.distinct_string_args, distinct));
    std::uint64_t max_len = 0;
    for (std::uint64_t i = 0; i < calls; ++i) {
      const std::uint64_t len = Uniform(rng_, 4, 64);
      max_len = std::max(max_len, len);
      a.sum_string_arg_len += len;
    }
    a.max_string_arg_len = std::max(a.max_string_arg_len, max_len);
    return *this;
  }

  TraceBuilder& StringCall(const char* api) {
    const std::uint32_t calls = Uniform(rng_, lo_, hi_);
    return StringCall(api, calls, Uniform(rng_, 1, calls));
  }

  TraceBuilder& ListCall(const char* api) {
    auto& a = aggs_[ApiIdentifier::Canonicalize(api)];
    const std::uint32_t calls = Uniform(rng_, lo_, hi_);
    a.call_count += calls;
    a.list_return_len_sum += static_cast<std::uint64_t>(calls) * Uniform(rng_, 1, 6);
    return *this;
  }

  // A few properties nearly every script touches.
  TraceBuilder& Background() {
    static constexpr std::array<const char*, 10> kPlain = {
        "window.navigator.useragent",         "window.navigator.platform",
        "window.navigator.language",          "window.navigator.hardwareconcurrency",
        "window.navigator.devicememory",      "window.screen.width",
        "window.screen.height",               "window.screen.colordepth",
        "document.cookie",                    "date.gettimezoneoffset"};
    const std::uint32_t n = Uniform(rng_, 0, 4);
    for (std::uint32_t i = 0; i < n; ++i) {
      Call(kPlain[Uniform(rng_, 0, kPlain.size() - 1)]);
    }
    if (Coin(rng_, 0.3)) Call("window.localstorage");
    if (Coin(rng_, 0.25)) ListCall("window.navigator.languages");
    return *this;
  }

  AggregateMap Take() { return std::move(aggs_); }

 private:
  Rng& rng_;
  std::uint32_t lo_, hi_;
  AggregateMap aggs_;
};

inline constexpr std::array<const char*, 6> kPdfPlugins = {
    "window.navigator.plugins[chrome pdf plugin]",
    "window.navigator.plugins[webkit built-in pdf]",
    "window.navigator.plugins[microsoft edge pdf viewer]",
    "window.navigator.plugins[chrome pdf viewer]",
    "window.navigator.plugins[chromium pdf viewer]",
    "window.navigator.plugins[pdf viewer]"};

inline AggregateMap GenerateAggregates(ProfileKind kind, bool device_variant,
                                       Rng& rng, std::uint32_t lo,
                                       std::uint32_t hi) {
  TraceBuilder b(rng, lo, hi);
  b.Background();
  switch (kind) {
    case ProfileKind::kCanvasFp: {
      b.Call("htmlcanvaselement.getcontext", 1);
      b.StringCall(Coin(rng, 0.8) ? "canvasrenderingcontext2d.filltext"
                                  : "canvasrenderingcontext2d.stroketext");
      b.Call(Coin(rng, 0.7) ? "canvasrenderingcontext2d.fillstyle"
                            : "canvasrenderingcontext2d.strokestyle");
      b.Call("htmlcanvaselement.todataurl", Uniform(rng, 1, 3));
      if (Coin(rng, 0.4)) b.StringCall("canvasrenderingcontext2d.font", 2, 2);
      if (Coin(rng, 0.3)) b.ListCall("window.navigator.plugins");
      if (Coin(rng, 0.3)) b.Call(kPdfPlugins[Uniform(rng, 0, 5)]);
      break;
    }
    case ProfileKind::kCanvasFontFp: {
      const std::uint32_t fonts = Uniform(rng, 21, 120);
      b.StringCall("canvasrenderingcontext2d.font", fonts + Uniform(rng, 0, 20),
                   fonts);
      b.StringCall("canvasrenderingcontext2d.measuretext", Uniform(rng, 21, 300),
                   1);
      if (Coin(rng, 0.5)) b.Call("canvasrenderingcontext2d.filltext", Uniform(rng, 1, 3));
      break;
    }
    case ProfileKind::kWebRtcFp: {
      if (device_variant) {
        b.Call("rtcpeerconnection.createoffer", 1);
        b.Call("rtcpeerconnection.localdescription", Uniform(rng, 1, 2));
        b.Call("rtcpeerconnection.getconfiguration");
        if (Coin(rng, 0.7)) b.Call("rtcpeerconnection.sctp");
        if (Coin(rng, 0.6)) b.Call("rtcpeerconnection.gettransceivers");
        if (Coin(rng, 0.5)) b.Call("rtcpeerconnection.onicecandidateerror");
        if (Coin(rng, 0.5)) b.Call("rtcpeerconnection.tostring");
        if (Coin(rng, 0.5)) b.Call("rtcicecandidate.address");
        if (Coin(rng, 0.6)) b.Call("rtcpeerconnection.addtransceiver");
      } else {
        b.Call("rtcpeerconnection.createdatachannel", Uniform(rng, 1, 2));
        b.Call("rtcpeerconnection.onicecandidate");
        if (Coin(rng, 0.3)) b.Call("rtcpeerconnection.createoffer", 1);
      }
      break;
    }
    case ProfileKind::kAudioFp: {
      if (device_variant) {
        b.Call("audiocontext.destination", Uniform(rng, 1, 2));
        b.Call("audiocontext.sinkid");
        if (Coin(rng, 0.7)) b.Call("audiocontext.onsinkchange");
        if (Coin(rng, 0.6)) b.Call("offlineaudiocontext.hasownproperty");
      } else {
        b.Call("offlineaudiocontext.createoscillator", 1);
        b.Call("offlineaudiocontext.createdynamicscompressor", 1);
        b.Call("offlineaudiocontext.startrendering", 1);
        if (Coin(rng, 0.7)) b.Call("offlineaudiocontext.oncomplete", 1);
      }
      if (Coin(rng, 0.4)) b.Call(kPdfPlugins[Uniform(rng, 0, 5)]);
      break;
    }
    case ProfileKind::kBenignCanvas: {
      switch (Uniform(rng, 0, 3)) {
        case 0:  // chart rendering, exported as image
          b.StringCall("canvasrenderingcontext2d.filltext");
          b.Call("canvasrenderingcontext2d.fillstyle");
          b.Call("htmlcanvaselement.todataurl", 1);
          b.Call("canvasrenderingcontext2d.save");
          b.Call("canvasrenderingcontext2d.restore");
          break;
        case 1:  // interactive canvas
          b.StringCall("canvasrenderingcontext2d.filltext");
          b.Call("canvasrenderingcontext2d.strokestyle");
          b.Call("htmlcanvaselement.todataurl", 1);
          b.Call("htmlcanvaselement.addeventlistener");
          break;
        case 2:  // drawing without extraction
          b.StringCall("canvasrenderingcontext2d.filltext");
          b.Call("canvasrenderingcontext2d.fillstyle");
          if (Coin(rng, 0.5)) b.Call("canvasrenderingcontext2d.getimagedata");
          break;
        default: {  // text layout: many measurements, few fonts
          const std::uint32_t fonts = Uniform(rng, 1, 20);
          b.StringCall("canvasrenderingcontext2d.font", fonts + Uniform(rng, 0, 10), fonts);
          b.StringCall("canvasrenderingcontext2d.measuretext", Uniform(rng, 5, 200), 1);
          b.StringCall("canvasrenderingcontext2d.filltext");
          b.Call("canvasrenderingcontext2d.fillstyle");
          break;
        }
      }
      b.Call("htmlcanvaselement.getcontext", 1);
      break;
    }
    case ProfileKind::kBenignMisc: {
      if (Coin(rng, 0.3)) b.ListCall("window.navigator.plugins");
      if (Coin(rng, 0.05)) b.Call(kPdfPlugins[Uniform(rng, 0, 5)]);
      // At most one half of the WebRTC criterion.
      switch (Uniform(rng, 0, 24)) {
        case 0:
        case 1: b.Call("rtcpeerconnection.createoffer", 1); break;
        case 2: b.Call("rtcpeerconnection.localdescription", 1); break;
        case 3: b.Call("rtcpeerconnection.onicecandidate", 1); break;
        default: break;
      }
      if (Coin(rng, 0.05)) b.Call("webglrenderingcontext.getparameter");
      if (Coin(rng, 0.08)) b.Call("htmlcanvaselement.getcontext", 1);
      break;
    }
  }
  return b.Take();
}

inline FingerprintingLabel ExpectedLabel(ProfileKind kind) {
  FingerprintingLabel l;
  l.canvas = kind == ProfileKind::kCanvasFp;
  l.canvas_font = kind == ProfileKind::kCanvasFontFp;
  l.webrtc = kind == ProfileKind::kWebRtcFp;
  l.audio = kind == ProfileKind::kAudioFp;
  l.any = IsFingerprintingProfile(kind);
  return l;
}

template <class Map>
typename Map::key_type Pick(const Map& weights, Rng& rng) {
  std::vector<typename Map::key_type> keys;
  std::vector<double> w;
  for (const auto& [k, v] : weights) {
    if (v > 0.0) {
      keys.push_back(k);
      w.push_back(v);
    }
  }
  std::discrete_distribution<std::size_t> d(w.begin(), w.end());
  return keys[d(rng)];
}

inline bool HasPositiveWeight(const std::map<ProfileKind, double>& mix) {
  return std::any_of(mix.begin(), mix.end(),
                     [](const auto& kv) { return kv.second > 0.0; });
}

inline std::string SiteName(std::uint32_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "site%05u.com", index + 1);
  return buf;
}

}  // namespace synthgen_internal

// One trace of the given profile. Throws std::logic_error if the heuristics
// disagree with the profile's intended label.
inline ScriptTrace GenerateTrace(ProfileKind kind, bool device_variant,
                                 std::mt19937_64& rng, const Manifest& manifest,
                                 std::uint32_t min_calls = 1,
                                 std::uint32_t max_calls = 6) {
  ScriptTrace t;
  t.aggregates = synthgen_internal::GenerateAggregates(kind, device_variant, rng,
                                                       min_calls, max_calls);
  if (LabelScript(t, manifest) != synthgen_internal::ExpectedLabel(kind)) {
    throw std::logic_error("generated trace contradicts profile " +
                           std::string(ProfileName(kind)));
  }
  return t;
}

inline void ValidateCorpusConfig(const CorpusConfig& cfg) {
  using synthgen_internal::HasPositiveWeight;
  if (cfg.n_sites < 1) throw Error(ErrorCode::kConfig, "n_sites must be >= 1");
  if (!(cfg.fp_site_fraction >= 0.0 && cfg.fp_site_fraction <= 1.0) ||
      !(cfg.device_variant_fraction >= 0.0 && cfg.device_variant_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "fractions must be in [0, 1]");
  }
  if (cfg.fp_site_fraction > 0.0 && !HasPositiveWeight(cfg.fp_mix)) {
    throw Error(ErrorCode::kConfig, "fingerprinting sites requested with an empty fp profile mix");
  }
  for (const auto& [k, w] : cfg.fp_mix) {
    if (!IsFingerprintingProfile(k) || w < 0.0) {
      throw Error(ErrorCode::kConfig, "fp_mix may only weight fingerprinting profiles");
    }
  }
  for (const auto& [k, w] : cfg.benign_mix) {
    if (IsFingerprintingProfile(k) || w < 0.0) {
      throw Error(ErrorCode::kConfig, "benign_mix may only weight benign profiles");
    }
  }
  if (cfg.scripts_per_site > 0 && !HasPositiveWeight(cfg.benign_mix)) {
    throw Error(ErrorCode::kConfig, "empty benign profile mix");
  }
  if (cfg.categories.empty()) throw Error(ErrorCode::kConfig, "no categories");
  if (cfg.min_fp_scripts_per_site < 1 ||
      cfg.max_fp_scripts_per_site < cfg.min_fp_scripts_per_site) {
    throw Error(ErrorCode::kConfig, "invalid fp scripts per site range");
  }
  if (std::all_of(cfg.fp_page_weights.begin(), cfg.fp_page_weights.end(),
                  [](double w) { return w <= 0.0; })) {
    throw Error(ErrorCode::kConfig, "fp_page_weights must have a positive entry");
  }
}

// Sites are ranked 1..n_sites with round-robin categories and three pages
// each (home, content, auth). Exactly round(fp_site_fraction * n_sites) sites
// host fingerprinting. Every site is generated from its own sub-seed.
inline Corpus GenerateCorpus(const CorpusConfig& cfg, std::uint64_t seed,
                             const Manifest& manifest = Manifest::Default()) {
  using namespace synthgen_internal;
  ValidateCorpusConfig(cfg);
  Corpus c;
  c.label = cfg.label;
  const auto n_fp = static_cast<std::uint32_t>(
      std::llround(cfg.fp_site_fraction * cfg.n_sites));
  std::vector<std::uint32_t> order(cfg.n_sites);
  std::iota(order.begin(), order.end(), 0u);
  {
    Rng rng(DeriveSeed(seed, 0xF9u));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<bool> is_fp(cfg.n_sites, false);
  for (std::uint32_t i = 0; i < n_fp; ++i) is_fp[order[i]] = true;

  for (std::uint32_t i = 0; i < cfg.n_sites; ++i) {
    Rng rng(DeriveSeed(seed, 0x100u + i));
    WebsiteRecord w;
    w.site = SiteName(i);
    w.rank = i + 1;
    w.category = cfg.categories[i % cfg.categories.size()];
    const std::string origin = "https://www." + w.site;
    const std::array<std::string, 3> pages = {
        origin + "/", origin + "/article/" + std::to_string(Uniform(rng, 1, 999)),
        origin + "/login"};
    w.pages.assign(pages.begin(), pages.end());
    w.http_status = 200;

    std::uint32_t fp_scripts = 0;
    std::size_t fp_page = 0;
    if (is_fp[i]) {
      fp_scripts = Uniform(rng, cfg.min_fp_scripts_per_site, cfg.max_fp_scripts_per_site);
      std::discrete_distribution<std::size_t> page_dist(cfg.fp_page_weights.begin(),
                                                        cfg.fp_page_weights.end());
      fp_page = page_dist(rng);
    }
    const std::uint32_t total = std::max(cfg.scripts_per_site, fp_scripts);
    for (std::uint32_t s = 0; s < total; ++s) {
      const bool fp = s < fp_scripts;
      const ProfileKind kind = fp ? Pick(cfg.fp_mix, rng) : Pick(cfg.benign_mix, rng);
      const bool variant =
          (kind == ProfileKind::kAudioFp || kind == ProfileKind::kWebRtcFp) &&
          Coin(rng, cfg.device_variant_fraction);
      ScriptTrace t = GenerateTrace(kind, variant, rng, manifest, cfg.min_calls,
                                    cfg.max_calls);
      t.site = w.site;
      t.page_url = fp ? pages[fp_page] : pages[Uniform(rng, 0, 2)];
      t.frame_depth = Coin(rng, 0.15) ? 1 : 0;
      t.script_id = ToHex64(Fnv1a64(w.site + "#" + std::to_string(s) + "#" +
                                    std::to_string(seed))) +
                    ToHex64(Mix64(rng()));
      t.script_url = "https://cdn" + std::to_string(Uniform(rng, 1, 40)) +
                     ".example.net/" + t.script_id.substr(0, 8) + ".js";
      c.traces.push_back(std::move(t));
    }
    c.websites.push_back(std::move(w));
  }
  c.traces = MergeTraces(std::move(c.traces));
  return c;
}

// Crawl-like view of `real`: never adds traces and never alters retained
// ones, apart from the Failed sites' website records.
inline Corpus DeriveCrawlCorpus(const Corpus& real, const SuppressionPolicy& policy,
                                std::uint64_t seed,
                                const Manifest& manifest = Manifest::Default()) {
  using synthgen_internal::Coin;
  policy.Validate();
  Corpus crawl;
  crawl.label = "crawl";
  crawl.websites = real.websites;
  const std::set<std::string> fp_sites = FingerprintingSites(real, manifest);

  std::set<std::string> failed;
  std::map<std::string, std::array<bool, 3>> suppressed;  // home, content, auth
  for (const auto& site : fp_sites) {
    std::mt19937_64 rng(DeriveSeed(seed, Fnv1a64(site)));
    if (Coin(rng, policy.failed_fraction)) {
      failed.insert(site);
      continue;
    }
    auto& s = suppressed[site];
    s[0] = Coin(rng, policy.home_fraction);
    s[1] = Coin(rng, policy.content_fraction);
    s[2] = Coin(rng, policy.auth_fraction);
  }
  for (auto& w : crawl.websites) {
    if (failed.contains(w.site)) {
      w.http_status = 403;
      w.pages.clear();
    }
  }
  const std::set<ApiIdentifier> gated(policy.device_gated_apis.begin(),
                                      policy.device_gated_apis.end());
  WebsiteRecord visited;
  visited.pages = {"/"};
  for (const auto& t : real.traces) {
    if (failed.contains(t.site)) continue;
    if (!fp_sites.contains(t.site) || !LabelScript(t, manifest).any) {
      crawl.traces.push_back(t);
      continue;
    }
    const bool device_gated = std::any_of(
        t.aggregates.begin(), t.aggregates.end(),
        [&](const auto& kv) { return gated.contains(kv.first); });
    if (device_gated) continue;
    const MissReason kind = ClassifySubpage(t.page_url, 200, &visited).reason;
    const auto& s = suppressed[t.site];
    const bool drop = (kind == MissReason::kHome && s[0]) ||
                      (kind == MissReason::kContent && s[1]) ||
                      (kind == MissReason::kAuth && s[2]);
    if (!drop) crawl.traces.push_back(t);
  }
  return crawl;
}

// ---------------------------------------------------------------------------
// JSON configuration

inline Json CorpusConfigToJson(const CorpusConfig& c) {
  Json fp = Json::object(), benign = Json::object();
  for (const auto& [k, w] : c.fp_mix) fp[std::string(ProfileName(k))] = w;
  for (const auto& [k, w] : c.benign_mix) benign[std::string(ProfileName(k))] = w;
  return Json{{"label", c.label},
              {"n_sites", c.n_sites},
              {"scripts_per_site", c.scripts_per_site},
              {"fp_site_fraction", c.fp_site_fraction},
              {"min_fp_scripts_per_site", c.min_fp_scripts_per_site},
              {"max_fp_scripts_per_site", c.max_fp_scripts_per_site},
              {"fp_mix", fp},
              {"benign_mix", benign},
              {"device_variant_fraction", c.device_variant_fraction},
              {"fp_page_weights", c.fp_page_weights},
              {"min_calls", c.min_calls},
              {"max_calls", c.max_calls},
              {"categories", c.categories}};
}

inline void CorpusConfigFromJson(const Json& j, CorpusConfig& c) {
  try {
    c.label = j.value("label", c.label);
    c.n_sites = j.value("n_sites", c.n_sites);
    c.scripts_per_site = j.value("scripts_per_site", c.scripts_per_site);
    c.fp_site_fraction = j.value("fp_site_fraction", c.fp_site_fraction);
    c.min_fp_scripts_per_site = j.value("min_fp_scripts_per_site", c.min_fp_scripts_per_site);
    c.max_fp_scripts_per_site = j.value("max_fp_scripts_per_site", c.max_fp_scripts_per_site);
    auto read_mix = [&](const char* key, std::map<ProfileKind, double>& mix) {
      if (!j.contains(key)) return;
      mix.clear();
      for (const auto& [name, w] : j.at(key).items()) mix[ParseProfile(name)] = w.get<double>();
    };
    read_mix("fp_mix", c.fp_mix);
    read_mix("benign_mix", c.benign_mix);
    c.device_variant_fraction = j.value("device_variant_fraction", c.device_variant_fraction);
    if (j.contains("fp_page_weights")) {
      c.fp_page_weights = j.at("fp_page_weights").get<std::array<double, 3>>();
    }
    c.min_calls = j.value("min_calls", c.min_calls);
    c.max_calls = j.value("max_calls", c.max_calls);
    if (j.contains("categories")) c.categories = j.at("categories").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed corpus config: ") + e.what());
  }
}

inline Json SuppressionPolicyToJson(const SuppressionPolicy& p) {
  Json gated = Json::array();
  for (const auto& id : p.device_gated_apis) gated.push_back(id.str());
  return Json{{"failed_fraction", p.failed_fraction},
              {"auth_fraction", p.auth_fraction},
              {"content_fraction", p.content_fraction},
              {"home_fraction", p.home_fraction},
              {"device_gated_apis", gated}};
}

inline void SuppressionPolicyFromJson(const Json& j, SuppressionPolicy& p) {
  try {
    p.failed_fraction = j.value("failed_fraction", p.failed_fraction);
    p.auth_fraction = j.value("auth_fraction", p.auth_fraction);
    p.content_fraction = j.value("content_fraction", p.content_fraction);
    p.home_fraction = j.value("home_fraction", p.home_fraction);
    if (j.contains("device_gated_apis")) {
      p.device_gated_apis.clear();
      for (const auto& a : j.at("device_gated_apis")) {
        p.device_gated_apis.push_back(ApiIdentifier::Canonicalize(a.get<std::string>()));
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed suppression policy: ") + e.what());
  }
  p.Validate();
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_SYNTHGEN_HPP_
