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

// High-precision fingerprinting heuristics (Canvas, Canvas Font, WebRTC,
// AudioContext) evaluated over merged script traces.
//
//   Canvas:      text written AND style set AND toDataURL called AND none of
//                save/restore/addEventListener called.
//   Canvas Font: font set to more than 20 distinct values AND measureText
//                called more than 20 times.
//   WebRTC:      (createDataChannel OR createOffer) AND
//                (onicecandidate OR localDescription).
//   Audio:       any of createOscillator, createDynamicsCompressor,
//                destination, startRendering, oncomplete.

#ifndef FPSENTINEL_HEURISTICS_HPP_
#define FPSENTINEL_HEURISTICS_HPP_

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fpsentinel/common.hpp"
#include "fpsentinel/manifest.hpp"
#include "fpsentinel/telemetry.hpp"

namespace fpsentinel {

inline constexpr std::uint64_t kCanvasFontMinDistinctFonts = 20;  // exclusive
inline constexpr std::uint64_t kCanvasFontMinMeasureText = 20;    // exclusive

struct HeuristicSignals {
  bool canvas_text_written = false;
  bool canvas_style_set = false;
  bool canvas_to_data_url = false;
  bool canvas_save_restore_listener = false;
  std::uint64_t canvas_distinct_fonts = 0;
  std::uint64_t canvas_measure_text_calls = 0;
  bool webrtc_channel_or_offer = false;
  bool webrtc_candidate_or_localdesc = false;
  bool audio_api_called = false;

  friend bool operator==(const HeuristicSignals&,
                         const HeuristicSignals&) = default;
};

struct FingerprintingLabel {
  bool canvas = false;
  bool canvas_font = false;
  bool webrtc = false;
  bool audio = false;
  bool any = false;

  friend bool operator==(const FingerprintingLabel&,
                         const FingerprintingLabel&) = default;
};

namespace heuristics_internal {

inline bool AnyCalled(const AggregateMap& aggs,
                      const std::vector<ApiIdentifier>& apis) {
  return std::any_of(apis.begin(), apis.end(), [&](const ApiIdentifier& id) {
    const auto it = aggs.find(id);
    return it != aggs.end() && it->second.call_count >= 1;
  });
}

}  // namespace heuristics_internal

inline HeuristicSignals ExtractSignals(const ScriptTrace& trace,
                                       const Manifest& manifest) {
  using heuristics_internal::AnyCalled;
  const auto& aggs = trace.aggregates;
  const auto& sig = manifest.signals;
  HeuristicSignals s;
  s.canvas_text_written = AnyCalled(aggs, sig.canvas_text);
  s.canvas_style_set = AnyCalled(aggs, sig.canvas_style);
  s.canvas_to_data_url = AnyCalled(aggs, sig.canvas_to_data_url);
  s.canvas_save_restore_listener =
      AnyCalled(aggs, sig.canvas_save_restore_listener);
  for (const auto& id : sig.canvas_font_setter) {
    if (const auto it = aggs.find(id); it != aggs.end()) {
      s.canvas_distinct_fonts =
          std::max(s.canvas_distinct_fonts, it->second.distinct_string_args);
    }
  }
  for (const auto& id : sig.canvas_measure_text) {
    if (const auto it = aggs.find(id); it != aggs.end()) {
      s.canvas_measure_text_calls += it->second.call_count;
    }
  }
  s.webrtc_channel_or_offer = AnyCalled(aggs, sig.webrtc_channel_or_offer);
  s.webrtc_candidate_or_localdesc =
      AnyCalled(aggs, sig.webrtc_candidate_or_localdesc);
  s.audio_api_called = AnyCalled(aggs, sig.audio);
  return s;
}

inline bool DetectCanvas(const HeuristicSignals& s) {
  return s.canvas_text_written && s.canvas_style_set && s.canvas_to_data_url &&
         !s.canvas_save_restore_listener;
}

inline bool DetectCanvasFont(const HeuristicSignals& s) {
  return s.canvas_distinct_fonts > kCanvasFontMinDistinctFonts &&
         s.canvas_measure_text_calls > kCanvasFontMinMeasureText;
}

inline bool DetectWebRtc(const HeuristicSignals& s) {
  return s.webrtc_channel_or_offer && s.webrtc_candidate_or_localdesc;
}

inline bool DetectAudio(const HeuristicSignals& s) { return s.audio_api_called; }

inline FingerprintingLabel LabelSignals(const HeuristicSignals& s) {
  FingerprintingLabel l;
  l.canvas = DetectCanvas(s);
  l.canvas_font = DetectCanvasFont(s);
  l.webrtc = DetectWebRtc(s);
  l.audio = DetectAudio(s);
  l.any = l.canvas || l.canvas_font || l.webrtc || l.audio;
  return l;
}

inline FingerprintingLabel LabelScript(const ScriptTrace& trace,
                                       const Manifest& manifest) {
  return LabelSignals(ExtractSignals(trace, manifest));
}

// Labels aligned with corpus.traces.
inline std::vector<FingerprintingLabel> LabelCorpus(const Corpus& corpus,
                                                    const Manifest& manifest) {
  std::vector<FingerprintingLabel> out;
  out.reserve(corpus.traces.size());
  for (const auto& t : corpus.traces) out.push_back(LabelScript(t, manifest));
  return out;
}

inline bool LabelWebsite(const Corpus& corpus, std::string_view site,
                         const Manifest& manifest) {
  if (corpus.FindWebsite(site) == nullptr) {
    throw Error(ErrorCode::kNotFound, "unknown site: " + std::string(site));
  }
  return std::any_of(corpus.traces.begin(), corpus.traces.end(),
                     [&](const ScriptTrace& t) {
                       return t.site == site && LabelScript(t, manifest).any;
                     });
}

// All sites with at least one fingerprinting trace; one pass over traces.
inline std::set<std::string> FingerprintingSites(const Corpus& corpus,
                                                 const Manifest& manifest) {
  std::set<std::string> out;
  for (const auto& t : corpus.traces) {
    if (!out.contains(t.site) && LabelScript(t, manifest).any) {
      out.insert(t.site);
    }
  }
  return out;
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_HEURISTICS_HPP_
