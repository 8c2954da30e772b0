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

// The monitored-API manifest: which canonical APIs feed each heuristic
// signal, the full monitored vocabulary used for call-count features, and
// which custom aggregates are exposed as additional features. The same JSON
// document is consumed by the instrumentation.

#ifndef FPSENTINEL_MANIFEST_HPP_
#define FPSENTINEL_MANIFEST_HPP_

#include <array>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "fpsentinel/common.hpp"
#include "fpsentinel/telemetry.hpp"
#include "json.hpp"

namespace fpsentinel {

enum class CustomField {
  kDistinctStringArgs,
  kMaxStringArgLen,
  kSumStringArgLen,
  kListReturnLenSum,
};

inline std::string_view CustomFieldName(CustomField f) {
  switch (f) {
    case CustomField::kDistinctStringArgs: return "distinct_str_args";
    case CustomField::kMaxStringArgLen: return "max_str_len";
    case CustomField::kSumStringArgLen: return "sum_str_len";
    case CustomField::kListReturnLenSum: return "list_ret_len_sum";
  }
  return "";
}

inline CustomField ParseCustomField(std::string_view name) {
  for (CustomField f :
       {CustomField::kDistinctStringArgs, CustomField::kMaxStringArgLen,
        CustomField::kSumStringArgLen, CustomField::kListReturnLenSum}) {
    if (CustomFieldName(f) == name) return f;
  }
  throw Error(ErrorCode::kConfig,
              "unknown custom feature field: " + std::string(name));
}

inline std::uint64_t CustomFieldValue(const ApiCallAggregate& agg,
                                      CustomField f) {
  switch (f) {
    case CustomField::kDistinctStringArgs: return agg.distinct_string_args;
    case CustomField::kMaxStringArgLen: return agg.max_string_arg_len;
    case CustomField::kSumStringArgLen: return agg.sum_string_arg_len;
    case CustomField::kListReturnLenSum: return agg.list_return_len_sum;
  }
  return 0;
}

struct CustomFeatureSpec {
  ApiIdentifier api;
  CustomField field;
};

struct SignalApis {
  std::vector<ApiIdentifier> canvas_text;           // fillText / strokeText
  std::vector<ApiIdentifier> canvas_style;          // fillStyle / strokeStyle
  std::vector<ApiIdentifier> canvas_to_data_url;
  std::vector<ApiIdentifier> canvas_save_restore_listener;
  std::vector<ApiIdentifier> canvas_font_setter;
  std::vector<ApiIdentifier> canvas_measure_text;
  std::vector<ApiIdentifier> webrtc_channel_or_offer;
  std::vector<ApiIdentifier> webrtc_candidate_or_localdesc;
  std::vector<ApiIdentifier> audio;
};

struct Manifest {
  int version = 1;
  SignalApis signals;
  std::vector<ApiIdentifier> monitored;
  std::vector<CustomFeatureSpec> custom_features;

  static Manifest Default();
};

namespace manifest_internal {

using SignalField = std::vector<ApiIdentifier> SignalApis::*;

inline constexpr std::array<std::pair<std::string_view, SignalField>, 9>
    kSignalFields = {{
        {"canvas_text_written", &SignalApis::canvas_text},
        {"canvas_style_set", &SignalApis::canvas_style},
        {"canvas_to_data_url", &SignalApis::canvas_to_data_url},
        {"canvas_save_restore_listener",
         &SignalApis::canvas_save_restore_listener},
        {"canvas_font_setter", &SignalApis::canvas_font_setter},
        {"canvas_measure_text", &SignalApis::canvas_measure_text},
        {"webrtc_channel_or_offer", &SignalApis::webrtc_channel_or_offer},
        {"webrtc_candidate_or_localdesc",
         &SignalApis::webrtc_candidate_or_localdesc},
        {"audio_api_called", &SignalApis::audio},
    }};

inline std::vector<ApiIdentifier> Ids(std::initializer_list<const char*> names) {
  std::vector<ApiIdentifier> out;
  for (const char* n : names) out.push_back(ApiIdentifier::Canonicalize(n));
  return out;
}

}  // namespace manifest_internal

inline Manifest Manifest::Default() {
  using manifest_internal::Ids;
  Manifest m;
  m.signals.canvas_text = Ids({"canvasrenderingcontext2d.filltext",
                               "canvasrenderingcontext2d.stroketext"});
  m.signals.canvas_style = Ids({"canvasrenderingcontext2d.fillstyle",
                                "canvasrenderingcontext2d.strokestyle"});
  m.signals.canvas_to_data_url = Ids({"htmlcanvaselement.todataurl"});
  m.signals.canvas_save_restore_listener =
      Ids({"canvasrenderingcontext2d.save", "canvasrenderingcontext2d.restore",
           "htmlcanvaselement.addeventlistener"});
  m.signals.canvas_font_setter = Ids({"canvasrenderingcontext2d.font"});
  m.signals.canvas_measure_text = Ids({"canvasrenderingcontext2d.measuretext"});
  m.signals.webrtc_channel_or_offer =
      Ids({"rtcpeerconnection.createdatachannel",
           "rtcpeerconnection.createoffer"});
  m.signals.webrtc_candidate_or_localdesc =
      Ids({"rtcpeerconnection.onicecandidate",
           "rtcpeerconnection.localdescription"});
  m.signals.audio = Ids({"audiocontext.createoscillator",
                         "offlineaudiocontext.createoscillator",
                         "audiocontext.createdynamicscompressor",
                         "offlineaudiocontext.createdynamicscompressor",
                         "audiocontext.destination",
                         "offlineaudiocontext.destination",
                         "offlineaudiocontext.startrendering",
                         "offlineaudiocontext.oncomplete"});
  for (const auto& [name, field] : manifest_internal::kSignalFields) {
    for (const auto& id : m.signals.*field) m.monitored.push_back(id);
  }
  for (auto& id : Ids({
           "audiocontext.sinkid",
           "audiocontext.onsinkchange",
           "offlineaudiocontext.hasownproperty",
           "rtcpeerconnection.getconfiguration",
           "rtcpeerconnection.sctp",
           "rtcpeerconnection.gettransceivers",
           "rtcpeerconnection.onicecandidateerror",
           "rtcpeerconnection.tostring",
           "rtcpeerconnection.addtransceiver",
           "rtcicecandidate.address",
           "window.navigator.plugins",
           "window.navigator.plugins[chrome pdf plugin]",
           "window.navigator.plugins[webkit built-in pdf]",
           "window.navigator.plugins[microsoft edge pdf viewer]",
           "window.navigator.plugins[chrome pdf viewer]",
           "window.navigator.plugins[chromium pdf viewer]",
           "window.navigator.plugins[pdf viewer]",
           "window.navigator.useragent",
           "window.navigator.platform",
           "window.navigator.language",
           "window.navigator.languages",
           "window.navigator.hardwareconcurrency",
           "window.navigator.devicememory",
           "window.screen.width",
           "window.screen.height",
           "window.screen.colordepth",
           "htmlcanvaselement.getcontext",
           "canvasrenderingcontext2d.getimagedata",
           "webglrenderingcontext.getparameter",
           "date.gettimezoneoffset",
           "document.cookie",
           "window.localstorage",
       })) {
    m.monitored.push_back(std::move(id));
  }
  auto spec = [](const char* api, CustomField f) {
    return CustomFeatureSpec{ApiIdentifier::Canonicalize(api), f};
  };
  m.custom_features = {
      spec("canvasrenderingcontext2d.font", CustomField::kDistinctStringArgs),
      spec("canvasrenderingcontext2d.filltext", CustomField::kMaxStringArgLen),
      spec("canvasrenderingcontext2d.filltext", CustomField::kSumStringArgLen),
      spec("canvasrenderingcontext2d.measuretext",
           CustomField::kSumStringArgLen),
      spec("window.navigator.plugins", CustomField::kListReturnLenSum),
      spec("window.navigator.languages", CustomField::kListReturnLenSum),
  };
  return m;
}

inline Json ManifestToJson(const Manifest& m) {
  Json signals = Json::object();
  for (const auto& [name, field] : manifest_internal::kSignalFields) {
    Json list = Json::array();
    for (const auto& id : m.signals.*field) list.push_back(id.str());
    signals[std::string(name)] = std::move(list);
  }
  Json monitored = Json::array();
  for (const auto& id : m.monitored) monitored.push_back(id.str());
  Json custom = Json::array();
  for (const auto& c : m.custom_features) {
    custom.push_back({{"api", c.api.str()}, {"field", CustomFieldName(c.field)}});
  }
  return Json{{"format", "fp-manifest"},
              {"version", m.version},
              {"signals", std::move(signals)},
              {"monitored_apis", std::move(monitored)},
              {"custom_features", std::move(custom)}};
}

// Signals absent from the document keep an empty API list. Duplicates are
// not rejected here; BuildVocabulary reports them.
inline Manifest ManifestFromJson(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "manifest must be an object");
  if (j.value("version", 1) != 1) {
    throw Error(ErrorCode::kVersion, "unsupported manifest version");
  }
  Manifest m;
  try {
    if (j.contains("signals")) {
      const Json& s = j.at("signals");
      for (const auto& [name, field] : manifest_internal::kSignalFields) {
        const auto it = s.find(std::string(name));
        if (it == s.end()) continue;
        for (const auto& api : *it) {
          (m.signals.*field).push_back(
              ApiIdentifier::Canonicalize(api.get<std::string>()));
        }
      }
    }
    for (const auto& api : j.value("monitored_apis", Json::array())) {
      m.monitored.push_back(ApiIdentifier::Canonicalize(api.get<std::string>()));
    }
    for (const auto& c : j.value("custom_features", Json::array())) {
      m.custom_features.push_back(
          {ApiIdentifier::Canonicalize(c.at("api").get<std::string>()),
           ParseCustomField(c.at("field").get<std::string>())});
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

inline Manifest LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open manifest " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  return ManifestFromJson(j);
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_MANIFEST_HPP_
