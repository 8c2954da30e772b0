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

#ifndef FPSENTINEL_FEATURES_HPP_
#define FPSENTINEL_FEATURES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "fpsentinel/accountant.hpp"
#include "fpsentinel/common.hpp"
#include "fpsentinel/heuristics.hpp"
#include "fpsentinel/manifest.hpp"
#include "fpsentinel/telemetry.hpp"
#include "json.hpp"

namespace fpsentinel {

inline constexpr double kScaleFloor = 1e-6;

enum class FeatureKind { kCallCount = 0, kCustom = 1 };

struct FeatureDescriptor {
  FeatureKind kind = FeatureKind::kCallCount;
  ApiIdentifier api;
  std::optional<CustomField> field;

  auto order_key() const {
    return std::make_tuple(static_cast<int>(kind), api.str(),
                           field ? static_cast<int>(*field) + 1 : 0);
  }
  friend bool operator==(const FeatureDescriptor& a,
                         const FeatureDescriptor& b) {
    return a.order_key() == b.order_key();
  }
};

class FeatureVocabulary {
 public:
  FeatureVocabulary() = default;

  // Sorts into canonical order (kind, api, field). Duplicates are a config
  // error.
  explicit FeatureVocabulary(std::vector<FeatureDescriptor> entries)
      : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const FeatureDescriptor& a, const FeatureDescriptor& b) {
                return a.order_key() < b.order_key();
              });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      if (entries_[i] == entries_[i - 1]) {
        throw Error(ErrorCode::kConfig,
                    "duplicate feature descriptor: " + entries_[i].api.str());
      }
    }
    if (entries_.empty()) {
      throw Error(ErrorCode::kConfig, "empty feature vocabulary");
    }
  }

  std::size_t dimension() const noexcept { return entries_.size(); }
  const std::vector<FeatureDescriptor>& entries() const noexcept {
    return entries_;
  }

  std::optional<std::size_t> IndexOf(const FeatureDescriptor& d) const {
    const auto it = std::lower_bound(
        entries_.begin(), entries_.end(), d,
        [](const FeatureDescriptor& a, const FeatureDescriptor& b) {
          return a.order_key() < b.order_key();
        });
    if (it == entries_.end() || !(*it == d)) return std::nullopt;
    return static_cast<std::size_t>(it - entries_.begin());
  }

  // Stable content hash of the canonical entry list.
  std::string Hash() const {
    std::string repr;
    for (const auto& e : entries_) {
      repr += e.kind == FeatureKind::kCallCount ? "c:" : "x:";
      repr += e.api.str();
      if (e.field) {
        repr += '#';
        repr += CustomFieldName(*e.field);
      }
      repr += '\n';
    }
    return ToHex64(Fnv1a64(repr));
  }

 private:
  std::vector<FeatureDescriptor> entries_;
};

inline FeatureVocabulary BuildVocabulary(const Manifest& manifest) {
  std::vector<FeatureDescriptor> entries;
  for (const auto& api : manifest.monitored) {
    entries.push_back({FeatureKind::kCallCount, api, std::nullopt});
  }
  for (const auto& c : manifest.custom_features) {
    entries.push_back({FeatureKind::kCustom, c.api, c.field});
  }
  return FeatureVocabulary(std::move(entries));
}

inline Json VocabularyToJson(const FeatureVocabulary& vocab) {
  Json entries = Json::array();
  for (const auto& e : vocab.entries()) {
    Json j{{"kind", e.kind == FeatureKind::kCallCount ? "call_count" : "custom"},
           {"api", e.api.str()}};
    if (e.field) j["field"] = CustomFieldName(*e.field);
    entries.push_back(std::move(j));
  }
  return Json{{"format", "fp-vocabulary"},
              {"version", 1},
              {"hash", vocab.Hash()},
              {"entries", std::move(entries)}};
}

inline FeatureVocabulary VocabularyFromJson(const Json& j) {
  if (j.value("format", "") != "fp-vocabulary" || j.value("version", 0) != 1) {
    throw Error(ErrorCode::kVersion, "not an fp-vocabulary v1 document");
  }
  std::vector<FeatureDescriptor> entries;
  for (const auto& e : j.at("entries")) {
    FeatureDescriptor d;
    d.kind = e.at("kind").get<std::string>() == "custom" ? FeatureKind::kCustom
                                                         : FeatureKind::kCallCount;
    d.api = ApiIdentifier::Canonicalize(e.at("api").get<std::string>());
    if (e.contains("field")) d.field = ParseCustomField(e.at("field").get<std::string>());
    entries.push_back(std::move(d));
  }
  FeatureVocabulary vocab(std::move(entries));
  if (j.contains("hash") && j["hash"].get<std::string>() != vocab.Hash()) {
    throw Error(ErrorCode::kValidation, "vocabulary hash mismatch");
  }
  return vocab;
}

struct FeatureVector {
  std::vector<double> values;
  bool label = false;
  std::string script_id;
  std::string site;
};

// Projection of the aggregate map onto the vocabulary; APIs outside the
// vocabulary contribute nothing.
inline FeatureVector ExtractFeatures(const ScriptTrace& trace,
                                     const FeatureVocabulary& vocab,
                                     bool label) {
  FeatureVector v;
  v.values.assign(vocab.dimension(), 0.0);
  v.label = label;
  v.script_id = trace.script_id;
  v.site = trace.site;
  const auto& entries = vocab.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto it = trace.aggregates.find(entries[i].api);
    if (it == trace.aggregates.end()) continue;
    v.values[i] = entries[i].kind == FeatureKind::kCallCount
                      ? static_cast<double>(it->second.call_count)
                      : static_cast<double>(
                            CustomFieldValue(it->second, *entries[i].field));
  }
  return v;
}

// Labels every trace with the heuristics and extracts its vector, in trace
// order.
inline std::vector<FeatureVector> ExtractCorpusFeatures(
    const Corpus& corpus, const FeatureVocabulary& vocab,
    const Manifest& manifest) {
  std::vector<FeatureVector> out;
  out.reserve(corpus.traces.size());
  for (const auto& t : corpus.traces) {
    out.push_back(ExtractFeatures(t, vocab, LabelScript(t, manifest).any));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> scale;
  double clip_bound = 1.0;
  double noise_multiplier = 0.0;
  double epsilon_spent = 0.0;
};

// What one client releases to the normalization aggregator.
struct ClientFeatureSummary {
  std::vector<double> sum;     // per feature, values clipped to clip_bound
  std::vector<double> sum_sq;  // per feature, squares of the clipped values
  double count = 0.0;
};

inline double ClipValue(double v, double clip_bound) {
  return std::clamp(v, -clip_bound, clip_bound);
}

inline ClientFeatureSummary SummarizeClient(
    std::span<const FeatureVector> vectors, std::size_t dimension,
    double clip_bound) {
  ClientFeatureSummary s;
  s.sum.assign(dimension, 0.0);
  s.sum_sq.assign(dimension, 0.0);
  for (const auto& v : vectors) {
    if (v.values.size() != dimension) {
      throw Error(ErrorCode::kDimension, "feature dimension mismatch");
    }
    for (std::size_t i = 0; i < dimension; ++i) {
      const double c = ClipValue(v.values[i], clip_bound);
      s.sum[i] += c;
      s.sum_sq[i] += c * c;
    }
    s.count += 1.0;
  }
  return s;
}

// Central-DP estimate of per-feature mean and standard deviation from client
// summaries. Gaussian noise is added to the pooled sums with standard
// deviation sigma*C (sums), sigma*C^2 (sums of squares) and sigma (count).
// Adding or removing one example moves the sum vector by at most C*sqrt(d)
// in L2, the square-sum vector by C^2*sqrt(d) and the count by 1, so the
// three releases compose to one Gaussian release with noise multiplier
// sigma / sqrt(2d + 1); epsilon_spent is accounted at `delta` on that basis
// (example-level neighbouring datasets).
inline NormalizationStats DpFederatedNormalize(
    std::span<const ClientFeatureSummary> clients, double clip_bound,
    double noise_multiplier, std::uint64_t seed,
    double delta = kDefaultDelta) {
  if (clients.empty()) {
    throw Error(ErrorCode::kValidation, "no client summaries");
  }
  if (!(clip_bound > 0.0)) throw Error(ErrorCode::kConfig, "clip_bound must be > 0");
  if (noise_multiplier < 0.0 || !std::isfinite(noise_multiplier)) {
    throw Error(ErrorCode::kConfig, "noise_multiplier must be >= 0");
  }
  const std::size_t d = clients.front().sum.size();
  std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
  double count = 0.0;
  for (const auto& c : clients) {
    if (c.sum.size() != d || c.sum_sq.size() != d) {
      throw Error(ErrorCode::kDimension, "client summary dimension mismatch");
    }
    for (std::size_t i = 0; i < d; ++i) {
      sum[i] += c.sum[i];
      sum_sq[i] += c.sum_sq[i];
    }
    count += c.count;
  }
  if (noise_multiplier > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < d; ++i) {
      sum[i] += noise_multiplier * clip_bound * normal(rng);
    }
    for (std::size_t i = 0; i < d; ++i) {
      sum_sq[i] += noise_multiplier * clip_bound * clip_bound * normal(rng);
    }
    count += noise_multiplier * normal(rng);
  }
  const double n = std::max(count, 1.0);
  // Variance estimates below three noise standard deviations (sigma*C^2/n)
  // are indistinguishable from zero; flooring there keeps the noise from
  // driving a scale to kScaleFloor.
  const double var_floor =
      3.0 * noise_multiplier * clip_bound * clip_bound / n;
  NormalizationStats stats;
  stats.mean.resize(d);
  stats.scale.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = sum[i] / n;
    const double var = sum_sq[i] / n - mean * mean;
    stats.mean[i] = mean;
    const double floored = noise_multiplier > 0.0 ? std::max(var, var_floor) : var;
    stats.scale[i] = std::max(std::sqrt(std::max(floored, 0.0)), kScaleFloor);
  }
  stats.clip_bound = clip_bound;
  stats.noise_multiplier = noise_multiplier;
  stats.epsilon_spent = ComputeEpsilon(
      noise_multiplier / std::sqrt(2.0 * static_cast<double>(d) + 1.0), 1.0, 1,
      delta);
  return stats;
}

// Non-private pooled statistics, for public data.
inline NormalizationStats ExactNormalization(
    std::span<const FeatureVector> vectors, std::size_t dimension) {
  const double inf = std::numeric_limits<double>::infinity();
  const ClientFeatureSummary s = SummarizeClient(vectors, dimension, inf);
  NormalizationStats stats = DpFederatedNormalize(
      std::span<const ClientFeatureSummary>(&s, 1), inf, 0.0, 0);
  stats.clip_bound = inf;
  return stats;
}

// Percentile of the nonzero feature values in a (public) dataset; 1.0 when
// there are none.
inline double PercentileClipBound(std::span<const FeatureVector> vectors,
                                  double percentile = 0.99) {
  std::vector<double> values;
  for (const auto& v : vectors) {
    for (double x : v.values) {
      if (x != 0.0) values.push_back(std::abs(x));
    }
  }
  if (values.empty()) return 1.0;
  const std::size_t k = std::min(
      values.size() - 1,
      static_cast<std::size_t>(std::ceil(percentile * values.size())) - 1);
  std::nth_element(values.begin(), values.begin() + k, values.end());
  return std::max(values[k], kScaleFloor);
}

inline FeatureVector ApplyNormalization(const FeatureVector& v,
                                        const NormalizationStats& stats) {
  if (v.values.size() != stats.mean.size() ||
      v.values.size() != stats.scale.size()) {
    throw Error(ErrorCode::kDimension, "feature dimension mismatch");
  }
  FeatureVector out = v;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (v.values[i] - stats.mean[i]) / stats.scale[i];
  }
  return out;
}

inline std::vector<FeatureVector> ApplyNormalization(
    std::span<const FeatureVector> vectors, const NormalizationStats& stats) {
  std::vector<FeatureVector> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(ApplyNormalization(v, stats));
  return out;
}

namespace features_internal {

inline Json FiniteOrNull(double x) {
  return std::isfinite(x) ? Json(x) : Json(nullptr);
}

inline double FromFiniteOrNull(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace features_internal

// Infinite clip bounds and epsilons are written as null.
inline Json StatsToJson(const NormalizationStats& s,
                        const FeatureVocabulary& vocab) {
  using features_internal::FiniteOrNull;
  return Json{{"format", "fp-normalization"},
              {"version", 1},
              {"vocabulary_hash", vocab.Hash()},
              {"mean", s.mean},
              {"scale", s.scale},
              {"clip_bound", FiniteOrNull(s.clip_bound)},
              {"noise_multiplier", s.noise_multiplier},
              {"epsilon_spent", FiniteOrNull(s.epsilon_spent)}};
}

inline NormalizationStats StatsFromJson(const Json& j,
                                        const FeatureVocabulary& vocab) {
  using features_internal::FromFiniteOrNull;
  if (j.value("format", "") != "fp-normalization" || j.value("version", 0) != 1) {
    throw Error(ErrorCode::kVersion, "not an fp-normalization v1 document");
  }
  if (j.at("vocabulary_hash").get<std::string>() != vocab.Hash()) {
    throw Error(ErrorCode::kValidation, "normalization stats were computed "
                                        "for a different vocabulary");
  }
  NormalizationStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  s.clip_bound = FromFiniteOrNull(j.at("clip_bound"));
  s.noise_multiplier = j.at("noise_multiplier").get<double>();
  s.epsilon_spent = FromFiniteOrNull(j.at("epsilon_spent"));
  if (s.mean.size() != vocab.dimension() || s.scale.size() != vocab.dimension()) {
    throw Error(ErrorCode::kDimension, "normalization stats dimension mismatch");
  }
  for (double& x : s.scale) x = std::max(x, kScaleFloor);
  return s;
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_FEATURES_HPP_
