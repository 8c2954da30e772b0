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

// Measurement analytics over labeled corpora and evaluation metrics for the
// trained classifiers.

#ifndef FPSENTINEL_ANALYSIS_HPP_
#define FPSENTINEL_ANALYSIS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fpsentinel/common.hpp"
#include "fpsentinel/features.hpp"
#include "fpsentinel/heuristics.hpp"
#include "fpsentinel/manifest.hpp"
#include "fpsentinel/telemetry.hpp"

namespace fpsentinel {

// ---------------------------------------------------------------------------
// Prevalence

struct PrevalenceReport {
  std::uint64_t canvas = 0;
  std::uint64_t canvas_font = 0;
  std::uint64_t audio = 0;
  std::uint64_t webrtc = 0;
  std::uint64_t total_fp_scripts = 0;
  std::uint64_t total_scripts = 0;
  std::uint64_t fp_websites = 0;
};

inline PrevalenceReport Prevalence(const Corpus& corpus,
                                   const Manifest& manifest) {
  PrevalenceReport r;
  std::set<std::string> fp_sites;
  for (const auto& t : corpus.traces) {
    const FingerprintingLabel l = LabelScript(t, manifest);
    r.canvas += l.canvas;
    r.canvas_font += l.canvas_font;
    r.audio += l.audio;
    r.webrtc += l.webrtc;
    r.total_fp_scripts += l.any;
    if (l.any) fp_sites.insert(t.site);
  }
  r.total_scripts = corpus.traces.size();
  r.fp_websites = fp_sites.size();
  return r;
}

// ---------------------------------------------------------------------------
// Call Ratio

struct CallRatioEntry {
  ApiIdentifier api;
  std::uint64_t fp_calls = 0;
  std::uint64_t nonfp_calls = 0;
  double ratio = 0.0;  // +infinity when nonfp_calls == 0
};

// Entries with no fingerprinting calls are omitted. Sorted by descending
// ratio (infinite first), ties by API name.
inline std::vector<CallRatioEntry> CallRatio(const Corpus& corpus,
                                             const Manifest& manifest) {
  std::map<ApiIdentifier, std::pair<std::uint64_t, std::uint64_t>> calls;
  for (const auto& t : corpus.traces) {
    const bool fp = LabelScript(t, manifest).any;
    for (const auto& [api, agg] : t.aggregates) {
      auto& c = calls[api];
      (fp ? c.first : c.second) += agg.call_count;
    }
  }
  std::vector<CallRatioEntry> out;
  for (const auto& [api, c] : calls) {
    if (c.first == 0) continue;
    CallRatioEntry e;
    e.api = api;
    e.fp_calls = c.first;
    e.nonfp_calls = c.second;
    e.ratio = c.second == 0 ? std::numeric_limits<double>::infinity()
                            : static_cast<double>(c.first) /
                                  static_cast<double>(c.second);
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(),
            [](const CallRatioEntry& a, const CallRatioEntry& b) {
              if (a.ratio != b.ratio) return a.ratio > b.ratio;
              return a.api < b.api;
            });
  return out;
}

// APIs that no fingerprinting script of `other` calls: the vectors a crawl
// would miss.
inline std::vector<CallRatioEntry> CallRatioAbsentIn(
    const std::vector<CallRatioEntry>& entries, const Corpus& other,
    const Manifest& manifest) {
  std::set<ApiIdentifier> used;
  for (const auto& t : other.traces) {
    if (!LabelScript(t, manifest).any) continue;
    for (const auto& [api, agg] : t.aggregates) used.insert(api);
  }
  std::vector<CallRatioEntry> out;
  for (const auto& e : entries) {
    if (!used.contains(e.api)) out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sub-page miss reasons

enum class MissReason { kFailed = 0, kAuth = 1, kContent = 2, kHome = 3 };

inline constexpr std::array<MissReason, 4> kAllMissReasons = {
    MissReason::kFailed, MissReason::kAuth, MissReason::kContent,
    MissReason::kHome};

inline std::string_view MissReasonName(MissReason r) {
  switch (r) {
    case MissReason::kFailed: return "Failed";
    case MissReason::kAuth: return "Auth";
    case MissReason::kContent: return "Content";
    case MissReason::kHome: return "Home";
  }
  return "";
}

inline const std::set<std::string, std::less<>>& AuthPathKeywords() {
  static const std::set<std::string, std::less<>> kKeywords = {
      "login", "signin", "sign-in", "signup", "sign-up", "register", "account",
      "auth"};
  return kKeywords;
}

struct SubpageClassification {
  MissReason reason = MissReason::kContent;
  bool warning = false;  // URL could not be parsed
};

inline bool IsErrorStatus(std::optional<int> status) {
  return status && *status >= 400 && *status <= 599;
}

// Precedence Failed > Auth > Home > Content. `site_record` is the corpus
// producer's record of the visit (null when the site was never visited).
inline SubpageClassification ClassifySubpage(std::string_view page_url,
                                             std::optional<int> http_status,
                                             const WebsiteRecord* site_record) {
  SubpageClassification out;
  if (IsErrorStatus(http_status) || site_record == nullptr ||
      site_record->pages.empty()) {
    out.reason = MissReason::kFailed;
    return out;
  }
  const auto url = ParseUrl(page_url);
  if (!url) {
    out.reason = MissReason::kContent;
    out.warning = true;
    return out;
  }
  std::string path;
  for (char c : url->path) path.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  std::size_t pos = 0;
  while (pos < path.size()) {
    const std::size_t next = path.find('/', pos);
    const std::string_view seg =
        std::string_view(path).substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (AuthPathKeywords().contains(seg)) {
      out.reason = MissReason::kAuth;
      return out;
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  out.reason = (path.empty() || path == "/") ? MissReason::kHome
                                             : MissReason::kContent;
  return out;
}

// ---------------------------------------------------------------------------
// Corpus comparison

struct MissReport {
  std::set<std::string> real_fp_sites;
  std::set<std::string> crawl_fp_sites;
  std::set<std::string> missed;
  double miss_percentage = 0.0;
  std::map<MissReason, std::uint64_t> by_reason;
  std::map<std::string, double> by_category;  // Miss Percentage per category
  std::map<std::string, MissReason> reason_of;  // per missed site
  std::uint64_t warnings = 0;
};

inline double Percentage(std::uint64_t part, std::uint64_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) /
                                static_cast<double>(whole);
}

// A missed site's reason comes from the earliest page (in the real corpus's
// visit order) that loaded a fingerprinting script, classified against the
// crawl corpus's record of that site.
inline MissReport CompareCorpora(const Corpus& real, const Corpus& crawl,
                                 const Manifest& manifest) {
  MissReport r;
  std::unordered_map<std::string, std::set<std::string>> fp_pages;
  for (const auto& t : real.traces) {
    if (LabelScript(t, manifest).any) {
      r.real_fp_sites.insert(t.site);
      fp_pages[t.site].insert(t.page_url);
    }
  }
  r.crawl_fp_sites = FingerprintingSites(crawl, manifest);
  std::set_difference(r.real_fp_sites.begin(), r.real_fp_sites.end(),
                      r.crawl_fp_sites.begin(), r.crawl_fp_sites.end(),
                      std::inserter(r.missed, r.missed.end()));
  r.miss_percentage = Percentage(r.missed.size(), r.real_fp_sites.size());
  for (MissReason reason : kAllMissReasons) r.by_reason[reason] = 0;

  for (const auto& site : r.missed) {
    const auto& pages = fp_pages[site];
    std::string page = *pages.begin();
    if (const WebsiteRecord* w = real.FindWebsite(site)) {
      for (const auto& p : w->pages) {
        if (pages.contains(p)) {
          page = p;
          break;
        }
      }
    }
    const WebsiteRecord* crawled = crawl.FindWebsite(site);
    const auto cls = ClassifySubpage(
        page, crawled ? crawled->http_status : std::nullopt, crawled);
    r.warnings += cls.warning;
    ++r.by_reason[cls.reason];
    r.reason_of[site] = cls.reason;
  }

  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> per_category;
  for (const auto& site : r.real_fp_sites) {
    const WebsiteRecord* w = real.FindWebsite(site);
    auto& c = per_category[w ? w->category : "unknown"];
    ++c.second;
    c.first += r.missed.contains(site);
  }
  for (const auto& [category, c] : per_category) {
    r.by_category[category] = Percentage(c.first, c.second);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline std::vector<bool> Labels(std::span<const FeatureVector> vectors) {
  std::vector<bool> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(v.label);
  return out;
}

namespace analysis_internal {

inline std::array<std::vector<std::size_t>, 2> ShuffledByClass(
    const std::vector<bool>& labels, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i] ? 1 : 0].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    std::mt19937_64 rng(DeriveSeed(seed, 0x5u, c));
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
  }
  return by_class;
}

inline const char* ClassName(int c) { return c ? "positive" : "negative"; }

}  // namespace analysis_internal

// Per class, round(n_c * test_fraction) examples (at least one, at most
// n_c - 1) go to the test side. Index lists are sorted.
inline SplitIndices StratifiedSplit(const std::vector<bool>& labels,
                                    double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kConfig, "test_fraction must be in (0, 1)");
  }
  auto by_class = analysis_internal::ShuffledByClass(labels, seed);
  SplitIndices out;
  for (int c = 0; c < 2; ++c) {
    const auto& idx = by_class[c];
    if (idx.size() < 2) {
      throw Error(ErrorCode::kValidation,
                  std::string("class '") + analysis_internal::ClassName(c) +
                      "' has fewer than 2 examples");
    }
    auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(idx.size()) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + n_test);
    out.train.insert(out.train.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// Shuffled per class and dealt round-robin into k folds.
inline std::vector<SplitIndices> StratifiedKFold(const std::vector<bool>& labels,
                                                 std::size_t k,
                                                 std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kConfig, "k must be >= 2");
  auto by_class = analysis_internal::ShuffledByClass(labels, seed);
  std::vector<std::size_t> fold_of(labels.size());
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < k) {
      throw Error(ErrorCode::kValidation,
                  std::string("class '") + analysis_internal::ClassName(c) +
                      "' has fewer examples than folds");
    }
    for (std::size_t j = 0; j < by_class[c].size(); ++j) {
      fold_of[by_class[c][j]] = j % k;
    }
  }
  std::vector<SplitIndices> folds(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? folds[f].test : folds[f].train).push_back(i);
    }
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Metrics

struct ScoredExample {
  double score = 0.0;
  bool label = false;
};

struct MetricsReport {
  std::uint64_t false_positives = 0;
  std::uint64_t true_positives = 0;
  std::uint64_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double auprc = 0.0;
};

// Area under the precision-recall curve with step interpolation: sweeping
// every distinct score as a threshold, sum (R_k - R_{k-1}) * P_k.
inline double Auprc(std::span<const ScoredExample> scores) {
  std::vector<ScoredExample> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredExample& a, const ScoredExample& b) {
              return a.score > b.score;
            });
  std::uint64_t positives = 0;
  for (const auto& s : sorted) positives += s.label;
  if (positives == 0) {
    throw Error(ErrorCode::kUndefined, "AUPRC undefined without positives");
  }
  double area = 0.0;
  double prev_recall = 0.0;
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].label ? tp : fp) += 1;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

// Thresholded counts predict positive at score >= threshold. Precision is 0
// when nothing is predicted positive.
inline MetricsReport ComputeMetrics(std::span<const ScoredExample> scores,
                                    double threshold = 0.5) {
  if (scores.empty()) throw Error(ErrorCode::kValidation, "no scores");
  MetricsReport m;
  std::uint64_t positives = 0;
  for (const auto& s : scores) {
    positives += s.label;
    const bool predicted = s.score >= threshold;
    if (predicted && s.label) ++m.true_positives;
    if (predicted && !s.label) ++m.false_positives;
    if (!predicted && s.label) ++m.false_negatives;
  }
  if (positives == 0) {
    throw Error(ErrorCode::kUndefined, "recall and AUPRC undefined without positives");
  }
  const std::uint64_t predicted_pos = m.true_positives + m.false_positives;
  m.precision = predicted_pos == 0 ? 0.0
                                   : static_cast<double>(m.true_positives) /
                                         static_cast<double>(predicted_pos);
  m.recall = static_cast<double>(m.true_positives) / static_cast<double>(positives);
  m.auprc = Auprc(scores);
  return m;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

inline MeanStd Summarize(std::span<const double> xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return out;
}

struct CrossValidationSummary {
  std::vector<MetricsReport> per_fold;
  MeanStd false_positives, precision, recall, auprc;
};

inline CrossValidationSummary SummarizeFolds(std::vector<MetricsReport> folds) {
  CrossValidationSummary s;
  std::vector<double> fp, p, r, a;
  for (const auto& m : folds) {
    fp.push_back(static_cast<double>(m.false_positives));
    p.push_back(m.precision);
    r.push_back(m.recall);
    a.push_back(m.auprc);
  }
  s.false_positives = Summarize(fp);
  s.precision = Summarize(p);
  s.recall = Summarize(r);
  s.auprc = Summarize(a);
  s.per_fold = std::move(folds);
  return s;
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_ANALYSIS_HPP_
