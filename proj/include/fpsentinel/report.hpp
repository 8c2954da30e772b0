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

// JSON and plain-text renderings of analysis results.

#ifndef FPSENTINEL_REPORT_HPP_
#define FPSENTINEL_REPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "fpsentinel/analysis.hpp"
#include "fpsentinel/heuristics.hpp"
#include "fpsentinel/pipeline.hpp"
#include "json.hpp"

namespace fpsentinel {

enum class OutputFormat { kJson, kTable };

inline OutputFormat ParseOutputFormat(std::string_view s) {
  if (s == "json") return OutputFormat::kJson;
  if (s == "table") return OutputFormat::kTable;
  throw Error(ErrorCode::kConfig, "unknown format: " + std::string(s));
}

// Percentages are reported to one decimal place.
inline double RoundTo(double x, int decimals) {
  const double f = std::pow(10.0, decimals);
  return std::round(x * f) / f;
}

inline Json RatioJson(double r) {
  return std::isinf(r) ? Json("inf") : Json(RoundTo(r, 1));
}

inline std::string FormatNumber(double x, int decimals) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, x);
  return buf;
}

// Left-aligned first column, right-aligned others.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) {
    rows_.push_back(std::move(header));
  }
  void AddRow(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string Render() const {
    std::vector<std::size_t> width;
    for (const auto& r : rows_) {
      if (width.size() < r.size()) width.resize(r.size(), 0);
      for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::ostringstream out;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const auto& r = rows_[k];
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out << "  ";
        const std::string pad(width[i] - r[i].size(), ' ');
        out << (i == 0 ? r[i] + pad : pad + r[i]);
      }
      out << '\n';
      if (k == 0) {
        std::size_t total = 0;
        for (std::size_t w : width) total += w;
        out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
      }
    }
    return out.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

inline std::string Render(const Json& j, OutputFormat f,
                          const std::string& table) {
  return f == OutputFormat::kJson ? j.dump(2) + "\n" : table;
}

// ---------------------------------------------------------------------------

inline Json PrevalenceJson(const PrevalenceReport& r) {
  return Json{{"canvas", r.canvas},
              {"canvas_font", r.canvas_font},
              {"audio", r.audio},
              {"webrtc", r.webrtc},
              {"total_fp_scripts", r.total_fp_scripts},
              {"total_scripts", r.total_scripts},
              {"fp_websites", r.fp_websites}};
}

inline std::string PrevalenceTable(const PrevalenceReport& r) {
  TextTable t({"technique", "scripts"});
  t.AddRow({"canvas", std::to_string(r.canvas)});
  t.AddRow({"canvas_font", std::to_string(r.canvas_font)});
  t.AddRow({"audio", std::to_string(r.audio)});
  t.AddRow({"webrtc", std::to_string(r.webrtc)});
  t.AddRow({"total", std::to_string(r.total_fp_scripts)});
  return t.Render() + "scripts: " + std::to_string(r.total_scripts) +
         ", fingerprinting websites: " + std::to_string(r.fp_websites) + "\n";
}

inline Json CallRatioJson(const std::vector<CallRatioEntry>& entries) {
  Json arr = Json::array();
  for (const auto& e : entries) {
    arr.push_back(Json{{"api", e.api.str()},
                       {"fp_calls", e.fp_calls},
                       {"nonfp_calls", e.nonfp_calls},
                       {"ratio", RatioJson(e.ratio)}});
  }
  return Json{{"entries", arr}};
}

inline std::string CallRatioTable(const std::vector<CallRatioEntry>& entries) {
  TextTable t({"api", "fp_calls", "nonfp_calls", "ratio"});
  for (const auto& e : entries) {
    t.AddRow({e.api.str(), std::to_string(e.fp_calls), std::to_string(e.nonfp_calls),
              FormatNumber(RoundTo(e.ratio, 1), 1)});
  }
  return t.Render();
}

inline Json MissReportJson(const MissReport& r) {
  Json reasons = Json::object();
  for (const auto& [reason, n] : r.by_reason) reasons[std::string(MissReasonName(reason))] = n;
  Json categories = Json::object();
  for (const auto& [c, p] : r.by_category) categories[c] = RoundTo(p, 1);
  Json missed = Json::array();
  for (const auto& site : r.missed) {
    missed.push_back(Json{{"site", site},
                          {"reason", std::string(MissReasonName(r.reason_of.at(site)))}});
  }
  return Json{{"real_fp_sites", r.real_fp_sites.size()},
              {"crawl_fp_sites", r.crawl_fp_sites.size()},
              {"missed", r.missed.size()},
              {"miss_percentage", RoundTo(r.miss_percentage, 1)},
              {"by_reason", reasons},
              {"by_category", categories},
              {"warnings", r.warnings},
              {"missed_sites", missed}};
}

inline std::string MissReportTable(const MissReport& r) {
  std::ostringstream out;
  out << "fingerprinting sites: real " << r.real_fp_sites.size() << ", crawl "
      << r.crawl_fp_sites.size() << ", missed " << r.missed.size() << " ("
      << FormatNumber(r.miss_percentage, 1) << "%)\n\n";
  TextTable reasons({"reason", "sites"});
  for (const auto& [reason, n] : r.by_reason) {
    reasons.AddRow({std::string(MissReasonName(reason)), std::to_string(n)});
  }
  out << reasons.Render() << '\n';
  TextTable categories({"category", "miss_percentage"});
  for (const auto& [c, p] : r.by_category) categories.AddRow({c, FormatNumber(p, 1)});
  out << categories.Render();
  if (r.warnings) out << "unparseable page URLs: " << r.warnings << '\n';
  return out.str();
}

inline Json MetricsJson(const MetricsReport& m) {
  return Json{{"false_positives", m.false_positives},
              {"true_positives", m.true_positives},
              {"false_negatives", m.false_negatives},
              {"precision", m.precision},
              {"recall", m.recall},
              {"auprc", m.auprc}};
}

inline std::string MetricsTable(const MetricsReport& m) {
  TextTable t({"metric", "value"});
  t.AddRow({"false_positives", std::to_string(m.false_positives)});
  t.AddRow({"true_positives", std::to_string(m.true_positives)});
  t.AddRow({"false_negatives", std::to_string(m.false_negatives)});
  t.AddRow({"precision", FormatNumber(m.precision, 4)});
  t.AddRow({"recall", FormatNumber(m.recall, 4)});
  t.AddRow({"auprc", FormatNumber(m.auprc, 4)});
  return t.Render();
}

inline Json SummaryJson(const CrossValidationSummary& s) {
  auto ms = [](const MeanStd& x) { return Json{{"mean", x.mean}, {"std", x.std}}; };
  Json folds = Json::array();
  for (const auto& m : s.per_fold) folds.push_back(MetricsJson(m));
  return Json{{"false_positives", ms(s.false_positives)},
              {"precision", ms(s.precision)},
              {"recall", ms(s.recall)},
              {"auprc", ms(s.auprc)},
              {"folds", folds}};
}

inline Json Table4Json(const Table4Result& r) {
  return Json{{"baseline", SummaryJson(r.baseline)},
              {"fedfp", SummaryJson(r.fedfp)},
              {"noise_multipliers", r.noise_multipliers},
              {"epsilons", r.epsilons}};
}

inline std::string Table4Table(const Table4Result& r) {
  auto pm = [](const MeanStd& x, int d) {
    return FormatNumber(x.mean, d) + " +/- " + FormatNumber(x.std, d);
  };
  TextTable t({"model", "false_positives", "precision", "recall", "auprc"});
  t.AddRow({"crawl baseline", pm(r.baseline.false_positives, 1),
            pm(r.baseline.precision, 3), pm(r.baseline.recall, 3),
            pm(r.baseline.auprc, 3)});
  t.AddRow({"fed-fp", pm(r.fedfp.false_positives, 1), pm(r.fedfp.precision, 3),
            pm(r.fedfp.recall, 3), pm(r.fedfp.auprc, 3)});
  std::string out = t.Render() + "\n";
  TextTable folds({"fold", "base_auprc", "fed_auprc", "base_fp", "fed_fp", "epsilon"});
  for (std::size_t f = 0; f < r.fedfp_folds.size(); ++f) {
    folds.AddRow({std::to_string(f), FormatNumber(r.baseline_folds[f].auprc, 4),
                  FormatNumber(r.fedfp_folds[f].auprc, 4),
                  std::to_string(r.baseline_folds[f].false_positives),
                  std::to_string(r.fedfp_folds[f].false_positives),
                  FormatNumber(r.epsilons[f], 3)});
  }
  return out + folds.Render();
}

inline Json LabelJson(const ScriptTrace& t, const FingerprintingLabel& l) {
  return Json{{"script_id", t.script_id}, {"site", t.site},
              {"page_url", t.page_url},   {"canvas", l.canvas},
              {"canvas_font", l.canvas_font}, {"webrtc", l.webrtc},
              {"audio", l.audio},         {"fingerprinting", l.any}};
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_REPORT_HPP_
