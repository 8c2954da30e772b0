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

// The fpsentinel command line.
//
// Every command resolves its flags into one JSON configuration (defaults,
// then --config file, then flags) and runs from that configuration alone.
// Commands that write an artifact to -o/--out also write
// <out>.manifest.json holding the resolved configuration, so
// `fpsentinel replay --manifest <out>.manifest.json` reproduces the artifact.
//
// Exit codes: 0 success, 1 usage/validation/configuration error, 2 I/O error.

#ifndef FPSENTINEL_CLI_HPP_
#define FPSENTINEL_CLI_HPP_

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fpsentinel/analysis.hpp"
#include "fpsentinel/collector.hpp"
#include "fpsentinel/common.hpp"
#include "fpsentinel/features.hpp"
#include "fpsentinel/fedtrain.hpp"
#include "fpsentinel/heuristics.hpp"
#include "fpsentinel/manifest.hpp"
#include "fpsentinel/pipeline.hpp"
#include "fpsentinel/report.hpp"
#include "fpsentinel/synthgen.hpp"
#include "fpsentinel/telemetry.hpp"
#include "json.hpp"

namespace fpsentinel {

inline constexpr const char* kRunManifestFormat = "fp-run-manifest";

inline std::string RunManifestPath(const std::string& out) {
  return out + ".manifest.json";
}

namespace cli_internal {

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;
};

inline Json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), e.byte);
  }
}

inline void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

inline std::string UtcTimestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Objects merge recursively; everything else in `patch` replaces `base`.
inline void MergeInto(Json& base, const Json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [k, v] : patch.items()) {
    if (base.contains(k) && base[k].is_object() && v.is_object()) {
      MergeInto(base[k], v);
    } else {
      base[k] = v;
    }
  }
}

inline std::string Str(const Json& cfg, const char* key) {
  return cfg.value(key, std::string());
}

inline std::string Require(const Json& cfg, const char* key, const char* flag) {
  std::string v = Str(cfg, key);
  if (v.empty()) throw Error(ErrorCode::kValidation, std::string("missing required ") + flag);
  return v;
}

inline OutputFormat Format(const Json& cfg) {
  return ParseOutputFormat(cfg.value("format", std::string("table")));
}

inline Manifest LoadManifestFor(const Json& cfg) {
  const std::string path = Str(cfg, "manifest");
  return path.empty() ? Manifest::Default() : LoadManifest(path);
}

// Writes `text` to --out when given, else to the command's stdout.
inline void Emit(const Json& cfg, Context& ctx, const std::string& text) {
  const std::string out = Str(cfg, "out");
  if (out.empty()) {
    ctx.out << text;
  } else {
    WriteTextFile(out, text);
  }
}

// "site,rank" CSV, same layout rules as the category file.
inline std::unordered_map<std::string, std::uint64_t> LoadRanks(const std::string& path) {
  std::unordered_map<std::string, std::uint64_t> out;
  for (const auto& [site, value] : LoadCategoryCsv(path)) {
    try {
      std::size_t used = 0;
      const unsigned long long r = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      out[site] = r;
    } catch (const std::exception&) {
      throw Error(ErrorCode::kValidation, "bad rank for " + site + ": " + value);
    }
  }
  return out;
}

// Binds a CLI option to a JSON pointer in the resolved configuration; the
// value is written only when the option was given.
class Binder {
 public:
  explicit Binder(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* Add(const std::string& flag, const std::string& pointer,
                   const std::string& desc) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *value, desc);
    setters_.push_back([opt, value, pointer](Json& j) {
      if (opt->count()) j[Json::json_pointer(pointer)] = *value;
    });
    return opt;
  }

  CLI::Option* Flag(const std::string& flag, const std::string& pointer,
                    const Json& value, const std::string& desc) {
    CLI::Option* opt = app_->add_flag(flag, desc);
    setters_.push_back([opt, value, pointer](Json& j) {
      if (opt->count()) j[Json::json_pointer(pointer)] = value;
    });
    return opt;
  }

  void Apply(Json& j) const {
    for (const auto& s : setters_) s(j);
  }

 private:
  CLI::App* app_;
  std::vector<std::function<void(Json&)>> setters_;
};

struct CommandSpec {
  std::string name;
  std::string help;
  std::function<Json()> defaults;
  std::function<void(Binder&)> flags;
  std::function<void(const Json&, Context&)> run;
  std::vector<std::string> input_keys;
  std::vector<std::string> extra_output_keys;
  bool writes_manifest = true;
};

// ---------------------------------------------------------------------------
// Commands

inline void RunIngest(const Json& cfg, Context& ctx) {
  const std::string out = Require(cfg, "out", "-o/--out");
  const auto inputs = cfg.value("inputs", std::vector<std::string>{});
  if (inputs.empty()) throw Error(ErrorCode::kValidation, "missing required --input");
  std::vector<ScriptTrace> traces;
  std::size_t rejected = 0;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
    IngestResult r = ReadTelemetryStream(in);
    for (const auto& e : r.errors) ctx.err << path << ": " << e << '\n';
    rejected += r.rejected;
    for (auto& t : r.traces) traces.push_back(std::move(t));
  }
  if (cfg.value("strict", false) && rejected > 0) {
    throw Error(ErrorCode::kValidation, std::to_string(rejected) + " telemetry lines rejected");
  }
  const std::string ranks_path = Str(cfg, "ranks");
  Corpus corpus = BuildCorpus(cfg.value("label", std::string("real")), std::move(traces),
                              ranks_path.empty() ? decltype(LoadRanks(""))() : LoadRanks(ranks_path));
  const std::string categories = Str(cfg, "categories");
  if (!categories.empty()) {
    ApplyCategories(corpus, LoadCategoryCsv(categories));
    if (cfg.value("exclude_categories", true)) corpus = FilterWebsitesByCategory(corpus);
  }
  SaveCorpus(corpus, out);
  const Json summary{{"traces", corpus.traces.size()},
                     {"websites", corpus.websites.size()},
                     {"rejected", rejected}};
  ctx.out << (Format(cfg) == OutputFormat::kJson
                  ? summary.dump() + "\n"
                  : "ingested " + std::to_string(corpus.traces.size()) + " traces from " +
                        std::to_string(corpus.websites.size()) + " websites (" +
                        std::to_string(rejected) + " lines rejected)\n");
}

inline void RunLabel(const Json& cfg, Context& ctx) {
  const Corpus corpus = LoadCorpus(Require(cfg, "corpus", "--corpus"));
  const Manifest manifest = LoadManifestFor(cfg);
  Json labels = Json::array();
  TextTable table({"script_id", "site", "canvas", "canvas_font", "webrtc", "audio"});
  auto yn = [](bool b) { return std::string(b ? "yes" : "-"); };
  for (const auto& t : corpus.traces) {
    const FingerprintingLabel l = LabelScript(t, manifest);
    labels.push_back(LabelJson(t, l));
    if (l.any) {
      table.AddRow({t.script_id.substr(0, 16), t.site, yn(l.canvas), yn(l.canvas_font),
                    yn(l.webrtc), yn(l.audio)});
    }
  }
  Emit(cfg, ctx, Render(Json{{"labels", labels}}, Format(cfg), table.Render()));
}

inline void RunPrevalence(const Json& cfg, Context& ctx) {
  const Corpus corpus = LoadCorpus(Require(cfg, "corpus", "--corpus"));
  const PrevalenceReport r = Prevalence(corpus, LoadManifestFor(cfg));
  Emit(cfg, ctx, Render(PrevalenceJson(r), Format(cfg), PrevalenceTable(r)));
}

inline void RunCallRatio(const Json& cfg, Context& ctx) {
  const Manifest manifest = LoadManifestFor(cfg);
  const Corpus corpus = LoadCorpus(Require(cfg, "corpus", "--corpus"));
  auto entries = CallRatio(corpus, manifest);
  const std::string other = Str(cfg, "absent_in");
  if (!other.empty()) entries = CallRatioAbsentIn(entries, LoadCorpus(other), manifest);
  Emit(cfg, ctx, Render(CallRatioJson(entries), Format(cfg), CallRatioTable(entries)));
}

inline void RunCompare(const Json& cfg, Context& ctx) {
  const Corpus real = LoadCorpus(Require(cfg, "real", "--real"));
  const Corpus crawl = LoadCorpus(Require(cfg, "crawl", "--crawl"));
  const MissReport r = CompareCorpora(real, crawl, LoadManifestFor(cfg));
  Emit(cfg, ctx, Render(MissReportJson(r), Format(cfg), MissReportTable(r)));
}

inline void RunSynth(const Json& cfg, Context& ctx) {
  const std::string out = Require(cfg, "out", "-o/--out");
  const Manifest manifest = LoadManifestFor(cfg);
  CorpusConfig corpus_cfg;
  CorpusConfigFromJson(cfg.at("corpus"), corpus_cfg);
  const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
  const Corpus real = GenerateCorpus(corpus_cfg, seed, manifest);
  SaveCorpus(real, out);
  std::string summary = "wrote " + std::to_string(real.traces.size()) + " traces to " + out;
  const std::string crawl_out = Str(cfg, "crawl_out");
  if (!crawl_out.empty()) {
    SuppressionPolicy policy;
    SuppressionPolicyFromJson(cfg.at("suppression"), policy);
    const Corpus crawl = DeriveCrawlCorpus(real, policy, DeriveSeed(seed, 0xC7A1u), manifest);
    SaveCorpus(crawl, crawl_out);
    summary += ", " + std::to_string(crawl.traces.size()) + " to " + crawl_out;
  }
  ctx.out << summary << '\n';
}

inline PipelineOptions OptionsFromConfig(const Json& cfg) {
  PipelineOptions o;
  if (cfg.contains("pipeline")) PipelineOptionsFromJson(cfg["pipeline"], o);
  o.seed = cfg.value("seed", std::uint64_t{0});
  return o;
}

inline void RunPretrain(const Json& cfg, Context& ctx) {
  const std::string out = Require(cfg, "out", "-o/--out");
  const Manifest manifest = LoadManifestFor(cfg);
  const Corpus crawl = LoadCorpus(Require(cfg, "crawl", "--crawl"));
  const PipelineOptions opts = OptionsFromConfig(cfg);
  const FeatureVocabulary vocab = BuildVocabulary(manifest);
  const auto vectors = ExtractCorpusFeatures(crawl, vocab, manifest);
  const Checkpoint c = TrainCrawlBaseline(vectors, vocab, opts);
  SaveCheckpoint(c, out);
  ctx.out << "trained crawl baseline on " << vectors.size() << " scripts -> " << out << '\n';
}

inline void RunFedtrain(const Json& cfg, Context& ctx) {
  const std::string out = Require(cfg, "out", "-o/--out");
  const Manifest manifest = LoadManifestFor(cfg);
  const PipelineOptions opts = OptionsFromConfig(cfg);
  const Corpus crawl = LoadCorpus(Require(cfg, "crawl", "--crawl"));
  const Corpus users = LoadCorpus(Require(cfg, "users", "--users"));
  const FeatureVocabulary vocab = BuildVocabulary(manifest);
  const auto crawl_vectors = ExtractCorpusFeatures(crawl, vocab, manifest);
  const auto user_vectors = ExtractCorpusFeatures(users, vocab, manifest);
  const FedFpResult r = TrainFedFp(crawl_vectors, user_vectors, users.websites, vocab, opts);
  SaveCheckpoint(r.checkpoint, out);
  const Json summary{{"noise_multiplier", r.noise_multiplier},
                     {"epsilon_spent", r.checkpoint.epsilon_spent},
                     {"delta", opts.budget.delta},
                     {"normalization_epsilon",
                      std::isfinite(r.checkpoint.normalization.epsilon_spent)
                          ? Json(r.checkpoint.normalization.epsilon_spent)
                          : Json(nullptr)},
                     {"max_update_norm", r.max_update_norm}};
  if (Format(cfg) == OutputFormat::kJson) {
    ctx.out << summary.dump() << '\n';
  } else {
    ctx.out << "fed-fp model -> " << out << ": sigma " << FormatNumber(r.noise_multiplier, 2)
            << ", epsilon " << FormatNumber(r.checkpoint.epsilon_spent, 3) << " at delta "
            << opts.budget.delta << '\n';
  }
}

inline void RunEvaluate(const Json& cfg, Context& ctx) {
  const Manifest manifest = LoadManifestFor(cfg);
  const double threshold = cfg.value("threshold", 0.5);
  const std::string model = Str(cfg, "model");
  if (!model.empty()) {
    const Checkpoint c = LoadCheckpoint(model);
    const Corpus corpus = LoadCorpus(Require(cfg, "corpus", "--corpus"));
    const auto vectors = ExtractCorpusFeatures(corpus, c.vocabulary, manifest);
    const MetricsReport m = ComputeMetrics(Score(c, vectors), threshold);
    Emit(cfg, ctx, Render(MetricsJson(m), Format(cfg), MetricsTable(m)));
    return;
  }
  const Corpus users = LoadCorpus(Require(cfg, "users", "--model or --users"));
  const Corpus crawl = LoadCorpus(Require(cfg, "crawl", "--crawl"));
  const auto folds = cfg.value("folds", std::uint64_t{5});
  const Table4Result r =
      RunTable4Protocol(users, crawl, manifest, OptionsFromConfig(cfg), folds, threshold);
  Emit(cfg, ctx, Render(Table4Json(r), Format(cfg), Table4Table(r)));
}

inline std::atomic<bool>& StopRequested() {
  static std::atomic<bool> stop{false};
  return stop;
}

inline void RunCollect(const Json& cfg, Context& ctx) {
  CollectorConfig c;
  c.host = cfg.value("host", c.host);
  c.port = cfg.value("port", c.port);
  c.spool_path = cfg.value("spool", c.spool_path);
  c.max_body_bytes = cfg.value("max_body_bytes", c.max_body_bytes);
  const char* token = std::getenv(kTokenEnvVar);
  c.token = token ? token : "";
  CollectorServer server(c);
  const int port = server.Start();
  ctx.out << "collector listening on " << c.host << ':' << port << ", spool " << c.spool_path
          << std::endl;
  StopRequested() = false;
  std::signal(SIGINT, [](int) { StopRequested() = true; });
  std::signal(SIGTERM, [](int) { StopRequested() = true; });
  while (!StopRequested()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.Stop();
}

inline Json WithGlobals(Json j) {
  j["seed"] = std::uint64_t{0};
  j["format"] = "table";
  j["out"] = "";
  return j;
}

inline const std::vector<CommandSpec>& Commands() {
  static const std::vector<CommandSpec> kCommands = [] {
    std::vector<CommandSpec> c;
    auto manifest_flag = [](Binder& b) {
      b.Add<std::string>("--manifest", "/manifest", "monitored-API manifest JSON");
    };
    c.push_back({"ingest", "Build a corpus from telemetry JSONL files",
                 [] {
                   return Json{{"inputs", Json::array()}, {"label", "real"},
                               {"ranks", ""},             {"categories", ""},
                               {"exclude_categories", true}, {"strict", false}};
                 },
                 [](Binder& b) {
                   b.Add<std::vector<std::string>>("--input,-i", "/inputs",
                                                   "telemetry JSONL file (repeatable)");
                   b.Add<std::string>("--label", "/label", "corpus label");
                   b.Add<std::string>("--ranks", "/ranks", "site,rank CSV");
                   b.Add<std::string>("--categories", "/categories", "site,category CSV");
                   b.Flag("--keep-all-categories", "/exclude_categories", false,
                          "keep websites in excluded categories");
                   b.Flag("--strict", "/strict", true, "fail if any line is rejected");
                 },
                 RunIngest, {"inputs", "ranks", "categories"}, {}, true});
    c.push_back({"label", "Label every script with the fingerprinting heuristics",
                 [] { return Json{{"corpus", ""}, {"manifest", ""}}; },
                 [=](Binder& b) {
                   b.Add<std::string>("--corpus", "/corpus", "corpus file");
                   manifest_flag(b);
                 },
                 RunLabel, {"corpus", "manifest"}, {}, true});
    c.push_back({"prevalence", "Count fingerprinting scripts per technique",
                 [] { return Json{{"corpus", ""}, {"manifest", ""}}; },
                 [=](Binder& b) {
                   b.Add<std::string>("--corpus", "/corpus", "corpus file");
                   manifest_flag(b);
                 },
                 RunPrevalence, {"corpus", "manifest"}, {}, true});
    c.push_back({"call-ratio", "Per-API fingerprinting to non-fingerprinting call ratio",
                 [] { return Json{{"corpus", ""}, {"absent_in", ""}, {"manifest", ""}}; },
                 [=](Binder& b) {
                   b.Add<std::string>("--corpus", "/corpus", "corpus file");
                   b.Add<std::string>("--absent-in", "/absent_in",
                                      "keep only APIs no fingerprinting script of this corpus calls");
                   manifest_flag(b);
                 },
                 RunCallRatio, {"corpus", "absent_in", "manifest"}, {}, true});
    c.push_back({"compare", "Fingerprinting websites a crawl missed, with reasons",
                 [] { return Json{{"real", ""}, {"crawl", ""}, {"manifest", ""}}; },
                 [=](Binder& b) {
                   b.Add<std::string>("--real", "/real", "real-user corpus");
                   b.Add<std::string>("--crawl", "/crawl", "crawl corpus");
                   manifest_flag(b);
                 },
                 RunCompare, {"real", "crawl", "manifest"}, {}, true});
    c.push_back({"synth", "Generate a synthetic corpus and optionally its crawl",
                 [] {
                   return Json{{"corpus", CorpusConfigToJson(CorpusConfig{})},
                               {"suppression", SuppressionPolicyToJson(SuppressionPolicy::Desk())},
                               {"crawl_out", ""},
                               {"manifest", ""}};
                 },
                 [=](Binder& b) {
                   b.Add<std::uint32_t>("--sites", "/corpus/n_sites", "number of websites");
                   b.Add<std::uint32_t>("--scripts-per-site", "/corpus/scripts_per_site",
                                        "scripts per website");
                   b.Add<double>("--fp-fraction", "/corpus/fp_site_fraction",
                                 "share of fingerprinting websites");
                   b.Add<double>("--device-variant-fraction", "/corpus/device_variant_fraction",
                                 "share of audio/WebRTC scripts using device-gated APIs");
                   b.Add<std::string>("--label", "/corpus/label", "corpus label");
                   b.Add<std::string>("--crawl-out", "/crawl_out", "also write the derived crawl");
                   b.Add<double>("--failed-fraction", "/suppression/failed_fraction",
                                 "crawl failure probability per fingerprinting site");
                   b.Add<double>("--auth-fraction", "/suppression/auth_fraction",
                                 "suppression probability on auth pages");
                   b.Add<double>("--content-fraction", "/suppression/content_fraction",
                                 "suppression probability on content pages");
                   b.Add<double>("--home-fraction", "/suppression/home_fraction",
                                 "suppression probability on home pages");
                   manifest_flag(b);
                 },
                 RunSynth, {"manifest"}, {"crawl_out"}, true});
    auto pipeline_flags = [=](Binder& b) {
      b.Add<double>("--epsilon", "/pipeline/federated/epsilon", "privacy budget epsilon");
      b.Add<double>("--delta", "/pipeline/federated/delta", "privacy budget delta");
      b.Add<std::uint64_t>("--rounds", "/pipeline/federated/rounds", "federated rounds R");
      b.Add<std::uint64_t>("--clients-per-round", "/pipeline/federated/clients_per_round",
                           "clients sampled per round m");
      b.Add<std::uint64_t>("--total-clients", "/pipeline/federated/total_clients",
                           "simulated clients N");
      b.Add<double>("--clip-norm", "/pipeline/federated/clip_norm", "update clip norm C");
      b.Add<double>("--lr", "/pipeline/federated/local_lr", "client learning rate");
      b.Add<std::uint32_t>("--local-epochs", "/pipeline/federated/local_epochs",
                           "client epochs per round");
      b.Add<std::uint32_t>("--batch-size", "/pipeline/federated/batch_size",
                           "client batch size");
      b.Add<double>("--noise-multiplier", "/pipeline/noise_multiplier",
                    "fixed sigma instead of calibrating from the budget");
      b.Add<double>("--grid-step", "/pipeline/grid_step", "calibration grid step");
      b.Add<double>("--grid-max-sigma", "/pipeline/grid_max_sigma", "largest grid sigma");
      b.Add<double>("--zipf-exponent", "/pipeline/zipf_exponent", "client visit Zipf exponent");
      b.Add<std::uint32_t>("--visits-per-client", "/pipeline/visits_per_client",
                           "site visits per simulated client");
      b.Add<double>("--normalization-noise", "/pipeline/normalization_noise",
                    "noise multiplier of the federated normalization");
      b.Add<std::uint32_t>("--pretrain-epochs", "/pipeline/pretrain_epochs",
                           "centralized pre-training epochs");
      b.Add<double>("--pretrain-lr", "/pipeline/pretrain_lr", "pre-training learning rate");
      manifest_flag(b);
    };
    const Json pipeline_defaults = PipelineOptionsToJson(PipelineOptions{});
    c.push_back({"pretrain", "Train the crawl-only centralized baseline",
                 [=] { return Json{{"crawl", ""}, {"manifest", ""}, {"pipeline", pipeline_defaults}}; },
                 [=](Binder& b) {
                   b.Add<std::string>("--crawl", "/crawl", "crawl corpus");
                   b.Add<std::uint32_t>("--epochs", "/pipeline/pretrain_epochs", "epochs");
                   b.Add<double>("--lr", "/pipeline/pretrain_lr", "learning rate");
                   b.Add<std::uint32_t>("--batch-size", "/pipeline/pretrain_batch", "batch size");
                   manifest_flag(b);
                 },
                 RunPretrain, {"crawl", "manifest"}, {}, true});
    c.push_back({"fedtrain", "Pre-train on the crawl, then DP federated fine-tuning on users",
                 [=] {
                   return Json{{"crawl", ""}, {"users", ""}, {"manifest", ""},
                               {"pipeline", pipeline_defaults}};
                 },
                 [=](Binder& b) {
                   b.Add<std::string>("--crawl", "/crawl", "crawl corpus (public)");
                   b.Add<std::string>("--users", "/users", "user corpus (private)");
                   pipeline_flags(b);
                 },
                 RunFedtrain, {"crawl", "users", "manifest"}, {}, true});
    c.push_back({"evaluate", "Score a model, or cross-validate baseline against Fed-FP",
                 [=] {
                   return Json{{"model", ""},   {"corpus", ""},  {"users", ""},
                               {"crawl", ""},   {"folds", 5},    {"threshold", 0.5},
                               {"manifest", ""}, {"pipeline", pipeline_defaults}};
                 },
                 [=](Binder& b) {
                   b.Add<std::string>("--model", "/model", "checkpoint to score");
                   b.Add<std::string>("--corpus", "/corpus", "labelled corpus to score");
                   b.Add<std::string>("--users", "/users", "user corpus for cross-validation");
                   b.Add<std::string>("--crawl", "/crawl", "crawl corpus for cross-validation");
                   b.Add<std::uint64_t>("--folds", "/folds", "cross-validation folds");
                   b.Add<double>("--threshold", "/threshold", "decision threshold");
                   pipeline_flags(b);
                 },
                 RunEvaluate, {"model", "corpus", "users", "crawl", "manifest"}, {}, true});
    c.push_back({"collect", "Run the telemetry collector (token from FP_SENTINEL_TOKEN)",
                 [] {
                   CollectorConfig d;
                   return Json{{"host", d.host}, {"port", d.port}, {"spool", d.spool_path},
                               {"max_body_bytes", d.max_body_bytes}};
                 },
                 [](Binder& b) {
                   b.Add<std::string>("--host", "/host", "bind address");
                   b.Add<int>("--port", "/port", "bind port (0 for any)");
                   b.Add<std::string>("--spool", "/spool", "spool JSONL file");
                   b.Add<std::size_t>("--max-body-bytes", "/max_body_bytes", "request size limit");
                 },
                 RunCollect, {}, {}, false});
    return c;
  }();
  return kCommands;
}

inline const CommandSpec* FindCommand(std::string_view name) {
  for (const auto& c : Commands()) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

inline std::vector<std::string> PathsOf(const Json& cfg, const std::vector<std::string>& keys) {
  std::vector<std::string> out;
  for (const auto& k : keys) {
    if (!cfg.contains(k)) continue;
    const Json& v = cfg[k];
    if (v.is_string() && !v.get<std::string>().empty()) out.push_back(v.get<std::string>());
    if (v.is_array()) {
      for (const auto& p : v) out.push_back(p.get<std::string>());
    }
  }
  return out;
}

inline void Execute(const CommandSpec& spec, const Json& cfg, Context& ctx) {
  const std::string started = UtcTimestamp();
  spec.run(cfg, ctx);
  const std::string out = Str(cfg, "out");
  if (!spec.writes_manifest || out.empty()) return;
  std::vector<std::string> outputs{out};
  for (auto& p : PathsOf(cfg, spec.extra_output_keys)) outputs.push_back(std::move(p));
  const Json manifest{{"format", kRunManifestFormat},
                      {"version", 1},
                      {"command", spec.name},
                      {"argv", ctx.argv},
                      {"config", cfg},
                      {"inputs", PathsOf(cfg, spec.input_keys)},
                      {"outputs", outputs},
                      {"seed", cfg.value("seed", std::uint64_t{0})},
                      {"tool_version", std::string(kVersion)},
                      {"started_at", started},
                      {"finished_at", UtcTimestamp()}};
  WriteTextFile(RunManifestPath(out), manifest.dump(2) + "\n");
}

inline void Replay(const std::string& manifest_path, const std::string& out_override,
                   Context& ctx) {
  const Json m = ReadJsonFile(manifest_path);
  if (m.value("format", "") != kRunManifestFormat || m.value("version", 0) != 1) {
    throw Error(ErrorCode::kVersion, "not an fp-run-manifest v1 document: " + manifest_path);
  }
  const CommandSpec* spec = FindCommand(m.value("command", ""));
  if (spec == nullptr || !spec->writes_manifest) {
    throw Error(ErrorCode::kValidation, "manifest names no replayable command");
  }
  if (m.value("tool_version", "") != kVersion) {
    ctx.err << "warning: manifest written by version " << m.value("tool_version", "?") << '\n';
  }
  Json cfg = m.at("config");
  if (!out_override.empty()) cfg["out"] = out_override;
  Execute(*spec, cfg, ctx);
}

inline int ExitCodeFor(const Error& e) { return e.code() == ErrorCode::kIo ? 2 : 1; }

}  // namespace cli_internal

// Parses argv, runs one subcommand and returns the process exit code.
inline int CliDispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  using namespace cli_internal;
  CLI::App app{"fpsentinel: browser fingerprinting detection toolkit", "fpsentinel"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(kVersion));
  std::string config_path, format, out_path;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--config", config_path, "JSON configuration file");
  CLI::Option* format_opt =
      app.add_option("--format", format, "output format")->check(CLI::IsMember({"json", "table"}));
  CLI::Option* out_opt = app.add_option("-o,--out", out_path, "output path");

  std::vector<std::pair<const CommandSpec*, CLI::App*>> subs;
  std::vector<std::unique_ptr<Binder>> binders;
  for (const auto& spec : Commands()) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.help);
    sub->fallthrough();
    binders.push_back(std::make_unique<Binder>(sub));
    spec.flags(*binders.back());
    subs.emplace_back(&spec, sub);
  }
  std::string replay_manifest;
  CLI::App* replay = app.add_subcommand("replay", "Re-run a command from its run manifest");
  replay->fallthrough();
  replay->add_option("--manifest", replay_manifest, "run manifest JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? std::string(kVersion) + "\n"
                                                            : app.help());
      return 0;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  Context ctx{out, err, std::vector<std::string>(argv, argv + argc)};
  try {
    if (replay->parsed()) {
      Replay(replay_manifest, out_path, ctx);
      return 0;
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i].second->parsed()) continue;
      const CommandSpec& spec = *subs[i].first;
      Json cfg = WithGlobals(spec.defaults());
      if (!config_path.empty()) {
        const Json patch = ReadJsonFile(config_path);
        if (!patch.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
        MergeInto(cfg, patch);
      }
      binders[i]->Apply(cfg);
      if (seed_opt->count()) cfg["seed"] = seed;
      if (format_opt->count()) cfg["format"] = format;
      if (out_opt->count()) cfg["out"] = out_path;
      ParseOutputFormat(cfg.value("format", std::string("table")));
      Execute(spec, cfg, ctx);
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCodeFor(e);
  } catch (const Json::exception& e) {
    err << "error: malformed configuration: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 1;
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_CLI_HPP_
