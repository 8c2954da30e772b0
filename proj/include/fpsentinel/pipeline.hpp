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

// End-to-end training recipes.
//
//   Baseline:  centralized logistic regression on the crawl corpus, with
//              exact normalization statistics of that corpus.
//   Fed-FP:    simulated users re-sampled by website rank; DP federated
//              feature normalization over the users; non-private
//              pre-training on the crawl corpus; DP federated fine-tuning on
//              the users' data.

#ifndef FPSENTINEL_PIPELINE_HPP_
#define FPSENTINEL_PIPELINE_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fpsentinel/accountant.hpp"
#include "fpsentinel/analysis.hpp"
#include "fpsentinel/features.hpp"
#include "fpsentinel/fedtrain.hpp"
#include "fpsentinel/manifest.hpp"
#include "fpsentinel/telemetry.hpp"

namespace fpsentinel {

struct PipelineOptions {
  TrainingConfig federated;
  PrivacyBudget budget{5.0, kDefaultDelta};
  std::optional<double> noise_multiplier;  // calibrated from budget when unset
  CalibrationGrid grid;
  std::uint32_t pretrain_epochs = 20;
  double pretrain_lr = 0.1;
  std::uint32_t pretrain_batch = 32;
  double zipf_exponent = 1.0;
  std::uint32_t visits_per_client = kDefaultVisitsPerClient;
  double normalization_noise = 0.1;
  double clip_percentile = 0.99;
  std::uint64_t seed = 0;
};

// `noise_multiplier` null means calibrate from the budget. The federated
// block carries rounds, clients, clip norm, learning rate and the budget.
inline Json PipelineOptionsToJson(const PipelineOptions& o) {
  Json fed = TrainingConfigToJson(o.federated, o.budget);
  fed.erase("noise_multiplier");
  fed.erase("seed");
  return Json{{"federated", fed},
              {"noise_multiplier",
               o.noise_multiplier ? Json(*o.noise_multiplier) : Json(nullptr)},
              {"grid_step", o.grid.step},
              {"grid_max_sigma", o.grid.max_sigma},
              {"pretrain_epochs", o.pretrain_epochs},
              {"pretrain_lr", o.pretrain_lr},
              {"pretrain_batch", o.pretrain_batch},
              {"zipf_exponent", o.zipf_exponent},
              {"visits_per_client", o.visits_per_client},
              {"normalization_noise", o.normalization_noise},
              {"clip_percentile", o.clip_percentile}};
}

// Missing keys keep their current values. The seed is not part of the block.
inline void PipelineOptionsFromJson(const Json& j, PipelineOptions& o) {
  try {
    if (j.contains("federated")) TrainingConfigFromJson(j["federated"], o.federated, o.budget);
    if (j.contains("noise_multiplier")) {
      o.noise_multiplier = j["noise_multiplier"].is_null()
                               ? std::nullopt
                               : std::optional<double>(j["noise_multiplier"].get<double>());
    }
    o.grid.step = j.value("grid_step", o.grid.step);
    o.grid.max_sigma = j.value("grid_max_sigma", o.grid.max_sigma);
    o.pretrain_epochs = j.value("pretrain_epochs", o.pretrain_epochs);
    o.pretrain_lr = j.value("pretrain_lr", o.pretrain_lr);
    o.pretrain_batch = j.value("pretrain_batch", o.pretrain_batch);
    o.zipf_exponent = j.value("zipf_exponent", o.zipf_exponent);
    o.visits_per_client = j.value("visits_per_client", o.visits_per_client);
    o.normalization_noise = j.value("normalization_noise", o.normalization_noise);
    o.clip_percentile = j.value("clip_percentile", o.clip_percentile);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed pipeline options: ") + e.what());
  }
  o.budget.Validate();
  if (o.pretrain_epochs < 1 || o.pretrain_batch < 1 || !(o.pretrain_lr > 0.0)) {
    throw Error(ErrorCode::kConfig, "pretraining hyperparameters must be positive");
  }
  if (!(o.clip_percentile > 0.0 && o.clip_percentile <= 1.0)) {
    throw Error(ErrorCode::kConfig, "clip_percentile must be in (0, 1]");
  }
}

struct FedFpResult {
  Checkpoint checkpoint;
  double noise_multiplier = 0.0;
  double max_update_norm = 0.0;
};

inline std::vector<FeatureVector> Gather(std::span<const FeatureVector> all,
                                         std::span<const std::size_t> idx) {
  std::vector<FeatureVector> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

inline Checkpoint TrainCrawlBaseline(std::span<const FeatureVector> crawl,
                                     const FeatureVocabulary& vocab,
                                     const PipelineOptions& opts) {
  Checkpoint c;
  c.vocabulary = vocab;
  c.normalization = ExactNormalization(crawl, vocab.dimension());
  const auto train = ApplyNormalization(crawl, c.normalization);
  c.model = PretrainCentralized(train, opts.pretrain_epochs, opts.pretrain_lr,
                                DeriveSeed(opts.seed, 0xBA5Eu), opts.pretrain_batch)
                .model;
  c.epsilon_spent = 0.0;  // public data only
  return c;
}

inline FedFpResult TrainFedFp(std::span<const FeatureVector> crawl,
                              std::span<const FeatureVector> user_train,
                              std::span<const WebsiteRecord> websites,
                              const FeatureVocabulary& vocab,
                              const PipelineOptions& opts) {
  const std::size_t d = vocab.dimension();
  TrainingConfig cfg = opts.federated;
  cfg.Validate();
  FedFpResult out;
  out.noise_multiplier =
      opts.noise_multiplier
          ? *opts.noise_multiplier
          : CalibrateNoise(opts.budget, cfg.rounds, cfg.sampling_rate(), opts.grid);
  cfg.noise_multiplier = out.noise_multiplier;
  if (FederatedEpsilon(cfg, opts.budget.delta) > opts.budget.epsilon) {
    throw Error(ErrorCode::kInfeasible, "infeasible privacy budget");
  }

  const ClientPartition partition =
      PartitionClients(user_train, websites, cfg.total_clients, opts.zipf_exponent,
                       DeriveSeed(opts.seed, 0xC11Eu), opts.visits_per_client);

  // Federated feature normalization; the clip bound comes from public data.
  const double clip = PercentileClipBound(crawl, opts.clip_percentile);
  std::vector<ClientFeatureSummary> summaries;
  summaries.reserve(partition.shards.size());
  std::vector<FeatureVector> scratch;
  for (const auto& shard : partition.shards) {
    scratch.clear();
    for (std::uint32_t r : partition.Rows(shard)) scratch.push_back(user_train[r]);
    summaries.push_back(SummarizeClient(scratch, d, clip));
  }
  Checkpoint& c = out.checkpoint;
  c.vocabulary = vocab;
  c.normalization = DpFederatedNormalize(summaries, clip, opts.normalization_noise,
                                         DeriveSeed(opts.seed, 0x404Du),
                                         opts.budget.delta);

  const auto crawl_norm = ApplyNormalization(crawl, c.normalization);
  const auto user_norm = ApplyNormalization(user_train, c.normalization);
  const ModelParams init =
      PretrainCentralized(crawl_norm, opts.pretrain_epochs, opts.pretrain_lr,
                          DeriveSeed(opts.seed, 0xBA5Eu), opts.pretrain_batch)
          .model;
  cfg.seed = DeriveSeed(opts.seed, 0xFEDu);
  const FederatedResult fed =
      RunFederatedTraining(init, user_norm, partition, cfg, opts.budget);
  c.model = fed.model;
  c.epsilon_spent = fed.epsilon_spent;
  out.max_update_norm = fed.max_update_norm;
  return out;
}

inline std::vector<ScoredExample> Score(const Checkpoint& c,
                                        std::span<const FeatureVector> raw) {
  std::vector<ScoredExample> out;
  out.reserve(raw.size());
  for (const auto& v : raw) {
    out.push_back({Predict(c.model, ApplyNormalization(v, c.normalization)), v.label});
  }
  return out;
}

struct Table4Result {
  std::vector<MetricsReport> baseline_folds;
  std::vector<MetricsReport> fedfp_folds;
  std::vector<double> noise_multipliers;
  std::vector<double> epsilons;
  CrossValidationSummary baseline;
  CrossValidationSummary fedfp;
};

// k-fold stratified cross-validation over the user corpus. The crawl-only
// baseline is trained once; Fed-FP is retrained per fold on the training
// folds. Both are scored on each held-out fold at `threshold`.
inline Table4Result RunTable4Protocol(const Corpus& user, const Corpus& crawl,
                                      const Manifest& manifest,
                                      const PipelineOptions& opts,
                                      std::size_t folds = 5,
                                      double threshold = 0.5) {
  const FeatureVocabulary vocab = BuildVocabulary(manifest);
  const auto user_vectors = ExtractCorpusFeatures(user, vocab, manifest);
  const auto crawl_vectors = ExtractCorpusFeatures(crawl, vocab, manifest);
  const Checkpoint baseline = TrainCrawlBaseline(crawl_vectors, vocab, opts);
  Table4Result out;
  const auto splits =
      StratifiedKFold(Labels(user_vectors), folds, DeriveSeed(opts.seed, 0xF01Du));
  for (std::size_t f = 0; f < splits.size(); ++f) {
    const auto train = Gather(user_vectors, splits[f].train);
    const auto test = Gather(user_vectors, splits[f].test);
    PipelineOptions fold_opts = opts;
    fold_opts.seed = DeriveSeed(opts.seed, 0xF0u, f);
    const FedFpResult fed = TrainFedFp(crawl_vectors, train, user.websites, vocab, fold_opts);
    out.noise_multipliers.push_back(fed.noise_multiplier);
    out.epsilons.push_back(fed.checkpoint.epsilon_spent);
    out.baseline_folds.push_back(ComputeMetrics(Score(baseline, test), threshold));
    out.fedfp_folds.push_back(ComputeMetrics(Score(fed.checkpoint, test), threshold));
  }
  out.baseline = SummarizeFolds(out.baseline_folds);
  out.fedfp = SummarizeFolds(out.fedfp_folds);
  return out;
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_PIPELINE_HPP_
