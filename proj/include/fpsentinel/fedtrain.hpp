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

// Logistic-regression fingerprinting classifier: centralized pre-training on
// public crawl data and differentially private federated fine-tuning over
// simulated users.
//
// Each federated round samples m of N clients without replacement, runs local
// SGD from the current global model, clips every update to L2 norm C, sums
// the clipped updates in client-id order, adds N(0, (sigma*C)^2) noise per
// coordinate and applies the sum divided by m to the global model. Privacy is
// accounted at the client level by the RDP accountant.

#ifndef FPSENTINEL_FEDTRAIN_HPP_
#define FPSENTINEL_FEDTRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fpsentinel/accountant.hpp"
#include "fpsentinel/common.hpp"
#include "fpsentinel/features.hpp"
#include "fpsentinel/telemetry.hpp"
#include "json.hpp"

namespace fpsentinel {

struct ModelParams {
  std::vector<double> weights;
  double bias = 0.0;

  static ModelParams Zero(std::size_t dimension) {
    ModelParams p;
    p.weights.assign(dimension, 0.0);
    return p;
  }
  std::size_t dimension() const noexcept { return weights.size(); }
};

inline double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double Logit(const ModelParams& p, std::span<const double> x) {
  if (x.size() != p.weights.size()) {
    throw Error(ErrorCode::kDimension, "feature dimension mismatch");
  }
  double z = p.bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += p.weights[i] * x[i];
  return z;
}

inline double Predict(const ModelParams& p, const FeatureVector& v) {
  return Sigmoid(Logit(p, v.values));
}

inline std::vector<double> PredictAll(const ModelParams& p,
                                      std::span<const FeatureVector> vectors) {
  std::vector<double> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(Predict(p, v));
  return out;
}

// Mean binary cross-entropy over `rows`.
inline double LogisticLoss(const ModelParams& p,
                           std::span<const FeatureVector> data,
                           std::span<const std::uint32_t> rows) {
  double loss = 0.0;
  for (std::uint32_t r : rows) {
    const double z = Logit(p, data[r].values);
    // log(1 + e^z) - y z, computed stably.
    const double softplus =
        z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += softplus - (data[r].label ? z : 0.0);
  }
  return rows.empty() ? 0.0 : loss / static_cast<double>(rows.size());
}

// Gradient of LogisticLoss, weights followed by bias.
inline std::vector<double> LogisticGradient(
    const ModelParams& p, std::span<const FeatureVector> data,
    std::span<const std::uint32_t> rows) {
  std::vector<double> g(p.dimension() + 1, 0.0);
  if (rows.empty()) return g;
  for (std::uint32_t r : rows) {
    const auto& x = data[r].values;
    const double err = Sigmoid(Logit(p, x)) - (data[r].label ? 1.0 : 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += err * x[i];
    g.back() += err;
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& v : g) v *= inv;
  return g;
}

// Mini-batch gradient descent over `rows`. Each epoch visits rows in an order
// shuffled with DeriveSeed(seed, epoch).
inline void TrainSgd(ModelParams& p, std::span<const FeatureVector> data,
                     std::span<const std::uint32_t> rows, std::uint32_t epochs,
                     double lr, std::uint32_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  std::vector<std::uint32_t> order(rows.begin(), rows.end());
  for (std::uint32_t e = 0; e < epochs; ++e) {
    std::mt19937_64 rng(DeriveSeed(seed, e));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min<std::size_t>(batch_size, order.size() - start);
      const auto g = LogisticGradient(
          p, data, std::span<const std::uint32_t>(order.data() + start, len));
      for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= lr * g[i];
      p.bias -= lr * g.back();
    }
  }
}

struct PretrainResult {
  ModelParams model;
  bool single_class = false;  // data contained only one label
};

inline PretrainResult PretrainCentralized(
    std::span<const FeatureVector> public_vectors, std::uint32_t epochs,
    double lr, std::uint64_t seed, std::uint32_t batch_size = 32) {
  if (public_vectors.empty()) {
    throw Error(ErrorCode::kValidation, "no pre-training data");
  }
  const std::size_t d = public_vectors.front().values.size();
  std::vector<std::uint32_t> rows(public_vectors.size());
  std::iota(rows.begin(), rows.end(), 0u);
  std::size_t positives = 0;
  for (const auto& v : public_vectors) {
    if (v.values.size() != d) {
      throw Error(ErrorCode::kDimension, "feature dimension mismatch");
    }
    for (double x : v.values) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kValidation, "non-finite feature");
    }
    positives += v.label ? 1 : 0;
  }
  PretrainResult out;
  out.model = ModelParams::Zero(d);
  out.single_class = positives == 0 || positives == public_vectors.size();
  TrainSgd(out.model, public_vectors, rows, epochs, lr, batch_size, seed);
  return out;
}

// ---------------------------------------------------------------------------
// Federated configuration and client simulation

struct TrainingConfig {
  std::uint64_t rounds = 100;
  std::uint64_t clients_per_round = 1000;
  std::uint64_t total_clients = 1'000'000;
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  std::uint32_t local_epochs = 1;
  double local_lr = 0.1;
  std::uint32_t batch_size = 32;
  std::uint64_t seed = 0;

  double sampling_rate() const {
    return static_cast<double>(clients_per_round) /
           static_cast<double>(total_clients);
  }

  void Validate() const {
    if (total_clients < 1) throw Error(ErrorCode::kConfig, "total_clients must be >= 1");
    if (clients_per_round < 1 || clients_per_round > total_clients) {
      throw Error(ErrorCode::kConfig, "clients_per_round must be in [1, total_clients]");
    }
    if (!(clip_norm > 0.0)) throw Error(ErrorCode::kConfig, "clip_norm must be > 0");
    if (noise_multiplier < 0.0 || !std::isfinite(noise_multiplier)) {
      throw Error(ErrorCode::kConfig, "noise_multiplier must be >= 0");
    }
    if (local_epochs < 1) throw Error(ErrorCode::kConfig, "local_epochs must be >= 1");
    if (!(local_lr > 0.0)) throw Error(ErrorCode::kConfig, "local_lr must be > 0");
    if (batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  }
};

inline Json TrainingConfigToJson(const TrainingConfig& c, const PrivacyBudget& b) {
  return Json{{"rounds", c.rounds},
              {"clients_per_round", c.clients_per_round},
              {"total_clients", c.total_clients},
              {"clip_norm", c.clip_norm},
              {"noise_multiplier", c.noise_multiplier},
              {"local_epochs", c.local_epochs},
              {"local_lr", c.local_lr},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"epsilon", std::isfinite(b.epsilon) ? Json(b.epsilon) : Json(nullptr)},
              {"delta", b.delta}};
}

// Missing keys keep their current values.
inline void TrainingConfigFromJson(const Json& j, TrainingConfig& c,
                                   PrivacyBudget& b) {
  try {
    c.rounds = j.value("rounds", c.rounds);
    c.clients_per_round = j.value("clients_per_round", c.clients_per_round);
    c.total_clients = j.value("total_clients", c.total_clients);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.noise_multiplier = j.value("noise_multiplier", c.noise_multiplier);
    c.local_epochs = j.value("local_epochs", c.local_epochs);
    c.local_lr = j.value("local_lr", c.local_lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("epsilon")) {
      b.epsilon = j["epsilon"].is_null() ? std::numeric_limits<double>::infinity()
                                         : j["epsilon"].get<double>();
    }
    b.delta = j.value("delta", b.delta);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed training config: ") + e.what());
  }
}

// Rank-based Zipf distribution over ranks 1..n: P(k) proportional to k^-s.
class ZipfDistribution {
 public:
  ZipfDistribution(std::size_t n, double exponent) : exponent_(exponent) {
    if (n < 1) throw Error(ErrorCode::kConfig, "Zipf support must be nonempty");
    if (!(exponent > 0.0)) throw Error(ErrorCode::kConfig, "Zipf exponent must be > 0");
    cdf_.resize(n);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      total += std::pow(static_cast<double>(k + 1), -exponent);
      cdf_[k] = total;
    }
    for (double& c : cdf_) c /= total;
    cdf_.back() = 1.0;
    norm_ = total;
  }

  std::size_t size() const noexcept { return cdf_.size(); }

  // Probability of the 0-based rank index k.
  double Probability(std::size_t k) const {
    return std::pow(static_cast<double>(k + 1), -exponent_) / norm_;
  }

  // Returns a 0-based rank index.
  template <class Urbg>
  std::size_t operator()(Urbg& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1);
  }

 private:
  double exponent_;
  double norm_ = 1.0;
  std::vector<double> cdf_;
};

// A simulated user: the distinct sites it visited, as indices into
// ClientPartition::site_rows. Its data are all rows of those sites.
struct ClientShard {
  std::uint64_t client_id = 0;
  std::vector<std::uint32_t> sites;
};

struct ClientPartition {
  std::vector<std::string> sites;                    // by rank
  std::vector<std::vector<std::uint32_t>> site_rows; // vector rows per site
  std::vector<ClientShard> shards;

  std::vector<std::uint32_t> Rows(const ClientShard& shard) const {
    std::vector<std::uint32_t> rows;
    for (std::uint32_t s : shard.sites) {
      rows.insert(rows.end(), site_rows[s].begin(), site_rows[s].end());
    }
    return rows;
  }
};

inline constexpr std::uint32_t kDefaultVisitsPerClient = 10;

// Each client draws `visits_per_client` site visits from a Zipf(s)
// distribution over the websites ordered by rank.
inline ClientPartition PartitionClients(
    std::span<const FeatureVector> vectors,
    std::span<const WebsiteRecord> websites, std::uint64_t num_clients,
    double zipf_exponent, std::uint64_t seed,
    std::uint32_t visits_per_client = kDefaultVisitsPerClient) {
  if (num_clients < 1) throw Error(ErrorCode::kConfig, "N must be >= 1");
  if (!(zipf_exponent > 0.0)) throw Error(ErrorCode::kConfig, "Zipf exponent must be > 0");
  if (websites.empty()) throw Error(ErrorCode::kValidation, "no websites to sample");
  std::vector<const WebsiteRecord*> ranked;
  for (const auto& w : websites) ranked.push_back(&w);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const WebsiteRecord* a, const WebsiteRecord* b) {
                     return std::tie(a->rank, a->site) < std::tie(b->rank, b->site);
                   });
  ClientPartition out;
  std::unordered_map<std::string, std::uint32_t> index;
  for (const auto* w : ranked) {
    index.emplace(w->site, static_cast<std::uint32_t>(out.sites.size()));
    out.sites.push_back(w->site);
  }
  out.site_rows.resize(out.sites.size());
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    const auto it = index.find(vectors[r].site);
    if (it == index.end()) {
      throw Error(ErrorCode::kValidation,
                  "vector site not among websites: " + vectors[r].site);
    }
    out.site_rows[it->second].push_back(static_cast<std::uint32_t>(r));
  }
  const ZipfDistribution zipf(out.sites.size(), zipf_exponent);
  out.shards.resize(num_clients);
  for (std::uint64_t c = 0; c < num_clients; ++c) {
    std::mt19937_64 rng(DeriveSeed(seed, 0x51u, c));
    std::vector<std::uint32_t> visited;
    visited.reserve(visits_per_client);
    for (std::uint32_t v = 0; v < visits_per_client; ++v) {
      visited.push_back(static_cast<std::uint32_t>(zipf(rng)));
    }
    std::sort(visited.begin(), visited.end());
    visited.erase(std::unique(visited.begin(), visited.end()), visited.end());
    out.shards[c].client_id = c;
    out.shards[c].sites = std::move(visited);
  }
  return out;
}

struct ClientUpdate {
  std::vector<double> delta;  // weights followed by bias
  double norm = 0.0;          // L2 norm of delta before clipping
  bool empty = false;         // client had no data
};

inline double L2Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline ClientUpdate LocalTrain(const ModelParams& params,
                               std::span<const FeatureVector> data,
                               std::span<const std::uint32_t> rows,
                               const TrainingConfig& cfg, std::uint64_t seed) {
  ClientUpdate u;
  u.delta.assign(params.dimension() + 1, 0.0);
  if (rows.empty()) {
    u.empty = true;
    return u;
  }
  for (std::uint32_t r : rows) {
    if (data[r].values.size() != params.dimension()) {
      throw Error(ErrorCode::kDimension, "feature dimension mismatch");
    }
  }
  ModelParams local = params;
  TrainSgd(local, data, rows, cfg.local_epochs, cfg.local_lr, cfg.batch_size,
           seed);
  for (std::size_t i = 0; i < params.dimension(); ++i) {
    u.delta[i] = local.weights[i] - params.weights[i];
  }
  u.delta.back() = local.bias - params.bias;
  u.norm = L2Norm(u.delta);
  return u;
}

inline ClientUpdate ClipUpdate(ClientUpdate u, double clip_norm) {
  if (!(clip_norm > 0.0)) throw Error(ErrorCode::kConfig, "clip norm must be > 0");
  const double norm = L2Norm(u.delta);
  if (norm > clip_norm) {
    const double factor = clip_norm / norm;
    for (double& x : u.delta) x *= factor;
  }
  return u;
}

// (sum of updates + N(0, (sigma*C)^2) per coordinate) / m. Updates are summed
// in the order given.
inline std::vector<double> AggregateWithNoise(
    std::span<const ClientUpdate> updates, double clip_norm,
    double noise_multiplier, std::uint64_t clients_per_round,
    std::uint64_t seed) {
  if (updates.empty()) throw Error(ErrorCode::kValidation, "no client updates");
  if (clients_per_round < 1) throw Error(ErrorCode::kConfig, "m must be >= 1");
  const std::size_t d = updates.front().delta.size();
  std::vector<double> sum(d, 0.0);
  for (const auto& u : updates) {
    if (u.delta.size() != d) throw Error(ErrorCode::kDimension, "update dimension mismatch");
    for (std::size_t i = 0; i < d; ++i) sum[i] += u.delta[i];
  }
  if (noise_multiplier > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, noise_multiplier * clip_norm);
    for (double& x : sum) x += normal(rng);
  }
  const double inv = 1.0 / static_cast<double>(clients_per_round);
  for (double& x : sum) x *= inv;
  return sum;
}

// Seed used by client `client_id` for local training in round `round`.
inline std::uint64_t RoundClientSeed(std::uint64_t seed, std::uint64_t round,
                                     std::uint64_t client_id) {
  return DeriveSeed(seed, 0x10000u + round, client_id);
}

inline std::uint64_t RoundNoiseSeed(std::uint64_t seed, std::uint64_t round) {
  return DeriveSeed(seed, 0x20000u + round, 0);
}

// m distinct ids from [0, n), sorted (Floyd's algorithm).
inline std::vector<std::uint64_t> SampleClients(std::uint64_t n, std::uint64_t m,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = n - m; j < n; ++j) {
    const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

inline double FederatedEpsilon(const TrainingConfig& cfg, double delta) {
  return ComputeEpsilon(cfg.noise_multiplier, cfg.sampling_rate(), cfg.rounds,
                        delta);
}

struct FederatedResult {
  ModelParams model;
  double epsilon_spent = 0.0;
  double max_update_norm = 0.0;  // largest pre-clip client update norm seen
};

inline FederatedResult RunFederatedTraining(
    const ModelParams& init, std::span<const FeatureVector> data,
    const ClientPartition& partition, const TrainingConfig& cfg,
    const PrivacyBudget& budget) {
  cfg.Validate();
  budget.Validate();
  if (partition.shards.empty()) throw Error(ErrorCode::kValidation, "no client shards");
  if (partition.shards.size() != cfg.total_clients) {
    throw Error(ErrorCode::kConfig, "total_clients does not match shard count");
  }
  FederatedResult out;
  out.model = init;
  if (cfg.rounds == 0) return out;
  out.epsilon_spent = FederatedEpsilon(cfg, budget.delta);
  if (out.epsilon_spent > budget.epsilon) {
    throw Error(ErrorCode::kInfeasible, "infeasible privacy budget");
  }
  const std::size_t d = init.dimension();
  for (std::uint64_t round = 0; round < cfg.rounds; ++round) {
    const auto selected =
        SampleClients(cfg.total_clients, cfg.clients_per_round,
                      DeriveSeed(cfg.seed, 0x30000u + round));
    std::vector<ClientUpdate> updates;
    updates.reserve(selected.size());
    for (std::uint64_t id : selected) {
      const auto rows = partition.Rows(partition.shards[id]);
      ClientUpdate u = LocalTrain(out.model, data, rows, cfg,
                                  RoundClientSeed(cfg.seed, round, id));
      out.max_update_norm = std::max(out.max_update_norm, u.norm);
      u = ClipUpdate(std::move(u), cfg.clip_norm);
      if (L2Norm(u.delta) > cfg.clip_norm * (1.0 + 1e-12)) {
        throw Error(ErrorCode::kValidation, "clipping bound violated");
      }
      updates.push_back(std::move(u));
    }
    const auto delta =
        AggregateWithNoise(updates, cfg.clip_norm, cfg.noise_multiplier,
                           cfg.clients_per_round, RoundNoiseSeed(cfg.seed, round));
    for (std::size_t i = 0; i < d; ++i) out.model.weights[i] += delta[i];
    out.model.bias += delta[d];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  FeatureVocabulary vocabulary;
  NormalizationStats normalization;
  ModelParams model;
  double epsilon_spent = 0.0;
};

inline Json CheckpointToJson(const Checkpoint& c) {
  return Json{{"format", "fp-model"},
              {"version", 1},
              {"vocabulary_hash", c.vocabulary.Hash()},
              {"weights", c.model.weights},
              {"bias", c.model.bias},
              {"epsilon_spent", std::isfinite(c.epsilon_spent)
                                    ? Json(c.epsilon_spent)
                                    : Json(nullptr)},
              {"vocabulary", VocabularyToJson(c.vocabulary)},
              {"normalization", StatsToJson(c.normalization, c.vocabulary)}};
}

inline Checkpoint CheckpointFromJson(const Json& j) {
  if (j.value("format", "") != "fp-model" || j.value("version", 0) != 1) {
    throw Error(ErrorCode::kVersion, "not an fp-model v1 checkpoint");
  }
  try {
    Checkpoint c;
    c.vocabulary = VocabularyFromJson(j.at("vocabulary"));
    if (j.at("vocabulary_hash").get<std::string>() != c.vocabulary.Hash()) {
      throw Error(ErrorCode::kValidation, "checkpoint vocabulary hash mismatch");
    }
    c.normalization = StatsFromJson(j.at("normalization"), c.vocabulary);
    c.model.weights = j.at("weights").get<std::vector<double>>();
    c.model.bias = j.at("bias").get<double>();
    c.epsilon_spent = j.at("epsilon_spent").is_null()
                          ? std::numeric_limits<double>::infinity()
                          : j.at("epsilon_spent").get<double>();
    if (c.model.weights.size() != c.vocabulary.dimension()) {
      throw Error(ErrorCode::kDimension, "checkpoint weight dimension mismatch");
    }
    return c;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("malformed checkpoint: ") + e.what());
  }
}

inline void SaveCheckpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << CheckpointToJson(c).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

inline Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  return CheckpointFromJson(j);
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_FEDTRAIN_HPP_
