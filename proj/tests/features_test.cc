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

#include "fpsentinel/features.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_util.hpp"

namespace fpsentinel {
namespace {

Manifest CountsOnly(std::size_t n) {
  Manifest m;
  for (std::size_t i = 0; i < n; ++i) {
    m.monitored.push_back(ApiIdentifier::Canonicalize("api" + std::to_string(i) + ".call"));
  }
  return m;
}

FeatureVector Vec(std::vector<double> v) {
  FeatureVector f;
  f.values = std::move(v);
  return f;
}

// Pooled mean and population std over clipped data, computed in one place.
void PooledOracle(const std::vector<std::vector<FeatureVector>>& clients, double clip,
                  std::vector<double>& mean, std::vector<double>& std) {
  const std::size_t d = clients.front().front().values.size();
  std::vector<double> all_values;
  mean.assign(d, 0.0);
  std.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> col;
    for (const auto& c : clients) {
      for (const auto& v : c) col.push_back(std::min(v.values[i], clip));
    }
    double m = 0.0;
    for (double x : col) m += x;
    m /= static_cast<double>(col.size());
    double ss = 0.0;
    for (double x : col) ss += (x - m) * (x - m);
    mean[i] = m;
    std[i] = std::sqrt(ss / static_cast<double>(col.size()));
  }
}

TEST(VocabularyTest, DimensionCountsApisAndCustomFields) {
  Manifest m = CountsOnly(10);
  EXPECT_EQ(BuildVocabulary(m).dimension(), 10u);
  m.custom_features.push_back({m.monitored[3], CustomField::kMaxStringArgLen});
  EXPECT_EQ(BuildVocabulary(m).dimension(), 11u);
}

TEST(VocabularyTest, CanonicalOrderIgnoresInputPermutation) {
  Manifest a = CountsOnly(12);
  Manifest b = a;
  std::mt19937_64 rng(3);
  std::shuffle(b.monitored.begin(), b.monitored.end(), rng);
  EXPECT_EQ(BuildVocabulary(a).entries(), BuildVocabulary(b).entries());
  EXPECT_EQ(BuildVocabulary(a).Hash(), BuildVocabulary(b).Hash());
}

TEST(VocabularyTest, RejectsDuplicatesAndEmpty) {
  Manifest m = CountsOnly(2);
  m.monitored.push_back(m.monitored[0]);
  EXPECT_THROW(BuildVocabulary(m), Error);
  EXPECT_THROW(BuildVocabulary(Manifest{}), Error);
}

TEST(VocabularyTest, JsonRoundTrip) {
  const auto v = BuildVocabulary(Manifest::Default());
  const auto back = VocabularyFromJson(VocabularyToJson(v));
  EXPECT_EQ(back.entries(), v.entries());
  Json tampered = VocabularyToJson(v);
  tampered["hash"] = "0000000000000000";
  EXPECT_THROW(VocabularyFromJson(tampered), Error);
}

TEST(ExtractFeaturesTest, EmptyTraceIsZeroVector) {
  const auto vocab = BuildVocabulary(Manifest::Default());
  const auto v = ExtractFeatures(testutil::MakeTrace("x.com", "/", 1, {}), vocab, false);
  EXPECT_EQ(v.values, std::vector<double>(vocab.dimension(), 0.0));
}

TEST(ExtractFeaturesTest, ProjectsCountsAndCustomFields) {
  const auto vocab = BuildVocabulary(Manifest::Default());
  auto t = testutil::MakeTrace("x.com", "/", 1,
                               {{"canvasrenderingcontext2d.filltext", 5},
                                {"not.in.vocabulary", 9}});
  t.aggregates.begin()->second.max_string_arg_len = 14;
  const auto v = ExtractFeatures(t, vocab, true);
  const auto filltext = ApiIdentifier::Canonicalize("canvasrenderingcontext2d.filltext");
  const auto i = vocab.IndexOf({FeatureKind::kCallCount, filltext, std::nullopt});
  const auto j = vocab.IndexOf({FeatureKind::kCustom, filltext, CustomField::kMaxStringArgLen});
  ASSERT_TRUE(i && j);
  EXPECT_EQ(v.values[*i], 5.0);
  EXPECT_EQ(v.values[*j], 14.0);
  double total = 0.0;
  for (double x : v.values) total += x;
  EXPECT_EQ(total, 19.0);  // the out-of-vocabulary API adds nothing
  EXPECT_TRUE(v.label);
}

TEST(DpFederatedNormalizeTest, SingleClientHandArithmetic) {
  const std::vector<FeatureVector> data = {Vec({0.0}), Vec({2.0})};
  const auto s = SummarizeClient(data, 1, 10.0);
  const auto stats = DpFederatedNormalize(std::span(&s, 1), 10.0, 0.0, 1);
  EXPECT_DOUBLE_EQ(stats.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(stats.scale[0], 1.0);
}

TEST(DpFederatedNormalizeTest, NoiselessMatchesPooledOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::vector<std::vector<FeatureVector>> clients(37);
  for (auto& c : clients) {
    const int n = 1 + static_cast<int>(rng() % 9);
    for (int k = 0; k < n; ++k) c.push_back(Vec({u(rng), u(rng), 0.0, u(rng) * 3}));
  }
  for (const double clip : {100.0, 4.0}) {
    std::vector<ClientFeatureSummary> sums;
    for (const auto& c : clients) sums.push_back(SummarizeClient(c, 4, clip));
    const auto stats = DpFederatedNormalize(sums, clip, 0.0, 0);
    std::vector<double> mean, std;
    PooledOracle(clients, clip, mean, std);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(stats.mean[i], mean[i], 1e-12 * std::max(1.0, std::abs(mean[i])));
      EXPECT_NEAR(stats.scale[i], std::max(std[i], kScaleFloor), 1e-12 * std::max(1.0, std[i]));
    }
    EXPECT_EQ(stats.scale[2], kScaleFloor);
  }
}

TEST(DpFederatedNormalizeTest, SummationOrderDoesNotMatterAtZeroNoise) {
  std::vector<ClientFeatureSummary> sums;
  for (int c = 0; c < 5; ++c) {
    sums.push_back(SummarizeClient(std::vector<FeatureVector>{Vec({1.0 * c, 2.0})}, 2, 10));
  }
  const auto a = DpFederatedNormalize(sums, 10.0, 0.0, 0);
  std::reverse(sums.begin(), sums.end());
  const auto b = DpFederatedNormalize(sums, 10.0, 0.0, 0);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.scale, b.scale);
}

TEST(DpFederatedNormalizeTest, NoisyStatsAreReproducibleAndClose) {
  // 2000 clients with one example each, values in [0, 1], C = 1.
  constexpr int kClients = 2000;
  constexpr double kSigma = 1.0;
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<FeatureVector>> clients;
  std::vector<ClientFeatureSummary> sums;
  for (int c = 0; c < kClients; ++c) {
    clients.push_back({Vec({coin(rng) ? 1.0 : 0.0, u(rng), 0.5 + 0.5 * u(rng)})});
    sums.push_back(SummarizeClient(clients.back(), 3, 1.0));
  }
  std::vector<double> mean, std;
  PooledOracle(clients, 1.0, mean, std);
  const auto again = DpFederatedNormalize(sums, 1.0, kSigma, 42);
  EXPECT_EQ(DpFederatedNormalize(sums, 1.0, kSigma, 42).mean, again.mean);
  constexpr int kSeeds = 1000;
  const double bound = 5.0 * kSigma / kClients;
  std::vector<int> within(3, 0);
  double worst_scale = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto s = DpFederatedNormalize(sums, 1.0, kSigma, seed);
    for (int i = 0; i < 3; ++i) {
      within[i] += std::abs(s.mean[i] - mean[i]) <= bound;
      worst_scale = std::max(worst_scale, std::abs(s.scale[i] - std[i]) / std[i]);
    }
  }
  for (int i = 0; i < 3; ++i) EXPECT_GE(within[i], 0.99 * kSeeds) << "feature " << i;
  EXPECT_LT(worst_scale, 0.1);
}

TEST(DpFederatedNormalizeTest, NoiseNeverCollapsesScale) {
  // A rare feature: its variance is below the noise level of the squares.
  std::vector<ClientFeatureSummary> sums;
  for (int c = 0; c < 500; ++c) {
    sums.push_back(SummarizeClient(std::vector<FeatureVector>{Vec({c == 0 ? 1.0 : 0.0})}, 1, 50));
  }
  for (int seed = 0; seed < 200; ++seed) {
    const auto s = DpFederatedNormalize(sums, 50.0, 1.0, seed);
    EXPECT_GE(s.scale[0], std::sqrt(3.0 * 50.0 * 50.0 / 600.0));
  }
}

TEST(DpFederatedNormalizeTest, AccountsEpsilon) {
  const auto s = SummarizeClient(std::vector<FeatureVector>{Vec({1.0, 2.0})}, 2, 4.0);
  EXPECT_TRUE(std::isinf(DpFederatedNormalize(std::span(&s, 1), 4.0, 0.0, 0).epsilon_spent));
  const auto noisy = DpFederatedNormalize(std::span(&s, 1), 4.0, 20.0, 0);
  EXPECT_NEAR(noisy.epsilon_spent, ComputeEpsilon(20.0 / std::sqrt(5.0), 1.0, 1, kDefaultDelta),
              1e-12);
  EXPECT_THROW(DpFederatedNormalize(std::span(&s, 1), 0.0, 1.0, 0), Error);
  EXPECT_THROW(DpFederatedNormalize({}, 1.0, 1.0, 0), Error);
}

TEST(ApplyNormalizationTest, Examples) {
  NormalizationStats s;
  s.mean = {3.0, 0.0};
  s.scale = {1.0, 2.0};
  EXPECT_EQ(ApplyNormalization(Vec({3.0, 0.0}), s).values, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(ApplyNormalization(Vec({0.0, 4.0}), s).values[1], 2.0);
  const auto once = ApplyNormalization(Vec({5.0, 4.0}), s);
  const auto twice = ApplyNormalization(once, s);
  EXPECT_NE(once.values, twice.values);
  EXPECT_THROW(ApplyNormalization(Vec({1.0}), s), Error);
}

TEST(PercentileClipBoundTest, UsesNonzeroValues) {
  std::vector<FeatureVector> v;
  for (int i = 1; i <= 100; ++i) v.push_back(Vec({static_cast<double>(i), 0.0, 0.0}));
  EXPECT_NEAR(PercentileClipBound(v, 0.99), 99.0, 1.0);
  EXPECT_EQ(PercentileClipBound(std::vector<FeatureVector>{Vec({0.0})}), 1.0);
}

TEST(StatsJsonTest, RoundTripsIncludingInfinity) {
  const auto vocab = BuildVocabulary(CountsOnly(2));
  std::vector<FeatureVector> data = {Vec({1.0, 2.0}), Vec({3.0, 4.0})};
  const auto s = ExactNormalization(data, 2);
  const auto back = StatsFromJson(StatsToJson(s, vocab), vocab);
  EXPECT_EQ(back.mean, s.mean);
  EXPECT_EQ(back.scale, s.scale);
  EXPECT_TRUE(std::isinf(back.clip_bound));
  EXPECT_THROW(StatsFromJson(StatsToJson(s, vocab), BuildVocabulary(CountsOnly(3))), Error);
}

}  // namespace
}  // namespace fpsentinel
