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


#include "fpsentinel/accountant.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace fpsentinel {
namespace {

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Exact delta of a sensitivity-1 Gaussian mechanism at a given epsilon.
double AnalyticGaussianDelta(double sigma, double eps) {
  return Phi(0.5 / sigma - eps * sigma) - std::exp(eps) * Phi(-0.5 / sigma - eps * sigma);
}

// log E_{z ~ N(0, s^2)} [(1 - q + q exp((2z - 1) / (2 s^2)))^alpha] by the
// trapezoid rule.
double QuadratureLogMoment(double q, double sigma, int alpha) {
  const double lo = -30.0 * sigma, hi = 30.0 * sigma + 1.0;
  const int n = 400000;
  const double h = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + i * h;
    const double density = std::exp(-z * z / (2 * sigma * sigma)) / (sigma * std::sqrt(2 * M_PI));
    const double ratio = std::exp((2 * z - 1) / (2 * sigma * sigma));
    const double f = density * std::pow(1 - q + q * ratio, alpha);
    total += (i == 0 || i == n) ? f / 2 : f;
  }
  return std::log(total * h);
}

TEST(AccountantTest, SubsampledMomentMatchesQuadrature) {
  for (double q : {0.01, 0.05, 0.2}) {
    for (double sigma : {0.8, 1.5, 4.0}) {
      for (int alpha : {2, 3, 5, 8}) {
        const double want = QuadratureLogMoment(q, sigma, alpha) / (alpha - 1);
        const double got = accountant_internal::SubsampledGaussianRdp(q, sigma, alpha);
        EXPECT_NEAR(got, want, 1e-7 + 1e-6 * want) << q << " " << sigma << " " << alpha;
      }
    }
  }
}

TEST(AccountantTest, FullBatchRdpIsClosedForm) {
  EXPECT_DOUBLE_EQ(GaussianRdp(1.0, 2.0, 3.0), 3.0 / 8.0);
  EXPECT_EQ(GaussianRdp(0.0, 2.0, 3.0), 0.0);
}

TEST(AccountantTest, EpsilonUpperBoundsAnalyticGaussian) {
  for (double sigma : {0.7, 1.0, 2.0, 5.0}) {
    const double eps = ComputeEpsilon(sigma, 1.0, 1, 1e-5);
    EXPECT_LE(AnalyticGaussianDelta(sigma, eps), 1e-5 * (1 + 1e-9)) << sigma;
  }
}

TEST(AccountantTest, SingleReleaseCalibrationBeatsClassicBound) {
  const double sigma = CalibrateNoise({1.0, 1e-5}, 1, 1.0);
  EXPECT_LE(sigma, 4.85);
  EXPECT_LE(sigma, ClassicGaussianSigma(1.0, 1e-5));
  EXPECT_LE(ComputeEpsilon(sigma, 1.0, 1, 1e-5), 1.0);
  EXPECT_GT(ComputeEpsilon(sigma - 0.01, 1.0, 1, 1e-5), 1.0);
}

TEST(AccountantTest, InfiniteEpsilonNeedsNoNoise) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(CalibrateNoise({inf, 1e-5}, 100, 0.01), 0.0);
}

TEST(AccountantTest, MoreRoundsNeverNeedLessNoise) {
  double prev = 0.0;
  for (std::uint64_t r = 1; r <= 256; r *= 2) {
    const double sigma = CalibrateNoise({2.0, 1e-5}, r, 0.05);
    EXPECT_GE(sigma, prev) << r;
    prev = sigma;
  }
}

TEST(AccountantTest, CalibrationMonotoneOverGrid) {
  const double eps[] = {0.5, 1.0, 2.0, 4.0, 8.0};
  const double delta[] = {1e-7, 1e-6, 1e-5, 1e-4, 1e-3};
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double s = CalibrateNoise({eps[i], delta[j]}, 50, 0.05);
      if (i > 0) EXPECT_LE(s, CalibrateNoise({eps[i - 1], delta[j]}, 50, 0.05));
      if (j > 0) EXPECT_LE(s, CalibrateNoise({eps[i], delta[j - 1]}, 50, 0.05));
    }
  }
}

TEST(AccountantTest, EpsilonFallsWithSigmaAndRisesWithRounds) {
  double prev = std::numeric_limits<double>::infinity();
  for (double s = 0.5; s < 10.0; s += 0.25) {
    const double e = ComputeEpsilon(s, 0.02, 100, 1e-5);
    EXPECT_LE(e, prev);
    prev = e;
  }
  EXPECT_LT(ComputeEpsilon(1.0, 0.02, 10, 1e-5), ComputeEpsilon(1.0, 0.02, 100, 1e-5));
  EXPECT_EQ(ComputeEpsilon(1.0, 0.02, 0, 1e-5), 0.0);
  EXPECT_TRUE(std::isinf(ComputeEpsilon(0.0, 0.02, 1, 1e-5)));
}

TEST(AccountantTest, InfeasibleAndInvalidBudgets) {
  try {
    CalibrateNoise({1e-4, 1e-5}, 1000, 1.0, {0.01, 1.0});
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
    EXPECT_STREQ(e.what(), "infeasible privacy budget");
  }
  EXPECT_THROW(CalibrateNoise({0.0, 1e-5}, 1, 1.0), Error);
  EXPECT_THROW(CalibrateNoise({1.0, 1.0}, 1, 1.0), Error);
  EXPECT_THROW(CalibrateNoise({1.0, 1e-5}, 0, 1.0), Error);
  EXPECT_THROW(CalibrateNoise({1.0, 1e-5}, 1, 1.5), Error);
}

TEST(AccountantTest, ResultLiesOnGrid) {
  const double s = CalibrateNoise({3.0, 1e-5}, 20, 0.1, {0.05, 50.0});
  EXPECT_NEAR(std::round(s / 0.05) * 0.05, s, 1e-12);
}

}  // namespace
}  // namespace fpsentinel
