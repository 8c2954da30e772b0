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

// Renyi-DP accounting for repeated (subsampled) Gaussian releases and
// noise-multiplier calibration against an (epsilon, delta) budget.
//
// For sampling rate q = 1 the Gaussian mechanism with noise multiplier sigma
// has RDP alpha / (2 sigma^2) at every order alpha > 1. For q < 1 the integer
// order bound for the Poisson-subsampled Gaussian mechanism is used:
//
//   A_alpha = sum_{k=0..alpha} C(alpha,k) (1-q)^(alpha-k) q^k
//             exp((k^2 - k) / (2 sigma^2)),   RDP = log(A_alpha) / (alpha-1).
//
// Composition over R releases multiplies RDP by R. Conversion to (eps, delta):
//
//   eps = min_alpha  R*RDP(alpha) + log((alpha-1)/alpha)
//                    - (log(delta) + log(alpha)) / (alpha-1).

#ifndef FPSENTINEL_ACCOUNTANT_HPP_
#define FPSENTINEL_ACCOUNTANT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fpsentinel/common.hpp"

namespace fpsentinel {

inline constexpr double kDefaultDelta = 1e-5;

struct PrivacyBudget {
  double epsilon = 1.0;  // may be +infinity (no privacy)
  double delta = kDefaultDelta;

  void Validate() const {
    if (!(epsilon > 0.0)) {
      throw Error(ErrorCode::kConfig, "epsilon must be > 0");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw Error(ErrorCode::kConfig, "delta must be in (0, 1)");
    }
  }
};

namespace accountant_internal {

inline const std::vector<double>& Orders() {
  static const std::vector<double> kOrders = [] {
    std::vector<double> v = {1.1, 1.25, 1.5, 1.75};
    for (double a = 2.0; a <= 12.0; a += 0.5) v.push_back(a);
    for (int a = 13; a <= 64; ++a) v.push_back(a);
    for (double a : {72.0, 80.0, 96.0, 128.0, 192.0, 256.0, 384.0, 512.0}) {
      v.push_back(a);
    }
    return v;
  }();
  return kOrders;
}

inline double LogAddExp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Integer order only.
inline double SubsampledGaussianRdp(double q, double sigma, int alpha) {
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  double log_a = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= alpha; ++k) {
    const double log_binom = std::lgamma(alpha + 1.0) - std::lgamma(k + 1.0) -
                             std::lgamma(alpha - k + 1.0);
    const double term = log_binom + (alpha - k) * log_1mq + k * log_q +
                        (static_cast<double>(k) * k - k) / (2.0 * sigma * sigma);
    log_a = LogAddExp(log_a, term);
  }
  return std::max(0.0, log_a / (alpha - 1.0));
}

}  // namespace accountant_internal

// RDP of one release at order `alpha`. Non-integer orders are only
// supported for q == 1 and return +infinity otherwise (they are skipped).
inline double GaussianRdp(double q, double sigma, double alpha) {
  if (q <= 0.0) return 0.0;
  if (sigma <= 0.0) return std::numeric_limits<double>::infinity();
  if (q >= 1.0) return alpha / (2.0 * sigma * sigma);
  if (alpha != std::floor(alpha)) return std::numeric_limits<double>::infinity();
  return accountant_internal::SubsampledGaussianRdp(q, sigma,
                                                    static_cast<int>(alpha));
}

// Epsilon spent by `releases` compositions of the subsampled Gaussian
// mechanism with noise multiplier `sigma` at sampling rate `q`.
inline double ComputeEpsilon(double sigma, double q, std::uint64_t releases,
                             double delta) {
  if (releases == 0 || q <= 0.0) return 0.0;
  if (sigma <= 0.0) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  const double log_delta = std::log(delta);
  for (double alpha : accountant_internal::Orders()) {
    const double rdp = GaussianRdp(q, sigma, alpha);
    if (!std::isfinite(rdp)) continue;
    const double eps = static_cast<double>(releases) * rdp +
                       std::log1p(-1.0 / alpha) -
                       (log_delta + std::log(alpha)) / (alpha - 1.0);
    best = std::min(best, eps);
  }
  return std::max(0.0, best);
}

// Classic single-release Gaussian mechanism bound, sigma =
// sqrt(2 ln(1.25/delta)) / epsilon. Only a valid guarantee for epsilon < 1;
// used as a ceiling in tests.
inline double ClassicGaussianSigma(double epsilon, double delta) {
  return std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

struct CalibrationGrid {
  double step = 0.01;
  double max_sigma = 100.0;
};

// Smallest grid sigma whose accounted epsilon after `rounds` releases at rate
// `q` fits the budget. Epsilon is nonincreasing in sigma, so the grid is
// binary searched.
inline double CalibrateNoise(const PrivacyBudget& budget, std::uint64_t rounds,
                             double q, const CalibrationGrid& grid = {}) {
  budget.Validate();
  if (rounds < 1) throw Error(ErrorCode::kConfig, "rounds must be >= 1");
  if (!(q > 0.0 && q <= 1.0)) {
    throw Error(ErrorCode::kConfig, "sampling rate must be in (0, 1]");
  }
  if (!(grid.step > 0.0) || !(grid.max_sigma >= 0.0)) {
    throw Error(ErrorCode::kConfig, "invalid calibration grid");
  }
  const auto fits = [&](std::int64_t k) {
    return ComputeEpsilon(k * grid.step, q, rounds, budget.delta) <=
           budget.epsilon;
  };
  std::int64_t hi = static_cast<std::int64_t>(
      std::floor(grid.max_sigma / grid.step + 1e-9));
  if (!fits(hi)) {
    throw Error(ErrorCode::kInfeasible, "infeasible privacy budget");
  }
  std::int64_t lo = -1;  // fits(lo) is false or out of range
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (fits(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi * grid.step;
}

}  // namespace fpsentinel

#endif  // FPSENTINEL_ACCOUNTANT_HPP_
