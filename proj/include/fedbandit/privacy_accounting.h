// Copyright 2026 The FedBandit Authors
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

// Noise calibration for the private synchronization protocols.
//
// Every private mode protects two streams (bias vectors and covariance
// matrices), so each stream is calibrated for (epsilon/2, delta/2). Each
// stream item has L2 (Frobenius) sensitivity 1 and enters at most
// kappa = 1 + floor(log2 K) released tree nodes. Logarithms are natural
// except inside kappa.

#ifndef FEDBANDIT_PRIVACY_ACCOUNTING_H_
#define FEDBANDIT_PRIVACY_ACCOUNTING_H_

#include <cstdint>
#include <string>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"

namespace fedbandit {

enum class PrivacyMode { kNonPrivate, kSiloLdp, kSdpAmplify, kSdpVecSum };

// Canonical names: "NonPrivate", "SiloLDP", "SDPAmplify", "SDPVecSum".
std::string PrivacyModeName(PrivacyMode mode);
absl::StatusOr<PrivacyMode> ParsePrivacyMode(absl::string_view name);

struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 0.1;
  PrivacyMode mode = PrivacyMode::kNonPrivate;
};

// epsilon > 0 and 0 < delta < 1 for private modes; NonPrivate always passes.
absl::Status ValidateBudget(const PrivacyBudget& budget);

struct NoisePlan {
  PrivacyMode mode = PrivacyMode::kNonPrivate;
  // Variance of the noise on one released p-sum coordinate. For SDPVecSum
  // this is the estimator variance of one synchronized p-sum coordinate.
  double sigma0_sq = 0.0;
  int kappa = 1;
  // Per-release budget after splitting one stream's budget over kappa uses.
  double per_round_eps = 0.0;
  double per_round_delta = 0.0;
  // Local budget before amplification (SDPAmplify) or the per-round budget
  // handed to the vector-sum protocol (SDPVecSum).
  double local_eps0 = 0.0;
  double local_delta0 = 0.0;
  // Post-shuffle guarantee of one round and the lemma's slack delta
  // (SDPAmplify only).
  double amplified_eps = 0.0;
  double amplified_delta = 0.0;
  double delta_slack = 0.0;
  // Worst-case variance of the aggregated noise in a synchronized prefix
  // sum, used to set the regularizer.
  double sigma_total_sq = 0.0;
};

NoisePlan NonPrivatePlan(int64_t rounds);

// sigma0^2 = 8 kappa (ln(2/delta) + epsilon) / epsilon^2,
// sigma_total^2 = M kappa sigma0^2.
absl::StatusOr<NoisePlan> CalibrateSiloLdp(const PrivacyBudget& budget,
                                           int64_t rounds, int num_silos);

struct AmplificationResult {
  double eps_r = 0.0;
  double delta_r = 0.0;
};

// Smallest slack delta admitted by the amplification lemma for a Gaussian
// mechanism run on n points at each of N silos: 2 exp(-N e^{-n eps0} / 16).
double MinAmplificationSlack(double eps0, int64_t n, int64_t num_silos);

// Closed-form amplification by shuffling of N Gaussian mechanisms, each
// (eps0, delta0)-DP over a local dataset of n points:
//   f       = (e^eps0 - 1) / (e^eps0 + 1)
//   eps_r   = ln(1 + f (8 sqrt(e^{n eps0} ln(4/slack)) / sqrt(N)
//                       + 8 e^{n eps0} / N))
//   delta_r = f slack + N (e^eps_r + 1)(1 + e^{-eps0} / 2) delta0
// Fails with FailedPrecondition when eps0 > ln(N / (16 ln(2/slack))) / n.
absl::StatusOr<AmplificationResult> AmplificationBound(double eps0,
                                                       double delta0,
                                                       int64_t n,
                                                       int64_t num_silos,
                                                       double delta_slack);

// Shuffled Gaussian protocol. Finds by bisection the largest local eps0 such
// that one shuffled round meets the per-round target (eps_hat, delta_hat)
// under the exact amplification bound, with delta0 = delta_hat / (4 M) and
// the slack delta set to its smallest admissible value. Returns
// ResourceExhausted when amplification cannot use the budget: too few silos
// for the lemma, or a budget beyond the regime where the epsilon constraint
// binds.
absl::StatusOr<NoisePlan> CalibrateSdpAmplify(const PrivacyBudget& budget,
                                              int num_silos, int64_t horizon,
                                              int64_t batch_size);

struct ComposedBudget {
  double epsilon = 0.0;
  double delta = 0.0;
};

// Advanced composition of `uses` adaptive (eps, delta)-DP mechanisms:
//   (eps sqrt(2 k ln(1/delta')) + k eps (e^eps - 1), k delta + delta').
// With delta' = 0 this falls back to basic composition (k eps, k delta).
ComposedBudget AdvancedComposition(double per_use_eps, double per_use_delta,
                                   int uses, double delta_prime);

// Per-use budget (eps / (2 sqrt(2 k ln(2/delta))), delta / (2k)) that composes
// to (eps, delta) over k uses with delta' = delta / 2, as long as the
// second-order term k eps_use (e^eps_use - 1) stays below eps / 2.
ComposedBudget SplitForComposition(double total_eps, double total_delta,
                                   int uses);

// Variance of the classical Gaussian mechanism: 2 ln(1.25/delta) L^2 / eps^2.
double GaussianMechanismVariance(double eps, double delta,
                                 double sensitivity = 1.0);

}  // namespace fedbandit

#endif  // FEDBANDIT_PRIVACY_ACCOUNTING_H_
