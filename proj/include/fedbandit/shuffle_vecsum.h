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

// Shuffle-model vector summation with binomial noise, and its use inside the
// binary-tree mechanism.
//
// Scalar protocol: each contributor encodes x in [0, L] on a grid of
// granularity g with unbiased stochastic rounding, adds Binomial(b, p)
// noise, and reports the resulting count (the number of ones in its unary
// {0,1}^{g+b} report). The analyzer returns (L/g)(sum of counts - p b n).
//
// Vector protocol: coordinates in [-L, L] are shifted by +L, summed with the
// scalar protocol over range 2L, and re-centred by n L.
//
// Tree integration: at communication round k every agent expands its p-sum
// for level i_k back into the per-round items it covers (2^{i_k} batches of
// B items), so the vector sum runs over n = 2^{i_k} B M unit-norm points.

#ifndef FEDBANDIT_SHUFFLE_VECSUM_H_
#define FEDBANDIT_SHUFFLE_VECSUM_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "absl/types/span.h"
#include "fedbandit/bandit_core.h"
#include "fedbandit/privacy_accounting.h"
#include "fedbandit/random.h"
#include "fedbandit/tree_mechanism.h"

namespace fedbandit {

struct ScalarShuffleParams {
  int64_t g = 4;
  int64_t b = 0;
  double p = 0.25;
  double range = 1.0;
};

// g = max{ceil(2 sqrt(n)), d, 4},
// b = ceil(24e4 g^2 ln^2(4 (d^2 + 1) / delta0) / (eps0^2 n)), p = 1/4, L = 1.
// Valid for eps0 in (0, 15] and delta0 in (0, 1/2).
absl::StatusOr<ScalarShuffleParams> ChooseParams(int64_t n, int dim,
                                                 double eps0, double delta0);

// Local randomizer for one scalar in [0, range]. The count lies in [0, g + b].
absl::StatusOr<int64_t> RandomizeScalar(double x,
                                        const ScalarShuffleParams& params,
                                        Rng& rng);

// (range / g)(sum(counts) - p b n). Requires exactly n counts.
absl::StatusOr<double> AnalyzeScalar(absl::Span<const int64_t> counts,
                                     int64_t n,
                                     const ScalarShuffleParams& params);

// One shuffled report: a coordinate label and its unary count.
struct ShuffleMessage {
  int64_t round = 0;
  StreamTag tag = StreamTag::kBias;
  int64_t coordinate = 0;
  int64_t count = 0;

  // Four little-endian int64 values: round, tag, coordinate, count.
  std::string Serialize() const;
  static absl::StatusOr<ShuffleMessage> Parse(absl::string_view bytes);

  friend bool operator==(const ShuffleMessage&,
                         const ShuffleMessage&) = default;
};

// Randomizes every coordinate of x (each in [-L, L], L = params.range)
// into one labelled message per coordinate.
absl::StatusOr<std::vector<ShuffleMessage>> VecRandomize(
    const Eigen::VectorXd& x, int64_t round, StreamTag tag,
    const ScalarShuffleParams& params, Rng& rng);

// Per-coordinate estimate of the sum of the n input vectors. Every
// coordinate must carry exactly n messages.
absl::StatusOr<Eigen::VectorXd> VecAnalyze(
    absl::Span<const ShuffleMessage> messages, int64_t n, int dim,
    const ScalarShuffleParams& params);

// Raw per-round data retained by one agent so that p-sums can be expanded
// into their individual items. Memory is O(T d).
class VecSumHistory {
 public:
  VecSumHistory(int dim, int64_t batch_size);

  void Record(const FeatureVector& x, double reward);
  int64_t rounds_recorded() const {
    return static_cast<int64_t>(rewards_.size());
  }
  int dim() const { return dim_; }
  int64_t batch_size() const { return batch_size_; }

  // Items (x y for the bias stream, vec(x x^T) for the covariance stream)
  // from batches (k - 2^{i_k}, k], one per column.
  absl::StatusOr<Eigen::MatrixXd> WindowItems(int64_t k, StreamTag tag) const;

 private:
  int dim_;
  int64_t batch_size_;
  std::vector<Eigen::VectorXd> features_;
  std::vector<double> rewards_;
};

struct VecSumBudget {
  double eps0 = 1.0;
  double delta0 = 0.01;
  // Forces b = 0 so that only the fixed-point rounding remains.
  bool zero_noise = false;
};

struct VecSumRoundResult {
  Eigen::VectorXd aggregate;
  int64_t contributors = 0;
  ScalarShuffleParams params;
  int64_t messages = 0;
};

// One synchronization of the vector-sum tree protocol for one stream. Each
// agent randomizes the items of its dyadic window with its own stream
// derived from `seed`; all messages are shuffled together and analyzed.
// Covariance aggregates are symmetrized.
absl::StatusOr<VecSumRoundResult> TreeVecSumRound(
    int64_t k, StreamTag tag, absl::Span<const VecSumHistory> histories,
    const VecSumBudget& budget, uint64_t seed);

// Budget and noise summary of the vector-sum protocol: each stream gets
// (eps/2, delta/2), split over kappa uses by advanced composition.
// sigma0_sq is the estimator variance of one synchronized p-sum coordinate at
// the largest window, sigma_total_sq = kappa sigma0_sq.
absl::StatusOr<NoisePlan> CalibrateSdpVecSum(const PrivacyBudget& budget,
                                             int num_silos, int64_t horizon,
                                             int64_t batch_size, int dim);

// Largest epsilon accepted for SDPVecSum: 60 sqrt(2 kappa ln(2/delta)).
double VecSumEpsilonBound(int kappa, double delta);

}  // namespace fedbandit

#endif  // FEDBANDIT_SHUFFLE_VECSUM_H_
