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

// Distributed binary-tree mechanism for continual release of private sums.
//
// Each agent runs a PSumTree over its stream gamma_1..gamma_K. At step k the
// tree releases one noisy partial sum (p-sum) covering the dyadic interval
// (k - 2^{i_k}, k], where i_k is the index of the lowest set bit of k. The
// server-side TreeAnalyzer adds the M agents' p-sums for level i_k and
// assembles the prefix sum over [1, k] from the levels set in k's binary
// expansion. Every stream item enters at most 1 + floor(log2 K) released
// nodes and every prefix uses at most 1 + floor(log2 k) of them.

#ifndef FEDBANDIT_TREE_MECHANISM_H_
#define FEDBANDIT_TREE_MECHANISM_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "absl/types/span.h"
#include "fedbandit/random.h"

namespace fedbandit {

enum class StreamTag : int64_t { kBias = 0, kCovariance = 1 };

// Layout of a flattened payload. Matrices are stored column-major.
struct PayloadShape {
  int rows = 1;
  int cols = 1;
  bool symmetric = false;

  static PayloadShape Vector(int d) { return {d, 1, false}; }
  static PayloadShape SymmetricMatrix(int d) { return {d, d, true}; }
  int size() const { return rows * cols; }
};

// i_k = min{j : Bin_j(k) = 1}. Requires k >= 1.
int FirstOneIndex(int64_t k);

// kappa = 1 + floor(log2 K), the number of tree levels for capacity K >= 1.
int TreeDepth(int64_t capacity);

// Levels j with Bin_j(k) = 1, ascending; these are the p-sums that make up
// the prefix sum at step k.
std::vector<int> PrefixLevels(int64_t k);

// Number of released nodes (over steps 1..capacity) whose dyadic interval
// contains item index k.
int ParticipationCount(int64_t capacity, int64_t k);

// Adds i.i.d. N(0, sigma^2) to every coordinate. For symmetric matrix
// payloads the upper triangle (with diagonal) is drawn and mirrored so the
// result is exactly symmetric.
void AddGaussianNoise(const PayloadShape& shape, double sigma, Rng& rng,
                      Eigen::VectorXd& payload);

// Local randomizer holding the clean p-sums of one agent's stream.
class PSumTree {
 public:
  PSumTree(int64_t capacity, PayloadShape shape);

  // Consumes gamma_k, stores alpha_{i_k} = sum_{j < i_k} alpha_j + gamma_k,
  // retires the levels below i_k and returns alpha_{i_k} + N(0, sigma0^2 I).
  // Steps must arrive in order k = 1, 2, ..., capacity.
  absl::StatusOr<Eigen::VectorXd> RandomizerStep(int64_t k,
                                                 const Eigen::VectorXd& item,
                                                 double sigma0, Rng& rng);

  // Clean p-sum currently held at `level`, if any.
  const std::optional<Eigen::VectorXd>& node(int level) const {
    return nodes_[level];
  }
  int stored_levels() const;
  int depth() const { return static_cast<int>(nodes_.size()); }
  int64_t capacity() const { return capacity_; }
  int64_t last_step() const { return last_step_; }
  const PayloadShape& shape() const { return shape_; }

 private:
  friend class PrefixAltRandomizer;

  // Validates k and the payload, then updates the clean nodes. Returns i_k.
  absl::StatusOr<int> Advance(int64_t k, const Eigen::VectorXd& item);

  int64_t capacity_;
  PayloadShape shape_;
  int64_t last_step_ = 0;
  std::vector<std::optional<Eigen::VectorXd>> nodes_;
};

// Prefix-sum variant of the local randomizer: the agent adds noise to each
// new p-sum as above but releases its own noisy prefix sum
// s_k = sum_{j : Bin_j(k) = 1} alpha_hat_j. The server then only sums.
class PrefixAltRandomizer {
 public:
  PrefixAltRandomizer(int64_t capacity, PayloadShape shape);

  absl::StatusOr<Eigen::VectorXd> Step(int64_t k, const Eigen::VectorXd& item,
                                       double sigma0, Rng& rng);

  // Number of noisy nodes summed into the most recent output.
  int last_levels_used() const { return last_levels_used_; }

 private:
  PSumTree tree_;
  std::vector<std::optional<Eigen::VectorXd>> noisy_nodes_;
  int last_levels_used_ = 0;
};

// Server-side analyzer (the synchronized noisy p-sums).
class TreeAnalyzer {
 public:
  TreeAnalyzer(int64_t capacity, int num_agents, PayloadShape shape);

  // Sums the M agents' noisy p-sums for step k into level i_k and returns
  // the synchronized prefix sum. Requires exactly num_agents payloads.
  absl::StatusOr<Eigen::VectorXd> AnalyzerStep(
      int64_t k, absl::Span<const Eigen::VectorXd> agent_outputs);

  // Stores an already aggregated p-sum for step k (for protocols whose
  // aggregation happens elsewhere) and returns the prefix sum.
  absl::StatusOr<Eigen::VectorXd> Absorb(int64_t k, Eigen::VectorXd aggregated);

  const Eigen::VectorXd& prefix() const { return prefix_; }
  int last_levels_used() const { return last_levels_used_; }
  int stored_levels() const;
  int num_agents() const { return num_agents_; }

 private:
  int64_t capacity_;
  int num_agents_;
  PayloadShape shape_;
  int64_t last_step_ = 0;
  std::vector<std::optional<Eigen::VectorXd>> levels_;
  Eigen::VectorXd prefix_;
  int last_levels_used_ = 0;
};

// Wire format of one released p-sum: little-endian int64 round, int64 stream
// tag, then the payload as IEEE-754 binary64 values.
struct PSumMessage {
  int64_t round = 0;
  StreamTag tag = StreamTag::kBias;
  Eigen::VectorXd payload;

  std::string Serialize() const;
  static absl::StatusOr<PSumMessage> Parse(absl::string_view bytes,
                                           int expected_length);
};

}  // namespace fedbandit

#endif  // FEDBANDIT_TREE_MECHANISM_H_
