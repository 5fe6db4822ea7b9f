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

// Server-side synchronization of the per-silo bias and covariance streams.
// One protocol object lives for one episode and is driven at every batch
// end with the silos' fresh batch accumulators.

#ifndef FEDBANDIT_SYNC_PROTOCOL_H_
#define FEDBANDIT_SYNC_PROTOCOL_H_

#include <cstdint>
#include <memory>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "fedbandit/bandit_core.h"
#include "fedbandit/privacy_accounting.h"

namespace fedbandit {

struct SyncedStats {
  Eigen::VectorXd bias;
  Eigen::MatrixXd cov;
};

enum class TreeVariant {
  // Agents release noisy p-sums; the server assembles prefix sums.
  kPSum,
  // Agents release their own noisy prefix sums; the server adds them up.
  kPrefixAlt,
};

struct SyncSetup {
  int num_silos = 1;
  int dim = 1;
  int64_t rounds = 1;
  int64_t batch_size = 1;
  uint64_t seed = 0;
  NoisePlan plan;
  TreeVariant variant = TreeVariant::kPSum;
  // Oracle-test hook: no privacy noise at all (b = 0 for the vector sum).
  bool zero_noise = false;
};

class SyncProtocol {
 public:
  virtual ~SyncProtocol() = default;

  // Every played (x, y) of a silo. Only protocols that re-expand p-sums need
  // it; the default ignores it.
  virtual void Observe(int /*silo*/, const FeatureVector& /*x*/,
                       double /*reward*/) {}

  // Synchronization k (1-based) with the silos' batch accumulators. Returns
  // the private prefix statistics broadcast to every silo.
  virtual absl::StatusOr<SyncedStats> Synchronize(
      int64_t k, absl::Span<const SiloState> silos) = 0;

  // Messages received by the server so far, counting one per silo per
  // stream per synchronization (vector-sum counts every shuffled report).
  int64_t messages() const { return messages_; }

 protected:
  int64_t messages_ = 0;
};

// Exact sums for NonPrivate; the Gaussian tree for SiloLDP (identity
// shuffler) and SDPAmplify (uniform shuffler); the vector-sum tree for
// SDPVecSum.
absl::StatusOr<std::unique_ptr<SyncProtocol>> MakeSyncProtocol(
    const SyncSetup& setup);

}  // namespace fedbandit

#endif  // FEDBANDIT_SYNC_PROTOCOL_H_
