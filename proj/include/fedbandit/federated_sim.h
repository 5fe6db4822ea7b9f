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

// Private federated LinUCB: M silos play T rounds and synchronize their
// statistics through the configured privacy protocol every B rounds.

#ifndef FEDBANDIT_FEDERATED_SIM_H_
#define FEDBANDIT_FEDERATED_SIM_H_

#include <cstdint>
#include <vector>

#include "absl/status/statusor.h"
#include "fedbandit/bandit_core.h"
#include "fedbandit/data_ingestion.h"
#include "fedbandit/privacy_accounting.h"
#include "fedbandit/sync_protocol.h"

namespace fedbandit {

struct SimConfig {
  int num_silos = 10;
  int64_t horizon = 2000;
  int64_t batch_size = 25;
  PrivacyBudget budget;
  double alpha = 0.01;
  // Overrides the default regularizer when positive.
  double lambda_override = 0.0;
  uint64_t seed = 0;
  // Decide from synchronized statistics only (no unsynchronized local data).
  bool lazy = false;
  TreeVariant tree_variant = TreeVariant::kPSum;
  // Test hook: removes all privacy noise while keeping the protocol path.
  bool force_zero_noise = false;
};

absl::Status ValidateSimConfig(const SimConfig& config);

// Dispatches to the calibration of the configured mode.
absl::StatusOr<NoisePlan> PlanNoise(const SimConfig& config, int dim);

struct RunResult {
  RegretTrace regret;
  int64_t sync_count = 0;
  NoisePlan noise_plan;
  double lambda = 0.0;
  int64_t messages = 0;
  // Factorizations that needed extra regularization.
  int64_t jitter_repairs = 0;
  int64_t clipped_rewards = 0;
  // Chosen arm index per (round, silo), row-major in rounds.
  std::vector<int> actions;
  // Mean UCB score of the chosen arms, per round.
  std::vector<double> mean_chosen_ucb;
};

absl::StatusOr<RunResult> RunEpisode(const SimConfig& config,
                                     const BanditInstance& instance);

// The same episode with config.lazy forced on.
absl::StatusOr<RunResult> RunLazyEpisode(SimConfig config,
                                         const BanditInstance& instance);

}  // namespace fedbandit

#endif  // FEDBANDIT_FEDERATED_SIM_H_
