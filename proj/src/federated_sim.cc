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

#include "fedbandit/federated_sim.h"

#include <cmath>
#include <optional>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedbandit/random.h"
#include "fedbandit/shuffle_vecsum.h"
#include "fedbandit/status_macros.h"

namespace fedbandit {

namespace {

absl::Status WithContext(const absl::Status& status, int64_t t, int silo,
                         int64_t k) {
  return absl::Status(status.code(),
                      absl::StrFormat("t=%d, silo=%d, k=%d: %s", t, silo, k,
                                      status.message()));
}

}  // namespace

absl::Status ValidateSimConfig(const SimConfig& config) {
  if (config.num_silos < 1) {
    return absl::InvalidArgumentError("M must be positive");
  }
  if (config.horizon < 1 || config.batch_size < 1) {
    return absl::InvalidArgumentError("T and B must be positive");
  }
  if (config.horizon % config.batch_size != 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "T not divisible by B (T = %d, B = %d)", config.horizon,
        config.batch_size));
  }
  if (!(config.alpha > 0.0 && config.alpha <= 1.0)) {
    return absl::InvalidArgumentError("alpha must lie in (0, 1]");
  }
  return ValidateBudget(config.budget);
}

absl::StatusOr<NoisePlan> PlanNoise(const SimConfig& config, int dim) {
  RETURN_IF_ERROR(ValidateSimConfig(config));
  const int64_t rounds = config.horizon / config.batch_size;
  switch (config.budget.mode) {
    case PrivacyMode::kNonPrivate:
      return NonPrivatePlan(rounds);
    case PrivacyMode::kSiloLdp:
      return CalibrateSiloLdp(config.budget, rounds, config.num_silos);
    case PrivacyMode::kSdpAmplify:
      return CalibrateSdpAmplify(config.budget, config.num_silos,
                                 config.horizon, config.batch_size);
    case PrivacyMode::kSdpVecSum:
      return CalibrateSdpVecSum(config.budget, config.num_silos,
                                config.horizon, config.batch_size, dim);
  }
  return absl::InvalidArgumentError("Unknown privacy mode");
}

absl::StatusOr<RunResult> RunEpisode(const SimConfig& config,
                                     const BanditInstance& instance) {
  const int d = instance.dim();
  const int m = config.num_silos;
  ASSIGN_OR_RETURN(NoisePlan plan, PlanNoise(config, d));
  if (config.force_zero_noise) {
    plan.sigma0_sq = 0.0;
    plan.sigma_total_sq = 0.0;
  }
  const int64_t rounds = config.horizon / config.batch_size;

  RunResult result;
  result.regret = RegretTrace(config.horizon);
  result.noise_plan = plan;
  result.lambda = config.lambda_override > 0.0
                      ? config.lambda_override
                      : DefaultLambda(std::sqrt(plan.sigma_total_sq), d,
                                      config.horizon, config.batch_size,
                                      config.alpha);
  result.actions.reserve(config.horizon * m);
  result.mean_chosen_ucb.reserve(config.horizon);
  const ConfidenceSchedule schedule{result.lambda, config.alpha, m, d};

  SyncSetup setup;
  setup.num_silos = m;
  setup.dim = d;
  setup.rounds = rounds;
  setup.batch_size = config.batch_size;
  setup.seed = config.seed;
  setup.plan = plan;
  setup.variant = config.tree_variant;
  setup.zero_noise = config.force_zero_noise;
  ASSIGN_OR_RETURN(std::unique_ptr<SyncProtocol> protocol,
                   MakeSyncProtocol(setup));

  std::vector<SiloState> silos(m, SiloState(d));
  std::vector<Rng> context_rngs;
  std::vector<Rng> reward_rngs;
  for (int i = 0; i < m; ++i) {
    context_rngs.push_back(MakeStream(config.seed, StreamPurpose::kContexts,
                                      {static_cast<uint64_t>(i)}));
    reward_rngs.push_back(MakeStream(config.seed, StreamPurpose::kRewards,
                                     {static_cast<uint64_t>(i)}));
  }

  // Lazy silos refit only at synchronizations. Before the first one the
  // synced statistics are zero, so the model depends on lambda alone.
  std::vector<std::optional<UcbModel>> lazy_models(m);
  auto refit_lazy = [&](int i) -> absl::Status {
    ASSIGN_OR_RETURN(UcbModel model,
                     FitUcbModel(silos[i].synced_cov, silos[i].synced_bias,
                                 result.lambda));
    if (model.jitter_steps > 0) ++result.jitter_repairs;
    lazy_models[i] = std::move(model);
    return absl::OkStatus();
  };
  if (config.lazy) {
    for (int i = 0; i < m; ++i) RETURN_IF_ERROR(refit_lazy(i));
  }

  for (int64_t t = 1; t <= config.horizon; ++t) {
    const int64_t k = (t - 1) / config.batch_size + 1;
    double group_regret = 0.0;
    double ucb_total = 0.0;
    for (int i = 0; i < m; ++i) {
      const ArmSet arms = instance.DrawArms(t, i, context_rngs[i]);
      if (arms.rows() != d || arms.cols() == 0) {
        return WithContext(
            absl::InvalidArgumentError("Instance produced a bad arm set"), t,
            i, k);
      }
      absl::StatusOr<UcbChoice> choice =
          config.lazy
              ? SelectArm(*lazy_models[i], arms, schedule.Beta(t), t, i)
              : UcbSelect(arms, silos[i], schedule, t, i);
      if (!choice.ok()) return WithContext(choice.status(), t, i, k);
      if (!config.lazy && choice->jitter_steps > 0) ++result.jitter_repairs;

      const FeatureVector x = arms.col(choice->index);
      bool clipped = false;
      const double y = instance.DrawReward(x, reward_rngs[i], &clipped);
      if (clipped) ++result.clipped_rewards;
      silos[i].Accumulate(x, y);
      protocol->Observe(i, x, y);

      group_regret +=
          PseudoRegretStep(arms, instance.theta_star(), choice->index);
      ucb_total += choice->ucb;
      result.actions.push_back(choice->index);
    }
    result.regret.Append(group_regret);
    result.mean_chosen_ucb.push_back(ucb_total / m);

    if (t % config.batch_size == 0) {
      absl::StatusOr<SyncedStats> synced = protocol->Synchronize(k, silos);
      if (!synced.ok()) return WithContext(synced.status(), t, -1, k);
      for (int i = 0; i < m; ++i) {
        silos[i].synced_bias = synced->bias;
        silos[i].synced_cov = synced->cov;
        silos[i].ResetLocal();
        if (config.lazy) {
          absl::Status st = refit_lazy(i);
          if (!st.ok()) return WithContext(st, t, i, k);
        }
      }
      ++result.sync_count;
    }
  }
  result.messages = protocol->messages();
  return result;
}

absl::StatusOr<RunResult> RunLazyEpisode(SimConfig config,
                                         const BanditInstance& instance) {
  config.lazy = true;
  return RunEpisode(config, instance);
}

}  // namespace fedbandit
