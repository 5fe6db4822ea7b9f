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

#include "fedbandit/privacy_accounting.h"

#include <cmath>
#include <limits>

#include "absl/strings/str_format.h"
#include "fedbandit/status_macros.h"
#include "fedbandit/tree_mechanism.h"

namespace fedbandit {

namespace {

constexpr int kBisectionIterations = 200;

// Relative tolerance on the lemma's validity inequality, so that a slack
// computed by MinAmplificationSlack is accepted despite rounding.
constexpr double kValidityRelTol = 1e-12;

absl::StatusOr<int64_t> RoundsFromHorizon(int64_t horizon,
                                          int64_t batch_size) {
  if (horizon < 1 || batch_size < 1 || horizon % batch_size != 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Horizon %d must be a positive multiple of batch size %d", horizon,
        batch_size));
  }
  return horizon / batch_size;
}

}  // namespace

std::string PrivacyModeName(PrivacyMode mode) {
  switch (mode) {
    case PrivacyMode::kNonPrivate:
      return "NonPrivate";
    case PrivacyMode::kSiloLdp:
      return "SiloLDP";
    case PrivacyMode::kSdpAmplify:
      return "SDPAmplify";
    case PrivacyMode::kSdpVecSum:
      return "SDPVecSum";
  }
  return "Unknown";
}

absl::StatusOr<PrivacyMode> ParsePrivacyMode(absl::string_view name) {
  for (PrivacyMode mode :
       {PrivacyMode::kNonPrivate, PrivacyMode::kSiloLdp,
        PrivacyMode::kSdpAmplify, PrivacyMode::kSdpVecSum}) {
    if (name == PrivacyModeName(mode)) return mode;
  }
  return absl::InvalidArgumentError(absl::StrFormat(
      "Unknown privacy mode '%s' (expected NonPrivate, SiloLDP, SDPAmplify "
      "or SDPVecSum)",
      name));
}

absl::Status ValidateBudget(const PrivacyBudget& budget) {
  if (budget.mode == PrivacyMode::kNonPrivate) return absl::OkStatus();
  if (!(budget.epsilon > 0.0) || !std::isfinite(budget.epsilon)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("epsilon must be positive, got %g", budget.epsilon));
  }
  if (!(budget.delta > 0.0 && budget.delta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("delta must lie in (0, 1), got %g", budget.delta));
  }
  return absl::OkStatus();
}

NoisePlan NonPrivatePlan(int64_t rounds) {
  NoisePlan plan;
  plan.mode = PrivacyMode::kNonPrivate;
  plan.kappa = TreeDepth(rounds);
  return plan;
}

absl::StatusOr<NoisePlan> CalibrateSiloLdp(const PrivacyBudget& budget,
                                           int64_t rounds, int num_silos) {
  if (budget.mode != PrivacyMode::kSiloLdp) {
    return absl::InvalidArgumentError("CalibrateSiloLdp needs mode SiloLDP");
  }
  RETURN_IF_ERROR(ValidateBudget(budget));
  if (rounds < 1 || num_silos < 1) {
    return absl::InvalidArgumentError("rounds and num_silos must be positive");
  }
  const double eps = budget.epsilon;
  const double delta = budget.delta;
  NoisePlan plan;
  plan.mode = PrivacyMode::kSiloLdp;
  plan.kappa = TreeDepth(rounds);
  plan.sigma0_sq = 8.0 * plan.kappa * (std::log(2.0 / delta) + eps) /
                   (eps * eps);
  plan.per_round_eps = eps / 2.0;
  plan.per_round_delta = delta / 2.0;
  plan.sigma_total_sq =
      static_cast<double>(num_silos) * plan.kappa * plan.sigma0_sq;
  return plan;
}

double MinAmplificationSlack(double eps0, int64_t n, int64_t num_silos) {
  return 2.0 * std::exp(-static_cast<double>(num_silos) *
                        std::exp(-static_cast<double>(n) * eps0) / 16.0);
}

absl::StatusOr<AmplificationResult> AmplificationBound(double eps0,
                                                       double delta0,
                                                       int64_t n,
                                                       int64_t num_silos,
                                                       double delta_slack) {
  if (!(eps0 >= 0.0) || !(delta0 >= 0.0) || n < 1 || num_silos < 1) {
    return absl::InvalidArgumentError(
        "AmplificationBound needs eps0 >= 0, delta0 >= 0, n >= 1, N >= 1");
  }
  if (!(delta_slack > 0.0 && delta_slack <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Slack delta must lie in (0, 1], got %g", delta_slack));
  }
  const double min_slack = MinAmplificationSlack(eps0, n, num_silos);
  if (delta_slack < min_slack * (1.0 - kValidityRelTol)) {
    const double bound =
        std::log(static_cast<double>(num_silos) /
                 (16.0 * std::log(2.0 / delta_slack))) /
        static_cast<double>(n);
    return absl::FailedPreconditionError(absl::StrFormat(
        "Amplification inapplicable: need eps0 <= ln(N / (16 ln(2/delta))) / "
        "n = %g, got eps0 = %g (n = %d, N = %d, delta = %g)",
        bound, eps0, n, num_silos, delta_slack));
  }
  const double f = std::expm1(eps0) / (std::exp(eps0) + 1.0);
  const double growth = std::exp(static_cast<double>(n) * eps0);
  const double big_n = static_cast<double>(num_silos);
  AmplificationResult result;
  result.eps_r = std::log1p(
      f * (8.0 * std::sqrt(growth * std::log(4.0 / delta_slack)) /
               std::sqrt(big_n) +
           8.0 * growth / big_n));
  result.delta_r = f * delta_slack + big_n * (std::exp(result.eps_r) + 1.0) *
                                         (1.0 + std::exp(-eps0) / 2.0) *
                                         delta0;
  return result;
}

absl::StatusOr<NoisePlan> CalibrateSdpAmplify(const PrivacyBudget& budget,
                                              int num_silos, int64_t horizon,
                                              int64_t batch_size) {
  if (budget.mode != PrivacyMode::kSdpAmplify) {
    return absl::InvalidArgumentError(
        "CalibrateSdpAmplify needs mode SDPAmplify");
  }
  RETURN_IF_ERROR(ValidateBudget(budget));
  ASSIGN_OR_RETURN(const int64_t rounds,
                   RoundsFromHorizon(horizon, batch_size));
  if (num_silos < 1) {
    return absl::InvalidArgumentError("num_silos must be positive");
  }
  NoisePlan plan;
  plan.mode = PrivacyMode::kSdpAmplify;
  plan.kappa = TreeDepth(rounds);
  const ComposedBudget target =
      SplitForComposition(budget.epsilon / 2.0, budget.delta / 2.0, plan.kappa);
  plan.per_round_eps = target.epsilon;
  plan.per_round_delta = target.delta;
  plan.local_delta0 = target.delta / (4.0 * num_silos);

  // A silo's dataset may reach the whole horizon inside one p-sum.
  const int64_t n = horizon;
  const double big_n = static_cast<double>(num_silos);
  // The slack must stay <= 1, which caps n eps0 at ln(N / (16 ln 2)).
  const double cap_arg = big_n / (16.0 * std::log(2.0));
  if (cap_arg <= 1.0) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "Amplification by shuffling needs more than 16 ln 2 silos, got %d; "
        "use SDPVecSum",
        num_silos));
  }
  const double eps0_cap =
      std::min(std::log(cap_arg) / static_cast<double>(n),
               std::nextafter(1.0, 0.0));

  auto evaluate = [&](double eps0) -> absl::StatusOr<AmplificationResult> {
    const double slack = std::min(1.0, MinAmplificationSlack(eps0, n, num_silos));
    return AmplificationBound(eps0, plan.local_delta0, n, num_silos, slack);
  };
  auto feasible = [&](double eps0) {
    absl::StatusOr<AmplificationResult> r = evaluate(eps0);
    return r.ok() && r->eps_r <= target.epsilon && r->delta_r <= target.delta;
  };

  double lo = 0.0;
  double hi = eps0_cap;
  if (feasible(hi)) {
    lo = hi;
  } else {
    for (int it = 0; it < kBisectionIterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (feasible(mid)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
  }
  if (!(lo > 0.0)) {
    return absl::ResourceExhaustedError(
        "No positive local epsilon satisfies the amplification bound; use "
        "SDPVecSum");
  }
  ASSIGN_OR_RETURN(const AmplificationResult at, evaluate(lo));
  // The epsilon constraint has to be the binding one. Otherwise the delta
  // budget or the lemma's validity region stops eps0 first and the
  // requested epsilon lies beyond what amplification can make use of.
  if (at.eps_r < target.epsilon * (1.0 - 1e-6)) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "Budget epsilon = %g is too large for amplification by shuffling "
        "(M = %d, T = %d): the largest usable local epsilon %g only reaches "
        "a per-round epsilon of %g < %g; use SDPVecSum",
        budget.epsilon, num_silos, horizon, lo, at.eps_r, target.epsilon));
  }
  plan.local_eps0 = lo;
  plan.amplified_eps = at.eps_r;
  plan.amplified_delta = at.delta_r;
  plan.delta_slack = std::min(1.0, MinAmplificationSlack(lo, n, num_silos));
  plan.sigma0_sq = GaussianMechanismVariance(lo, plan.local_delta0);
  plan.sigma_total_sq = big_n * plan.kappa * plan.sigma0_sq;
  return plan;
}

ComposedBudget AdvancedComposition(double per_use_eps, double per_use_delta,
                                   int uses, double delta_prime) {
  const double k = static_cast<double>(uses);
  if (delta_prime <= 0.0) {
    return {k * per_use_eps, k * per_use_delta};
  }
  return {per_use_eps * std::sqrt(2.0 * k * std::log(1.0 / delta_prime)) +
              k * per_use_eps * std::expm1(per_use_eps),
          k * per_use_delta + delta_prime};
}

ComposedBudget SplitForComposition(double total_eps, double total_delta,
                                   int uses) {
  const double k = static_cast<double>(uses);
  return {total_eps / (2.0 * std::sqrt(2.0 * k * std::log(2.0 / total_delta))),
          total_delta / (2.0 * k)};
}

double GaussianMechanismVariance(double eps, double delta,
                                 double sensitivity) {
  return 2.0 * std::log(1.25 / delta) * sensitivity * sensitivity /
         (eps * eps);
}

}  // namespace fedbandit
