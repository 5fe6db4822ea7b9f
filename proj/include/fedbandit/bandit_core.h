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

// Linear contextual bandit primitives: LinUCB estimation and arm selection,
// the confidence radius schedule, and group pseudo-regret bookkeeping.

#ifndef FEDBANDIT_BANDIT_CORE_H_
#define FEDBANDIT_BANDIT_CORE_H_

#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "absl/status/statusor.h"

namespace fedbandit {

using FeatureVector = Eigen::VectorXd;

// Candidate arms for one (round, silo), one feature vector per column.
using ArmSet = Eigen::MatrixXd;

// Per-silo accumulators. The local accumulators hold data gathered since the
// last synchronization; the synced statistics are the latest private
// aggregates broadcast by the server.
struct SiloState {
  explicit SiloState(int dim);

  void Accumulate(const FeatureVector& x, double reward);
  void ResetLocal();
  int dim() const { return static_cast<int>(bias_acc.size()); }

  Eigen::VectorXd bias_acc;
  Eigen::MatrixXd cov_acc;
  Eigen::VectorXd synced_bias;
  Eigen::MatrixXd synced_cov;
};

// Confidence radius
//   beta_t = sqrt(2 ln(2/alpha) + d ln(1 + M t / (d lambda))) + sqrt(lambda).
// Natural logarithms throughout. t may be 0, in which case the data term
// vanishes. Requires lambda > 0 and alpha in (0, 1].
double BetaRadius(int64_t t, int num_silos, int dim, double lambda,
                  double alpha);

// Regularizer max{1, sigma_total (sqrt(d) + sqrt(ln(T / (B alpha))))}, with
// sigma_total the standard deviation of the aggregated privacy noise.
double DefaultLambda(double sigma_total, int dim, int64_t horizon,
                     int64_t batch_size, double alpha);

struct ConfidenceSchedule {
  double lambda = 1.0;
  double alpha = 0.01;
  int num_silos = 1;
  int dim = 1;

  double Beta(int64_t t) const {
    return BetaRadius(t, num_silos, dim, lambda, alpha);
  }
};

// Ridge estimate built from V = lambda I + gram and theta = V^{-1} bias.
// When noise makes V indefinite, lambda 2^j I is added for j = 1, 2, ...
// until the Cholesky factorization succeeds; jitter_steps records j.
struct UcbModel {
  Eigen::LLT<Eigen::MatrixXd> factor;
  Eigen::VectorXd theta_hat;
  int jitter_steps = 0;
};

absl::StatusOr<UcbModel> FitUcbModel(const Eigen::MatrixXd& gram,
                                     const Eigen::VectorXd& bias,
                                     double lambda);

struct UcbChoice {
  int index = 0;
  double ucb = 0.0;
  int jitter_steps = 0;
};

// argmax_a <phi_a, theta> + beta ||phi_a||_{V^{-1}}, lowest index on ties.
// `round` and `silo` only label error messages.
absl::StatusOr<UcbChoice> SelectArm(const UcbModel& model, const ArmSet& arms,
                                    double beta, int64_t round = 0,
                                    int silo = 0);

// One LinUCB decision from the silo's full view: V = lambda I + W_syn + W_i,
// theta = V^{-1}(U_syn + U_i), radius schedule.Beta(t).
absl::StatusOr<UcbChoice> UcbSelect(const ArmSet& arms, const SiloState& state,
                                    const ConfidenceSchedule& schedule,
                                    int64_t t, int silo = 0);

// max_a <phi_a, theta*> - <phi_chosen, theta*>. Both terms come from the same
// product so the result is exactly zero for an optimal arm and never negative.
double PseudoRegretStep(const ArmSet& arms, const Eigen::VectorXd& theta_star,
                        int chosen);

class RegretTrace {
 public:
  RegretTrace() = default;
  explicit RegretTrace(int64_t horizon);

  void Append(double group_regret);
  const std::vector<double>& per_round() const { return per_round_; }
  const std::vector<double>& cumulative() const { return cumulative_; }
  int64_t size() const { return static_cast<int64_t>(per_round_.size()); }

  // cumulative[t-1] / t for t = 1..size().
  std::vector<double> TimeAveraged() const;

 private:
  std::vector<double> per_round_;
  std::vector<double> cumulative_;
};

}  // namespace fedbandit

#endif  // FEDBANDIT_BANDIT_CORE_H_
