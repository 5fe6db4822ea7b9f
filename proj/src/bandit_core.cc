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

#include "fedbandit/bandit_core.h"

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedbandit/status_macros.h"

namespace fedbandit {

namespace {

// Enough doublings to move lambda past any finite noise magnitude.
constexpr int kMaxJitterSteps = 128;

}  // namespace

SiloState::SiloState(int dim)
    : bias_acc(Eigen::VectorXd::Zero(dim)),
      cov_acc(Eigen::MatrixXd::Zero(dim, dim)),
      synced_bias(Eigen::VectorXd::Zero(dim)),
      synced_cov(Eigen::MatrixXd::Zero(dim, dim)) {}

void SiloState::Accumulate(const FeatureVector& x, double reward) {
  bias_acc.noalias() += reward * x;
  cov_acc.noalias() += x * x.transpose();
}

void SiloState::ResetLocal() {
  bias_acc.setZero();
  cov_acc.setZero();
}

double BetaRadius(int64_t t, int num_silos, int dim, double lambda,
                  double alpha) {
  const double d = static_cast<double>(dim);
  const double data_term =
      d * std::log1p(static_cast<double>(num_silos) * static_cast<double>(t) /
                     (d * lambda));
  return std::sqrt(2.0 * std::log(2.0 / alpha) + data_term) +
         std::sqrt(lambda);
}

double DefaultLambda(double sigma_total, int dim, int64_t horizon,
                     int64_t batch_size, double alpha) {
  const double log_term = std::log(static_cast<double>(horizon) /
                                   (static_cast<double>(batch_size) * alpha));
  const double scale =
      std::sqrt(static_cast<double>(dim)) + std::sqrt(std::max(0.0, log_term));
  return std::max(1.0, sigma_total * scale);
}

absl::StatusOr<UcbModel> FitUcbModel(const Eigen::MatrixXd& gram,
                                     const Eigen::VectorXd& bias,
                                     double lambda) {
  const Eigen::Index d = bias.size();
  if (gram.rows() != d || gram.cols() != d) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Gram matrix is %dx%d but bias has dimension %d",
                        gram.rows(), gram.cols(), d));
  }
  if (!(lambda > 0.0)) {
    return absl::InvalidArgumentError("lambda must be positive");
  }
  UcbModel model;
  Eigen::MatrixXd v = gram;
  v.diagonal().array() += lambda;
  model.factor.compute(v);
  while (model.factor.info() != Eigen::Success) {
    if (++model.jitter_steps > kMaxJitterSteps) {
      return absl::InternalError(
          "Regularized Gram matrix could not be made positive definite");
    }
    v.diagonal().array() += lambda * std::ldexp(1.0, model.jitter_steps);
    model.factor.compute(v);
  }
  model.theta_hat = model.factor.solve(bias);
  return model;
}

absl::StatusOr<UcbChoice> SelectArm(const UcbModel& model, const ArmSet& arms,
                                    double beta, int64_t round, int silo) {
  if (arms.cols() == 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Empty arm set at round %d, silo %d", round, silo));
  }
  if (arms.rows() != model.theta_hat.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Arm dimension %d does not match model dimension %d at round %d, "
        "silo %d",
        arms.rows(), model.theta_hat.size(), round, silo));
  }
  const Eigen::VectorXd payoff = arms.transpose() * model.theta_hat;
  // ||phi||_{V^{-1}} = ||L^{-1} phi|| with V = L L^T.
  const Eigen::MatrixXd whitened =
      model.factor.matrixL().solve(arms);
  const Eigen::VectorXd width = whitened.colwise().norm().transpose();

  UcbChoice choice;
  choice.jitter_steps = model.jitter_steps;
  for (Eigen::Index a = 0; a < arms.cols(); ++a) {
    const double ucb = payoff(a) + beta * width(a);
    if (!std::isfinite(ucb)) {
      return absl::InternalError(absl::StrFormat(
          "Non-finite UCB value for arm %d at round %d, silo %d", a, round,
          silo));
    }
    if (a == 0 || ucb > choice.ucb) {
      choice.index = static_cast<int>(a);
      choice.ucb = ucb;
    }
  }
  return choice;
}

absl::StatusOr<UcbChoice> UcbSelect(const ArmSet& arms, const SiloState& state,
                                    const ConfidenceSchedule& schedule,
                                    int64_t t, int silo) {
  if (state.dim() != schedule.dim) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Silo state dimension %d does not match schedule "
                        "dimension %d",
                        state.dim(), schedule.dim));
  }
  ASSIGN_OR_RETURN(UcbModel model,
                   FitUcbModel(state.synced_cov + state.cov_acc,
                               state.synced_bias + state.bias_acc,
                               schedule.lambda));
  return SelectArm(model, arms, schedule.Beta(t), t, silo);
}

double PseudoRegretStep(const ArmSet& arms, const Eigen::VectorXd& theta_star,
                        int chosen) {
  const Eigen::VectorXd payoff = arms.transpose() * theta_star;
  return payoff.maxCoeff() - payoff(chosen);
}

RegretTrace::RegretTrace(int64_t horizon) {
  per_round_.reserve(horizon);
  cumulative_.reserve(horizon);
}

void RegretTrace::Append(double group_regret) {
  per_round_.push_back(group_regret);
  cumulative_.push_back(
      (cumulative_.empty() ? 0.0 : cumulative_.back()) + group_regret);
}

std::vector<double> RegretTrace::TimeAveraged() const {
  std::vector<double> out(cumulative_.size());
  for (size_t t = 0; t < cumulative_.size(); ++t) {
    out[t] = cumulative_[t] / static_cast<double>(t + 1);
  }
  return out;
}

}  // namespace fedbandit
