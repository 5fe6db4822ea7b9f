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

#include "fedbandit/shuffle_vecsum.h"

#include <cmath>
#include <cstring>
#include <random>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedbandit/shuffler.h"
#include "fedbandit/status_macros.h"

namespace fedbandit {

namespace {

constexpr double kMaxEps0 = 15.0;
constexpr double kMaxTrials = 9007199254740992.0;  // 2^53

// Reusable randomizer for one parameter set. The binomial draw is exact
// (libstdc++ uses inversion for small means and rejection otherwise).
class ScalarRandomizer {
 public:
  explicit ScalarRandomizer(const ScalarShuffleParams& params)
      : params_(params), binomial_(params.b, params.p) {}

  absl::StatusOr<int64_t> operator()(double x, Rng& rng) {
    if (!(x >= 0.0 && x <= params_.range)) {
      return absl::OutOfRangeError(absl::StrFormat(
          "Scalar %.17g outside [0, %g]", x, params_.range));
    }
    const double scaled = x * static_cast<double>(params_.g) / params_.range;
    const double floor_value = std::floor(scaled);
    int64_t count = static_cast<int64_t>(floor_value);
    const double frac = scaled - floor_value;
    if (frac > 0.0 && unit_(rng) < frac) ++count;
    if (params_.b > 0) count += binomial_(rng);
    return count;
  }

 private:
  ScalarShuffleParams params_;
  std::binomial_distribution<int64_t> binomial_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

// (range / g)(sum - p b n), with p = 1/4 evaluated exactly in integers.
double Debias(__int128 count_sum, int64_t n, const ScalarShuffleParams& params) {
  double centred;
  if (params.p == 0.25) {
    const __int128 four_times =
        4 * count_sum - static_cast<__int128>(params.b) * n;
    centred = static_cast<double>(four_times) / 4.0;
  } else {
    centred = static_cast<double>(count_sum) -
              params.p * static_cast<double>(params.b) * static_cast<double>(n);
  }
  return params.range / static_cast<double>(params.g) * centred;
}

ScalarShuffleParams VectorScalarParams(const ScalarShuffleParams& params) {
  ScalarShuffleParams scalar = params;
  scalar.range = 2.0 * params.range;
  return scalar;
}

void AppendInt64(int64_t value, std::string& out) {
  char buf[sizeof(int64_t)];
  std::memcpy(buf, &value, sizeof(int64_t));
  out.append(buf, sizeof(int64_t));
}

int64_t ReadInt64(const char* data) {
  int64_t value;
  std::memcpy(&value, data, sizeof(int64_t));
  return value;
}

}  // namespace

absl::StatusOr<ScalarShuffleParams> ChooseParams(int64_t n, int dim,
                                                 double eps0, double delta0) {
  if (n < 1 || dim < 1) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Vector sum needs n >= 1 and d >= 1, got n = %d, d = %d", n, dim));
  }
  if (!(eps0 > 0.0 && eps0 <= kMaxEps0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("eps0 must lie in (0, 15], got %g", eps0));
  }
  if (!(delta0 > 0.0 && delta0 < 0.5)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("delta0 must lie in (0, 1/2), got %g", delta0));
  }
  ScalarShuffleParams params;
  const double nd = static_cast<double>(n);
  params.g = std::max<int64_t>(
      {static_cast<int64_t>(std::ceil(2.0 * std::sqrt(nd))), dim, 4});
  const double g = static_cast<double>(params.g);
  const double d = static_cast<double>(dim);
  const double log_term = std::log(4.0 * (d * d + 1.0) / delta0);
  const double b = std::ceil(24e4 * g * g * log_term * log_term /
                             (eps0 * eps0 * nd));
  if (!(b <= kMaxTrials)) {
    return absl::OutOfRangeError(absl::StrFormat(
        "Binomial trial count %g exceeds 2^53 (eps0 = %g, n = %d)", b, eps0,
        n));
  }
  params.b = static_cast<int64_t>(b);
  params.p = 0.25;
  params.range = 1.0;
  return params;
}

absl::StatusOr<int64_t> RandomizeScalar(double x,
                                        const ScalarShuffleParams& params,
                                        Rng& rng) {
  ScalarRandomizer randomizer(params);
  return randomizer(x, rng);
}

absl::StatusOr<double> AnalyzeScalar(absl::Span<const int64_t> counts,
                                     int64_t n,
                                     const ScalarShuffleParams& params) {
  if (static_cast<int64_t>(counts.size()) != n) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Analyzer expects %d counts, got %d", n, counts.size()));
  }
  __int128 sum = 0;
  for (int64_t c : counts) sum += c;
  return Debias(sum, n, params);
}

std::string ShuffleMessage::Serialize() const {
  std::string out;
  out.reserve(4 * sizeof(int64_t));
  AppendInt64(round, out);
  AppendInt64(static_cast<int64_t>(tag), out);
  AppendInt64(coordinate, out);
  AppendInt64(count, out);
  return out;
}

absl::StatusOr<ShuffleMessage> ShuffleMessage::Parse(absl::string_view bytes) {
  if (bytes.size() != 4 * sizeof(int64_t)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "ShuffleMessage has %d bytes, expected 32", bytes.size()));
  }
  ShuffleMessage msg;
  msg.round = ReadInt64(bytes.data());
  const int64_t tag = ReadInt64(bytes.data() + 8);
  if (tag != static_cast<int64_t>(StreamTag::kBias) &&
      tag != static_cast<int64_t>(StreamTag::kCovariance)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Unknown stream tag %d", tag));
  }
  msg.tag = static_cast<StreamTag>(tag);
  msg.coordinate = ReadInt64(bytes.data() + 16);
  msg.count = ReadInt64(bytes.data() + 24);
  return msg;
}

absl::StatusOr<std::vector<ShuffleMessage>> VecRandomize(
    const Eigen::VectorXd& x, int64_t round, StreamTag tag,
    const ScalarShuffleParams& params, Rng& rng) {
  ScalarRandomizer randomizer(VectorScalarParams(params));
  std::vector<ShuffleMessage> out;
  out.reserve(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!(std::abs(x(j)) <= params.range)) {
      return absl::OutOfRangeError(absl::StrFormat(
          "Coordinate %d = %.17g outside [-%g, %g]", j, x(j), params.range,
          params.range));
    }
    ASSIGN_OR_RETURN(const int64_t count,
                     randomizer(x(j) + params.range, rng));
    out.push_back({round, tag, static_cast<int64_t>(j), count});
  }
  return out;
}

absl::StatusOr<Eigen::VectorXd> VecAnalyze(
    absl::Span<const ShuffleMessage> messages, int64_t n, int dim,
    const ScalarShuffleParams& params) {
  std::vector<__int128> sums(dim, 0);
  std::vector<int64_t> seen(dim, 0);
  for (const ShuffleMessage& msg : messages) {
    if (msg.coordinate < 0 || msg.coordinate >= dim) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "Message coordinate %d outside [0, %d)", msg.coordinate, dim));
    }
    sums[msg.coordinate] += msg.count;
    ++seen[msg.coordinate];
  }
  const ScalarShuffleParams scalar = VectorScalarParams(params);
  Eigen::VectorXd estimate(dim);
  for (int j = 0; j < dim; ++j) {
    if (seen[j] != n) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "Coordinate %d has %d messages, expected %d", j, seen[j], n));
    }
    estimate(j) = Debias(sums[j], n, scalar) -
                  static_cast<double>(n) * params.range;
  }
  return estimate;
}

VecSumHistory::VecSumHistory(int dim, int64_t batch_size)
    : dim_(dim), batch_size_(batch_size) {}

void VecSumHistory::Record(const FeatureVector& x, double reward) {
  features_.push_back(x);
  rewards_.push_back(reward);
}

absl::StatusOr<Eigen::MatrixXd> VecSumHistory::WindowItems(
    int64_t k, StreamTag tag) const {
  if (k < 1) {
    return absl::OutOfRangeError(absl::StrFormat("Round %d must be >= 1", k));
  }
  const int64_t width = int64_t{1} << FirstOneIndex(k);
  const int64_t begin = (k - width) * batch_size_;
  const int64_t end = k * batch_size_;
  if (rounds_recorded() < end) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "History holds %d rounds, round %d needs rounds up to %d",
        rounds_recorded(), k, end));
  }
  const int rows = tag == StreamTag::kBias ? dim_ : dim_ * dim_;
  Eigen::MatrixXd items(rows, end - begin);
  for (int64_t t = begin; t < end; ++t) {
    const Eigen::VectorXd& x = features_[t];
    if (tag == StreamTag::kBias) {
      items.col(t - begin) = x * rewards_[t];
    } else {
      const Eigen::MatrixXd outer = x * x.transpose();
      items.col(t - begin) =
          Eigen::Map<const Eigen::VectorXd>(outer.data(), rows);
    }
  }
  return items;
}

absl::StatusOr<VecSumRoundResult> TreeVecSumRound(
    int64_t k, StreamTag tag, absl::Span<const VecSumHistory> histories,
    const VecSumBudget& budget, uint64_t seed) {
  if (histories.empty()) {
    return absl::InvalidArgumentError("Vector-sum round needs agents");
  }
  const int dim = histories[0].dim();
  const int64_t width = int64_t{1} << FirstOneIndex(k);
  const int64_t n = width * histories[0].batch_size() *
                    static_cast<int64_t>(histories.size());
  const int rows = tag == StreamTag::kBias ? dim : dim * dim;

  VecSumRoundResult result;
  result.contributors = n;
  if (budget.zero_noise) {
    result.params.g = std::max<int64_t>(
        {static_cast<int64_t>(std::ceil(2.0 * std::sqrt(double(n)))), dim, 4});
    result.params.b = 0;
  } else {
    ASSIGN_OR_RETURN(result.params,
                     ChooseParams(n, dim, budget.eps0, budget.delta0));
  }

  std::vector<ShuffleMessage> messages;
  messages.reserve(static_cast<size_t>(n) * rows);
  for (size_t agent = 0; agent < histories.size(); ++agent) {
    const VecSumHistory& history = histories[agent];
    if (history.dim() != dim) {
      return absl::InvalidArgumentError("Agents disagree on the dimension");
    }
    ASSIGN_OR_RETURN(const Eigen::MatrixXd items, history.WindowItems(k, tag));
    Rng rng = MakeStream(seed, StreamPurpose::kPrivacyNoise,
                         {agent, static_cast<uint64_t>(k),
                          static_cast<uint64_t>(tag)});
    for (Eigen::Index c = 0; c < items.cols(); ++c) {
      ASSIGN_OR_RETURN(std::vector<ShuffleMessage> batch,
                       VecRandomize(items.col(c), k, tag, result.params, rng));
      messages.insert(messages.end(), batch.begin(), batch.end());
    }
  }
  Rng shuffle_rng = MakeStream(seed, StreamPurpose::kShuffler,
                               {static_cast<uint64_t>(k),
                                static_cast<uint64_t>(tag)});
  messages = Shuffler(std::move(messages), PrivacyMode::kSdpVecSum,
                      shuffle_rng);
  result.messages = static_cast<int64_t>(messages.size());
  ASSIGN_OR_RETURN(result.aggregate,
                   VecAnalyze(messages, n, rows, result.params));
  if (tag == StreamTag::kCovariance) {
    Eigen::Map<Eigen::MatrixXd> m(result.aggregate.data(), dim, dim);
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    m = sym;
  }
  return result;
}

absl::StatusOr<NoisePlan> CalibrateSdpVecSum(const PrivacyBudget& budget,
                                             int num_silos, int64_t horizon,
                                             int64_t batch_size, int dim) {
  if (budget.mode != PrivacyMode::kSdpVecSum) {
    return absl::InvalidArgumentError("CalibrateSdpVecSum needs mode SDPVecSum");
  }
  RETURN_IF_ERROR(ValidateBudget(budget));
  if (num_silos < 1 || dim < 1 || horizon < 1 || batch_size < 1 ||
      horizon % batch_size != 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Need M, d >= 1 and a horizon %d that is a positive multiple of the "
        "batch size %d",
        horizon, batch_size));
  }
  const int64_t rounds = horizon / batch_size;
  NoisePlan plan;
  plan.mode = PrivacyMode::kSdpVecSum;
  plan.kappa = TreeDepth(rounds);
  const ComposedBudget use =
      SplitForComposition(budget.epsilon / 2.0, budget.delta / 2.0, plan.kappa);
  plan.per_round_eps = use.epsilon;
  plan.per_round_delta = use.delta;
  plan.local_eps0 = use.epsilon;
  plan.local_delta0 = use.delta;

  // The widest window the tree ever expands covers 2^{kappa-1} batches.
  const int64_t n = (int64_t{1} << (plan.kappa - 1)) * batch_size * num_silos;
  ASSIGN_OR_RETURN(const ScalarShuffleParams params,
                   ChooseParams(n, dim, use.epsilon, use.delta));
  // Per item: Binomial variance b p (1 - p) plus at most 1/4 from rounding,
  // on the grid of step 2L / g.
  const double step = 2.0 * params.range / static_cast<double>(params.g);
  plan.sigma0_sq = step * step * static_cast<double>(n) *
                   (static_cast<double>(params.b) * params.p * (1.0 - params.p) +
                    0.25);
  plan.sigma_total_sq = plan.kappa * plan.sigma0_sq;
  return plan;
}

double VecSumEpsilonBound(int kappa, double delta) {
  return 60.0 * std::sqrt(2.0 * kappa * std::log(2.0 / delta));
}

}  // namespace fedbandit
