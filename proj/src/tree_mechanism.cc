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

#include "fedbandit/tree_mechanism.h"

#include <bit>
#include <cstring>
#include <random>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedbandit/status_macros.h"

namespace fedbandit {

static_assert(std::endian::native == std::endian::little,
              "PSumMessage encoding assumes a little-endian host");

namespace {

absl::Status CheckStep(int64_t k, int64_t last_step, int64_t capacity) {
  if (k < 1 || k > capacity) {
    return absl::OutOfRangeError(absl::StrFormat(
        "Tree step %d outside [1, %d]", k, capacity));
  }
  if (k != last_step + 1) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "Tree step %d out of order: expected step %d", k, last_step + 1));
  }
  return absl::OkStatus();
}

}  // namespace

int FirstOneIndex(int64_t k) {
  return std::countr_zero(static_cast<uint64_t>(k));
}

int TreeDepth(int64_t capacity) {
  return std::bit_width(static_cast<uint64_t>(capacity));
}

std::vector<int> PrefixLevels(int64_t k) {
  std::vector<int> levels;
  for (uint64_t rest = static_cast<uint64_t>(k); rest != 0;
       rest &= rest - 1) {
    levels.push_back(std::countr_zero(rest));
  }
  return levels;
}

int ParticipationCount(int64_t capacity, int64_t k) {
  // The level-j interval holding k is released at (m + 1) 2^j with
  // m = floor((k - 1) / 2^j), and only when m + 1 is odd; an even m + 1 means
  // the interval is absorbed into a higher node.
  int count = 0;
  for (int j = 0; j < 63; ++j) {
    const int64_t width = int64_t{1} << j;
    const int64_t block = (k - 1) / width + 1;
    const int64_t release = block * width;
    if (release > capacity) break;
    if (block % 2 == 1) ++count;
  }
  return count;
}

void AddGaussianNoise(const PayloadShape& shape, double sigma, Rng& rng,
                      Eigen::VectorXd& payload) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> normal(0.0, sigma);
  if (!shape.symmetric) {
    for (Eigen::Index i = 0; i < payload.size(); ++i) payload(i) += normal(rng);
    return;
  }
  const int d = shape.rows;
  for (int col = 0; col < d; ++col) {
    for (int row = 0; row <= col; ++row) {
      const double z = normal(rng);
      payload(row + col * d) += z;
      if (row != col) payload(col + row * d) += z;
    }
  }
}

PSumTree::PSumTree(int64_t capacity, PayloadShape shape)
    : capacity_(capacity), shape_(shape), nodes_(TreeDepth(capacity)) {}

absl::StatusOr<int> PSumTree::Advance(int64_t k, const Eigen::VectorXd& item) {
  RETURN_IF_ERROR(CheckStep(k, last_step_, capacity_));
  if (item.size() != shape_.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Stream item has %d entries, tree expects %d", item.size(),
        shape_.size()));
  }
  const int level = FirstOneIndex(k);
  Eigen::VectorXd psum = item;
  for (int j = 0; j < level; ++j) {
    if (nodes_[j].has_value()) psum += *nodes_[j];
    nodes_[j].reset();
  }
  nodes_[level] = std::move(psum);
  last_step_ = k;
  return level;
}

absl::StatusOr<Eigen::VectorXd> PSumTree::RandomizerStep(
    int64_t k, const Eigen::VectorXd& item, double sigma0, Rng& rng) {
  ASSIGN_OR_RETURN(const int level, Advance(k, item));
  Eigen::VectorXd released = *nodes_[level];
  AddGaussianNoise(shape_, sigma0, rng, released);
  return released;
}

int PSumTree::stored_levels() const {
  int n = 0;
  for (const auto& node : nodes_) n += node.has_value() ? 1 : 0;
  return n;
}

PrefixAltRandomizer::PrefixAltRandomizer(int64_t capacity, PayloadShape shape)
    : tree_(capacity, shape), noisy_nodes_(TreeDepth(capacity)) {}

absl::StatusOr<Eigen::VectorXd> PrefixAltRandomizer::Step(
    int64_t k, const Eigen::VectorXd& item, double sigma0, Rng& rng) {
  ASSIGN_OR_RETURN(const int level, tree_.Advance(k, item));
  Eigen::VectorXd noisy = *tree_.nodes_[level];
  AddGaussianNoise(tree_.shape_, sigma0, rng, noisy);
  for (int j = 0; j < level; ++j) noisy_nodes_[j].reset();
  noisy_nodes_[level] = std::move(noisy);

  Eigen::VectorXd prefix = Eigen::VectorXd::Zero(tree_.shape_.size());
  last_levels_used_ = 0;
  for (int j : PrefixLevels(k)) {
    prefix += *noisy_nodes_[j];
    ++last_levels_used_;
  }
  return prefix;
}

TreeAnalyzer::TreeAnalyzer(int64_t capacity, int num_agents,
                           PayloadShape shape)
    : capacity_(capacity),
      num_agents_(num_agents),
      shape_(shape),
      levels_(TreeDepth(capacity)),
      prefix_(Eigen::VectorXd::Zero(shape.size())) {}

absl::StatusOr<Eigen::VectorXd> TreeAnalyzer::AnalyzerStep(
    int64_t k, absl::Span<const Eigen::VectorXd> agent_outputs) {
  if (static_cast<int>(agent_outputs.size()) != num_agents_) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Analyzer received %d p-sums at step %d, expected %d",
        agent_outputs.size(), k, num_agents_));
  }
  Eigen::VectorXd aggregated = Eigen::VectorXd::Zero(shape_.size());
  for (const Eigen::VectorXd& out : agent_outputs) {
    if (out.size() != shape_.size()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "Agent p-sum has %d entries, expected %d", out.size(),
          shape_.size()));
    }
    aggregated += out;
  }
  return Absorb(k, std::move(aggregated));
}

absl::StatusOr<Eigen::VectorXd> TreeAnalyzer::Absorb(
    int64_t k, Eigen::VectorXd aggregated) {
  RETURN_IF_ERROR(CheckStep(k, last_step_, capacity_));
  if (aggregated.size() != shape_.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Aggregated p-sum has %d entries, expected %d", aggregated.size(),
        shape_.size()));
  }
  const int level = FirstOneIndex(k);
  for (int j = 0; j < level; ++j) levels_[j].reset();
  levels_[level] = std::move(aggregated);
  last_step_ = k;

  prefix_.setZero();
  last_levels_used_ = 0;
  for (int j : PrefixLevels(k)) {
    prefix_ += *levels_[j];
    ++last_levels_used_;
  }
  return prefix_;
}

int TreeAnalyzer::stored_levels() const {
  int n = 0;
  for (const auto& level : levels_) n += level.has_value() ? 1 : 0;
  return n;
}

std::string PSumMessage::Serialize() const {
  std::string out(2 * sizeof(int64_t) + payload.size() * sizeof(double), '\0');
  const int64_t tag_value = static_cast<int64_t>(tag);
  std::memcpy(out.data(), &round, sizeof(int64_t));
  std::memcpy(out.data() + sizeof(int64_t), &tag_value, sizeof(int64_t));
  std::memcpy(out.data() + 2 * sizeof(int64_t), payload.data(),
              payload.size() * sizeof(double));
  return out;
}

absl::StatusOr<PSumMessage> PSumMessage::Parse(absl::string_view bytes,
                                               int expected_length) {
  const size_t want =
      2 * sizeof(int64_t) + static_cast<size_t>(expected_length) * sizeof(double);
  if (bytes.size() != want) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "PSumMessage has %d bytes, expected %d", bytes.size(), want));
  }
  PSumMessage msg;
  int64_t tag_value = 0;
  std::memcpy(&msg.round, bytes.data(), sizeof(int64_t));
  std::memcpy(&tag_value, bytes.data() + sizeof(int64_t), sizeof(int64_t));
  if (tag_value != static_cast<int64_t>(StreamTag::kBias) &&
      tag_value != static_cast<int64_t>(StreamTag::kCovariance)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Unknown stream tag %d", tag_value));
  }
  msg.tag = static_cast<StreamTag>(tag_value);
  msg.payload.resize(expected_length);
  std::memcpy(msg.payload.data(), bytes.data() + 2 * sizeof(int64_t),
              static_cast<size_t>(expected_length) * sizeof(double));
  return msg;
}

}  // namespace fedbandit
