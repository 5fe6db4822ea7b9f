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

#include "fedbandit/sync_protocol.h"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedbandit/random.h"
#include "fedbandit/shuffle_vecsum.h"
#include "fedbandit/shuffler.h"
#include "fedbandit/status_macros.h"
#include "fedbandit/tree_mechanism.h"

namespace fedbandit {

namespace {

Eigen::VectorXd Flatten(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Eigen::MatrixXd Unflatten(const Eigen::VectorXd& v, int dim) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), dim, dim);
}

Eigen::VectorXd StreamItem(const SiloState& silo, StreamTag tag) {
  return tag == StreamTag::kBias ? silo.bias_acc : Flatten(silo.cov_acc);
}

PayloadShape StreamShape(StreamTag tag, int dim) {
  return tag == StreamTag::kBias ? PayloadShape::Vector(dim)
                                 : PayloadShape::SymmetricMatrix(dim);
}

constexpr StreamTag kStreams[] = {StreamTag::kBias, StreamTag::kCovariance};

absl::Status CheckSilos(absl::Span<const SiloState> silos, int num_silos) {
  if (static_cast<int>(silos.size()) != num_silos) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Synchronization got %d silos, expected %d", silos.size(), num_silos));
  }
  return absl::OkStatus();
}

class ExactSync : public SyncProtocol {
 public:
  explicit ExactSync(const SyncSetup& setup)
      : num_silos_(setup.num_silos),
        stats_{Eigen::VectorXd::Zero(setup.dim),
               Eigen::MatrixXd::Zero(setup.dim, setup.dim)} {}

  absl::StatusOr<SyncedStats> Synchronize(
      int64_t /*k*/, absl::Span<const SiloState> silos) override {
    RETURN_IF_ERROR(CheckSilos(silos, num_silos_));
    for (const SiloState& s : silos) {
      stats_.bias += s.bias_acc;
      stats_.cov += s.cov_acc;
    }
    messages_ += 2 * num_silos_;
    return stats_;
  }

 private:
  int num_silos_;
  SyncedStats stats_;
};

// Gaussian tree protocol. Every silo runs one randomizer per stream; the
// released messages travel serialized through the shuffler.
class GaussianTreeSync : public SyncProtocol {
 public:
  explicit GaussianTreeSync(const SyncSetup& setup)
      : setup_(setup),
        sigma0_(setup.zero_noise ? 0.0 : std::sqrt(setup.plan.sigma0_sq)) {
    for (StreamTag tag : kStreams) {
      const PayloadShape shape = StreamShape(tag, setup.dim);
      const int s = static_cast<int>(tag);
      analyzers_.emplace_back(setup.rounds, setup.num_silos, shape);
      for (int i = 0; i < setup.num_silos; ++i) {
        if (setup.variant == TreeVariant::kPSum) {
          trees_[s].emplace_back(setup.rounds, shape);
        } else {
          alt_[s].emplace_back(setup.rounds, shape);
        }
      }
    }
  }

  absl::StatusOr<SyncedStats> Synchronize(
      int64_t k, absl::Span<const SiloState> silos) override {
    RETURN_IF_ERROR(CheckSilos(silos, setup_.num_silos));
    std::vector<Eigen::VectorXd> per_stream;
    for (StreamTag tag : kStreams) {
      const int s = static_cast<int>(tag);
      const int length = StreamShape(tag, setup_.dim).size();
      std::vector<std::string> wire;
      wire.reserve(setup_.num_silos);
      for (int i = 0; i < setup_.num_silos; ++i) {
        Rng rng = MakeStream(setup_.seed, StreamPurpose::kPrivacyNoise,
                             {static_cast<uint64_t>(i),
                              static_cast<uint64_t>(k),
                              static_cast<uint64_t>(tag)});
        const Eigen::VectorXd item = StreamItem(silos[i], tag);
        absl::StatusOr<Eigen::VectorXd> out =
            setup_.variant == TreeVariant::kPSum
                ? trees_[s][i].RandomizerStep(k, item, sigma0_, rng)
                : alt_[s][i].Step(k, item, sigma0_, rng);
        if (!out.ok()) {
          return absl::Status(out.status().code(),
                              absl::StrFormat("silo %d: %s", i,
                                              out.status().message()));
        }
        wire.push_back(PSumMessage{k, tag, *std::move(out)}.Serialize());
      }
      Rng shuffle_rng = MakeStream(setup_.seed, StreamPurpose::kShuffler,
                                   {static_cast<uint64_t>(k),
                                    static_cast<uint64_t>(tag)});
      wire = Shuffler(std::move(wire), setup_.plan.mode, shuffle_rng);
      messages_ += static_cast<int64_t>(wire.size());

      std::vector<Eigen::VectorXd> payloads;
      payloads.reserve(wire.size());
      for (const std::string& bytes : wire) {
        ASSIGN_OR_RETURN(PSumMessage msg, PSumMessage::Parse(bytes, length));
        if (msg.round != k || msg.tag != tag) {
          return absl::InternalError("Message routed to the wrong round");
        }
        payloads.push_back(std::move(msg.payload));
      }
      if (setup_.variant == TreeVariant::kPSum) {
        ASSIGN_OR_RETURN(Eigen::VectorXd prefix,
                         analyzers_[s].AnalyzerStep(k, payloads));
        per_stream.push_back(std::move(prefix));
      } else {
        Eigen::VectorXd total = Eigen::VectorXd::Zero(length);
        for (const Eigen::VectorXd& p : payloads) total += p;
        per_stream.push_back(std::move(total));
      }
    }
    return SyncedStats{per_stream[0], Unflatten(per_stream[1], setup_.dim)};
  }

 private:
  SyncSetup setup_;
  double sigma0_;
  std::vector<TreeAnalyzer> analyzers_;
  std::vector<PSumTree> trees_[2];
  std::vector<PrefixAltRandomizer> alt_[2];
};

// Vector-sum tree protocol: the dyadic window of each round is expanded
// into individual items and summed by the shuffled binomial protocol.
class VecSumSync : public SyncProtocol {
 public:
  explicit VecSumSync(const SyncSetup& setup) : setup_(setup) {
    budget_.eps0 = setup.plan.local_eps0;
    budget_.delta0 = setup.plan.local_delta0;
    budget_.zero_noise = setup.zero_noise;
    for (int i = 0; i < setup.num_silos; ++i) {
      histories_.emplace_back(setup.dim, setup.batch_size);
    }
    for (StreamTag tag : kStreams) {
      analyzers_.emplace_back(setup.rounds, setup.num_silos,
                              StreamShape(tag, setup.dim));
    }
  }

  void Observe(int silo, const FeatureVector& x, double reward) override {
    histories_[silo].Record(x, reward);
  }

  absl::StatusOr<SyncedStats> Synchronize(
      int64_t k, absl::Span<const SiloState> silos) override {
    RETURN_IF_ERROR(CheckSilos(silos, setup_.num_silos));
    std::vector<Eigen::VectorXd> per_stream;
    for (StreamTag tag : kStreams) {
      ASSIGN_OR_RETURN(VecSumRoundResult round,
                       TreeVecSumRound(k, tag, histories_, budget_,
                                       setup_.seed));
      messages_ += round.messages;
      ASSIGN_OR_RETURN(
          Eigen::VectorXd prefix,
          analyzers_[static_cast<int>(tag)].Absorb(k,
                                                   std::move(round.aggregate)));
      per_stream.push_back(std::move(prefix));
    }
    return SyncedStats{per_stream[0], Unflatten(per_stream[1], setup_.dim)};
  }

 private:
  SyncSetup setup_;
  VecSumBudget budget_;
  std::vector<VecSumHistory> histories_;
  std::vector<TreeAnalyzer> analyzers_;
};

}  // namespace

absl::StatusOr<std::unique_ptr<SyncProtocol>> MakeSyncProtocol(
    const SyncSetup& setup) {
  if (setup.num_silos < 1 || setup.dim < 1 || setup.rounds < 1 ||
      setup.batch_size < 1) {
    return absl::InvalidArgumentError(
        "Synchronization needs M, d, K and B all positive");
  }
  switch (setup.plan.mode) {
    case PrivacyMode::kNonPrivate:
      return std::make_unique<ExactSync>(setup);
    case PrivacyMode::kSiloLdp:
    case PrivacyMode::kSdpAmplify:
      return std::make_unique<GaussianTreeSync>(setup);
    case PrivacyMode::kSdpVecSum:
      return std::make_unique<VecSumSync>(setup);
  }
  return absl::InvalidArgumentError("Unknown privacy mode");
}

}  // namespace fedbandit
