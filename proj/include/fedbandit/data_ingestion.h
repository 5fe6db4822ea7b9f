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

// Bandit instances: a synthetic construction with unit-norm features and a
// learning-to-rank instance built from LETOR-format files.

#ifndef FEDBANDIT_DATA_INGESTION_H_
#define FEDBANDIT_DATA_INGESTION_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "fedbandit/bandit_core.h"
#include "fedbandit/random.h"

namespace fedbandit {

// Feature generation, hidden parameter and reward noise for M silos.
// Instances are immutable after construction and safe to share across
// threads; all randomness comes from the caller's streams.
class BanditInstance {
 public:
  BanditInstance(Eigen::VectorXd theta_star, double reward_noise_sd);
  virtual ~BanditInstance() = default;

  int dim() const { return static_cast<int>(theta_star_.size()); }
  const Eigen::VectorXd& theta_star() const { return theta_star_; }
  double reward_noise_sd() const { return reward_noise_sd_; }

  // Arms offered at round t to `silo`, one feature vector per column.
  virtual ArmSet DrawArms(int64_t t, int silo, Rng& rng) const = 0;

  // <x, theta*> plus Gaussian noise, clipped to [0, 1]. Sets *clipped when
  // clipping changed the value.
  double DrawReward(const FeatureVector& x, Rng& rng, bool* clipped) const;

  // Short human-readable description for run manifests.
  virtual std::string Describe() const = 0;

 private:
  Eigen::VectorXd theta_star_;
  double reward_noise_sd_;
};

struct SyntheticSpec {
  int dim = 10;
  int arms = 100;
  double reward_noise_sd = 0.5;
};

// theta* and every arm are (u, 1/sqrt(2)) with u uniform on the sphere of
// radius 1/sqrt(2) in d - 1 dimensions. Fresh arms for every (round, silo).
absl::StatusOr<std::unique_ptr<BanditInstance>> MakeSynthetic(
    const SyntheticSpec& spec, int num_silos, Rng& rng);

enum class FeatureSlice { kTitle, kBody };

// First (1-based) LETOR feature index and width of a slice: title is
// features 1..57, body is 58..135.
int SliceFirstFeature(FeatureSlice slice);
int SliceWidth(FeatureSlice slice);
absl::StatusOr<FeatureSlice> ParseFeatureSlice(absl::string_view name);
std::string FeatureSliceName(FeatureSlice slice);

struct LtrDocument {
  int grade = 0;
  Eigen::VectorXd features;
};

struct LtrQuery {
  int64_t qid = 0;
  std::vector<LtrDocument> documents;
};

struct LtrDataset {
  FeatureSlice slice = FeatureSlice::kTitle;
  // Queries in order of first appearance.
  std::vector<LtrQuery> queries;
  // Grades above 2 that were clamped, with one warning per occurrence.
  int clamped_grades = 0;
  std::vector<std::string> warnings;

  int64_t num_documents() const;
};

// Parses "grade qid:Q idx:val ... [# comment]" lines keeping only the slice's
// features (missing ones are zero). Errors name the offending line.
absl::StatusOr<LtrDataset> ParseLtr(absl::string_view path,
                                    FeatureSlice slice);
absl::StatusOr<LtrDataset> ParseLtrText(absl::string_view text,
                                        FeatureSlice slice);

// Writes the dataset back in LETOR format with the original feature indices.
// Every feature is written, so ParseLtrText(SerializeLtr(ds)) == ds.
std::string SerializeLtr(const LtrDataset& dataset);

struct FeatureNormalization {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
  // Divisor applied to every vector after min-max scaling.
  double norm_scale = 1.0;
};

// Per-feature min-max scaling to [0, 1] (constant features map to 0), then a
// common rescale so that the largest vector norm is 1.
FeatureNormalization NormalizeFeatures(LtrDataset& dataset);

// Ridge regression of grade / 2 on the features, rescaled to norm <= 1.
absl::StatusOr<Eigen::VectorXd> FitTheta(const LtrDataset& dataset,
                                         double ridge_lambda);

// Queries sorted by id and dealt round-robin to the silos. Each round a silo
// draws one of its queries uniformly and offers its documents as arms.
absl::StatusOr<std::unique_ptr<BanditInstance>> MakeLtrInstance(
    const LtrDataset& dataset, const Eigen::VectorXd& theta, int num_silos,
    double reward_noise_sd = 0.5);

// Query ids held by each silo under the round-robin partition.
std::vector<std::vector<int64_t>> PartitionQueries(const LtrDataset& dataset,
                                                   int num_silos);

}  // namespace fedbandit

#endif  // FEDBANDIT_DATA_INGESTION_H_
