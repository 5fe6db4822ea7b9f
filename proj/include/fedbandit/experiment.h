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

// Experiment grids over (mode, epsilon, delta): configuration parsing and
// validation, parallel execution over seeds, CSV output and the run manifest.
//
// Config format (sections and keys are case-sensitive; '#' starts a comment):
//
//   [simulation]
//   M = 10                 # or num_silos
//   T = 2000               # or horizon
//   B = 25                 # or batch_size, default 25
//   alpha = 0.01           # default 0.01
//   lazy = false
//   tree_variant = psum    # or prefix_alt
//   lambda = 0             # > 0 overrides the default regularizer
//
//   [instance]
//   source = synthetic     # or ltr
//   d = 5                  # synthetic only, or dim
//   arms = 100
//   noise_sd = 0.5
//   instance_seed = 1
//   path = data.txt        # ltr only
//   slice = title          # ltr only, or body
//   ridge_lambda = 1
//
//   [grid]
//   modes = NonPrivate, SiloLDP, SDPAmplify, SDPVecSum   # absent: NonPrivate
//   epsilons = 0.2, 1, 5
//   deltas = 0.1
//
//   [experiment]
//   seeds = 1, 2, 3        # empty or absent: 25 seeds 0..24
//   output_dir = out

#ifndef FEDBANDIT_EXPERIMENT_H_
#define FEDBANDIT_EXPERIMENT_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "fedbandit/data_ingestion.h"
#include "fedbandit/federated_sim.h"

namespace fedbandit {

inline constexpr char kFedbanditVersion[] = "0.1.0";
inline constexpr int kDefaultSeedCount = 25;

enum class InstanceSource { kSynthetic, kLtr };

struct InstanceSpec {
  InstanceSource source = InstanceSource::kSynthetic;
  SyntheticSpec synthetic;
  uint64_t instance_seed = 1;
  std::string ltr_path;
  FeatureSlice slice = FeatureSlice::kTitle;
  double ridge_lambda = 1.0;
};

struct GridCell {
  std::string name;
  PrivacyBudget budget;
};

struct ExperimentSpec {
  // Mode, budget and seed are filled in per cell and seed.
  SimConfig base;
  InstanceSpec instance;
  std::vector<PrivacyMode> modes;
  std::vector<double> epsilons;
  std::vector<double> deltas;
  std::vector<uint64_t> seeds;
  std::string output_dir;

  // NonPrivate contributes a single cell; every private mode one cell per
  // (epsilon, delta), in config order.
  std::vector<GridCell> Cells() const;

  // Fully resolved config text; ValidateConfig(ToConfigText()) gives back
  // an equivalent spec.
  std::string ToConfigText() const;
};

// Parses and validates config text, applying defaults. On failure the status
// message lists every violation, one per line, and `errors` (if given)
// receives them individually.
absl::StatusOr<ExperimentSpec> ValidateConfig(
    absl::string_view text, std::vector<std::string>* errors = nullptr);

enum class CellStatus { kCompleted, kSkipped, kFailed };
std::string CellStatusName(CellStatus status);

struct CellOutcome {
  GridCell cell;
  CellStatus status = CellStatus::kCompleted;
  std::string reason;
  NoisePlan plan;
  double lambda = 0.0;
  // Time-averaged group regret per round: mean over seeds and its standard
  // error.
  std::vector<double> mean;
  std::vector<double> standard_error;
  // Per-seed traces in seed order.
  std::vector<RunResult> runs;
  double wall_seconds = 0.0;
};

struct ExperimentReport {
  std::vector<CellOutcome> cells;
  std::string instance_description;
  // Feature normalization applied to an LTR instance, empty otherwise.
  std::string normalization_note;
  double wall_seconds = 0.0;

  // True when every cell that was not skipped completed.
  bool AllCompleted() const;
};

// Builds the experiment's single instance (shared by all cells and seeds).
absl::StatusOr<std::unique_ptr<BanditInstance>> BuildInstance(
    const ExperimentSpec& spec, std::string* normalization_note = nullptr);

// Runs every (cell, seed) pair on `parallelism` threads. Results are merged
// by (cell, seed), so the report does not depend on completion order.
absl::StatusOr<ExperimentReport> RunExperiment(const ExperimentSpec& spec,
                                               int parallelism);

// Mean and standard error over seeds of the time-averaged regret.
void AggregateRuns(const std::vector<RunResult>& runs,
                   std::vector<double>& mean,
                   std::vector<double>& standard_error);

// Writes <dir>/<cell>.csv, <dir>/<cell>/seed_<s>.csv and finally
// <dir>/manifest.json (atomically, via rename).
absl::Status WriteOutputs(const ExperimentSpec& spec,
                          const ExperimentReport& report,
                          const std::string& output_dir);

// Reads the resolved config stored in a manifest.
absl::StatusOr<ExperimentSpec> SpecFromManifest(absl::string_view path);

}  // namespace fedbandit

#endif  // FEDBANDIT_EXPERIMENT_H_
