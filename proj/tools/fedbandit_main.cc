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

// Runs a grid of private federated LinUCB experiments.
//
//   fedbandit_cli --config=grid.ini --output_dir=out --parallelism=4
//   fedbandit_cli --config=grid.ini --dry_run
//   fedbandit_cli --from_manifest=out/manifest.json --output_dir=rerun
//
// Exit code is 0 only when every cell that was not skipped completed.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "absl/flags/flag.h"
#include "absl/flags/parse.h"
#include "absl/flags/usage.h"
#include "fedbandit/experiment.h"

ABSL_FLAG(std::string, config, "", "Path to the experiment config file.");
ABSL_FLAG(std::string, output_dir, "",
          "Output directory; overrides output_dir from the config.");
ABSL_FLAG(int, parallelism, 0,
          "Worker threads; 0 uses the hardware concurrency.");
ABSL_FLAG(bool, dry_run, false, "Validate the config and print the grid.");
ABSL_FLAG(std::string, from_manifest, "",
          "Re-run the resolved config stored in a previous run manifest.");

namespace {

int Fail(const std::string& message) {
  std::fprintf(stderr, "error: %s\n", message.c_str());
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  absl::SetProgramUsageMessage(
      "Private federated linear bandit experiments.\n"
      "Usage: fedbandit_cli --config=FILE [--output_dir=DIR] "
      "[--parallelism=N] [--dry_run] | --from_manifest=FILE");
  absl::ParseCommandLine(argc, argv);

  const std::string config_path = absl::GetFlag(FLAGS_config);
  const std::string manifest_path = absl::GetFlag(FLAGS_from_manifest);
  if (config_path.empty() == manifest_path.empty()) {
    return Fail("pass exactly one of --config or --from_manifest");
  }

  absl::StatusOr<fedbandit::ExperimentSpec> spec;
  if (!manifest_path.empty()) {
    spec = fedbandit::SpecFromManifest(manifest_path);
  } else {
    std::ifstream in(config_path);
    if (!in) return Fail("cannot open config " + config_path);
    std::stringstream text;
    text << in.rdbuf();
    spec = fedbandit::ValidateConfig(text.str());
  }
  if (!spec.ok()) {
    std::fprintf(stderr, "invalid config:\n%s\n",
                 std::string(spec.status().message()).c_str());
    return 2;
  }

  std::string output_dir = absl::GetFlag(FLAGS_output_dir);
  if (output_dir.empty()) output_dir = spec->output_dir;
  if (output_dir.empty()) output_dir = "fedbandit_out";
  spec->output_dir = output_dir;

  if (absl::GetFlag(FLAGS_dry_run)) {
    std::printf("config ok: %zu cells x %zu seeds\n", spec->Cells().size(),
                spec->seeds.size());
    for (const fedbandit::GridCell& cell : spec->Cells()) {
      std::printf("  %s\n", cell.name.c_str());
    }
    return 0;
  }

  int parallelism = absl::GetFlag(FLAGS_parallelism);
  if (parallelism <= 0) {
    parallelism = std::max(1u, std::thread::hardware_concurrency());
  }
  absl::StatusOr<fedbandit::ExperimentReport> report =
      fedbandit::RunExperiment(*spec, parallelism);
  if (!report.ok()) return Fail(std::string(report.status().message()));
  absl::Status written = fedbandit::WriteOutputs(*spec, *report, output_dir);
  if (!written.ok()) return Fail(std::string(written.message()));

  for (const fedbandit::CellOutcome& cell : report->cells) {
    if (cell.status == fedbandit::CellStatus::kCompleted) {
      std::printf("%-36s completed  Reg(T)/T = %.6g\n", cell.cell.name.c_str(),
                  cell.mean.back());
    } else {
      std::printf("%-36s %-10s %s\n", cell.cell.name.c_str(),
                  fedbandit::CellStatusName(cell.status).c_str(),
                  cell.reason.c_str());
    }
  }
  std::printf("outputs in %s (%.1f s)\n", output_dir.c_str(),
              report->wall_seconds);
  return report->AllCompleted() ? 0 : 1;
}
