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

// Acceptance checks AC1..AC11. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. A criterion also fails when it
// exceeds its time budget.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedbandit/bandit_core.h"
#include "fedbandit/data_ingestion.h"
#include "fedbandit/experiment.h"
#include "fedbandit/federated_sim.h"
#include "fedbandit/privacy_accounting.h"
#include "fedbandit/random.h"
#include "fedbandit/shuffle_vecsum.h"
#include "fedbandit/shuffler.h"
#include "fedbandit/tree_mechanism.h"

namespace fedbandit {
namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;

  void Check(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

// 30-digit reference for 24 (ln 20 + 1).
constexpr double kLdpGolden = 95.8975745652957838;

Verdict Ac1TreeOracle() {
  Verdict v;
  constexpr int kCapacity = 1024;
  constexpr int kAgents = 3;
  Rng rng = MakeStream(101, StreamPurpose::kInstance);
  std::uniform_int_distribution<int> item_dist(-1000, 1000);
  for (int width : {1, 6}) {
    const PayloadShape shape = PayloadShape::Vector(width);
    std::vector<PSumTree> trees(kAgents, PSumTree(kCapacity, shape));
    TreeAnalyzer analyzer(kCapacity, kAgents, shape);
    Eigen::VectorXd running = Eigen::VectorXd::Zero(width);
    for (int k = 1; k <= kCapacity; ++k) {
      std::vector<Eigen::VectorXd> outs;
      for (int i = 0; i < kAgents; ++i) {
        Eigen::VectorXd item(width);
        for (int j = 0; j < width; ++j) item(j) = item_dist(rng);
        running += item;
        auto out = trees[i].RandomizerStep(k, item, 0.0, rng);
        if (!out.ok()) {
          v.Check(false, std::string(out.status().message()));
          return v;
        }
        outs.push_back(*out);
      }
      auto prefix = analyzer.AnalyzerStep(k, outs);
      v.Check(prefix.ok() && *prefix == running,
              absl::StrFormat("width %d: prefix differs at k=%d", width, k));
    }
  }
  v.detail = v.pass ? "exact at every k <= 1024 for scalar and 6-vector streams"
                    : v.detail;
  return v;
}

Verdict Ac2Participation() {
  Verdict v;
  constexpr int64_t kCapacity = 256;
  int worst_item = 0;
  for (int64_t item = 1; item <= kCapacity; ++item) {
    const int count = ParticipationCount(kCapacity, item);
    worst_item = std::max(worst_item, count);
    v.Check(count <= 9, absl::StrFormat("item %d touches %d nodes", item, count));
  }
  for (int64_t k = 1; k <= kCapacity; ++k) {
    const int levels = static_cast<int>(PrefixLevels(k).size());
    const int bound = std::bit_width(static_cast<uint64_t>(k));
    v.Check(levels <= bound,
            absl::StrFormat("prefix %d uses %d > %d levels", k, levels, bound));
  }
  if (v.pass) {
    v.detail = absl::StrFormat("max nodes per item %d <= 9", worst_item);
  }
  return v;
}

Verdict Ac3LdpCalibration() {
  Verdict v;
  auto golden = CalibrateSiloLdp({1.0, 0.1, PrivacyMode::kSiloLdp}, 4, 1);
  v.Check(golden.ok() && std::abs(golden->sigma0_sq - kLdpGolden) < 1e-9,
          "golden mismatch");
  const std::vector<double> eps_grid = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
  const std::vector<double> delta_grid = {1e-4, 1e-3, 1e-2, 0.1};
  for (double delta : delta_grid) {
    double prev = INFINITY;
    for (double eps : eps_grid) {
      auto plan = CalibrateSiloLdp({eps, delta, PrivacyMode::kSiloLdp}, 4, 1);
      v.Check(plan.ok() && plan->sigma0_sq < prev,
              absl::StrFormat("not decreasing at eps=%g delta=%g", eps, delta));
      if (plan.ok()) prev = plan->sigma0_sq;
    }
  }
  if (v.pass) {
    v.detail = absl::StrFormat("sigma0^2 = %.15g, |err| = %.1e",
                               golden->sigma0_sq,
                               std::abs(golden->sigma0_sq - kLdpGolden));
  }
  return v;
}

Verdict Ac4Amplification() {
  Verdict v;
  int feasible = 0;
  int skipped = 0;
  double min_eps_slack = INFINITY;
  double min_delta_slack = INFINITY;
  for (int m : {10, 100}) {
    for (int64_t horizon : {200, 1000}) {
      for (double eps : {1e-3, 1e-2, 0.1}) {
        for (double delta : {1e-4, 0.1}) {
          const PrivacyBudget budget{eps, delta, PrivacyMode::kSdpAmplify};
          auto plan = CalibrateSdpAmplify(budget, m, horizon, 25);
          if (!plan.ok()) {
            v.Check(plan.status().code() == absl::StatusCode::kResourceExhausted,
                    std::string(plan.status().message()));
            ++skipped;
            continue;
          }
          ++feasible;
          auto round = AmplificationBound(plan->local_eps0, plan->local_delta0,
                                          horizon, m, plan->delta_slack);
          if (!round.ok()) {
            v.Check(false, std::string(round.status().message()));
            continue;
          }
          // Per stream: kappa rounds composed with delta' = delta / 4 must
          // stay within (eps / 2, delta / 2); two streams give (eps, delta).
          const ComposedBudget stream = AdvancedComposition(
              round->eps_r, round->delta_r, plan->kappa, delta / 4.0);
          const double eps_slack = 2.0 * stream.epsilon - eps;
          const double delta_slack = 2.0 * stream.delta - delta;
          min_eps_slack = std::min(min_eps_slack, -eps_slack / eps);
          min_delta_slack = std::min(min_delta_slack, -delta_slack / delta);
          v.Check(eps_slack <= 0.0 && delta_slack <= 0.0,
                  absl::StrFormat("budget exceeded at M=%d T=%d eps=%g "
                                  "delta=%g",
                                  m, horizon, eps, delta));
        }
      }
    }
  }
  v.Check(feasible > 0, "no feasible budget in the grid");
  if (v.pass) {
    v.detail = absl::StrFormat(
        "%d feasible cells within budget (min relative slack eps %.3g, delta "
        "%.3g); %d infeasible budgets skipped",
        feasible, min_eps_slack, min_delta_slack, skipped);
  }
  return v;
}

Verdict Ac5VecSum() {
  Verdict v;
  constexpr int kN = 100;
  constexpr int kDim = 5;
  constexpr int kTrials = 100000;
  constexpr double kEps0 = 1.0;
  constexpr double kDelta0 = 0.01;
  auto params = ChooseParams(kN, kDim, kEps0, kDelta0);
  if (!params.ok()) {
    v.Check(false, std::string(params.status().message()));
    return v;
  }
  Rng data = MakeStream(505, StreamPurpose::kInstance);
  std::normal_distribution<double> normal;
  std::vector<Eigen::VectorXd> xs(kN, Eigen::VectorXd(kDim));
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(kDim);
  for (Eigen::VectorXd& x : xs) {
    for (int j = 0; j < kDim; ++j) x(j) = normal(data);
    x.normalize();
    truth += x;
  }
  Rng noise = MakeStream(505, StreamPurpose::kPrivacyNoise);
  Rng shuffle = MakeStream(505, StreamPurpose::kShuffler);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kDim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(kDim);
  std::vector<ShuffleMessage> messages;
  for (int trial = 0; trial < kTrials; ++trial) {
    messages.clear();
    for (const Eigen::VectorXd& x : xs) {
      auto out = VecRandomize(x, 1, StreamTag::kBias, *params, noise);
      if (!out.ok()) {
        v.Check(false, std::string(out.status().message()));
        return v;
      }
      messages.insert(messages.end(), out->begin(), out->end());
    }
    messages = Shuffler(std::move(messages), PrivacyMode::kSdpVecSum, shuffle);
    auto est = VecAnalyze(messages, kN, kDim, *params);
    if (!est.ok()) {
      v.Check(false, std::string(est.status().message()));
      return v;
    }
    const Eigen::VectorXd centred = *est - truth;
    sum += centred;
    sum_sq += centred.cwiseProduct(centred);
  }
  const Eigen::VectorXd bias = sum / kTrials;
  const Eigen::VectorXd var =
      (sum_sq / kTrials - bias.cwiseProduct(bias)) * kTrials / (kTrials - 1.0);
  const double envelope =
      10.0 * std::pow(std::log(kDim * kDim / kDelta0), 2) / (kEps0 * kEps0);
  double worst_z = 0.0;
  for (int j = 0; j < kDim; ++j) {
    const double se = std::sqrt(var(j) / kTrials);
    worst_z = std::max(worst_z, std::abs(bias(j)) / se);
    v.Check(std::abs(bias(j)) <= 3.0 * se,
            absl::StrFormat("coordinate %d biased: %g (se %g)", j, bias(j), se));
  }
  for (int j = 0; j < kDim; ++j) {
    v.Check(var(j) <= envelope,
            absl::StrFormat("unbiased (max |z| = %.2f) but variance %.4g > "
                            "envelope %.4g (g = %d, b = %d)",
                            worst_z, var.maxCoeff(), envelope, params->g,
                            params->b));
  }
  if (v.pass) {
    v.detail = absl::StrFormat("max |z| = %.2f, max variance %.4g <= %.4g",
                               worst_z, var.maxCoeff(), envelope);
  }
  return v;
}

std::vector<int> ReferenceLinUcb(const BanditInstance& instance,
                                 int64_t horizon, double alpha, uint64_t seed) {
  const int d = instance.dim();
  Rng contexts = MakeStream(seed, StreamPurpose::kContexts, {0});
  Rng rewards = MakeStream(seed, StreamPurpose::kRewards, {0});
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  std::vector<int> actions;
  for (int64_t t = 1; t <= horizon; ++t) {
    const Eigen::MatrixXd arms = instance.DrawArms(t, 0, contexts);
    const Eigen::MatrixXd v_inv = v.inverse();
    const Eigen::VectorXd theta = v_inv * b;
    const double beta =
        std::sqrt(2.0 * std::log(2.0 / alpha) +
                  d * std::log(1.0 + static_cast<double>(t) / d)) +
        1.0;
    int best = 0;
    double best_ucb = -INFINITY;
    for (int a = 0; a < arms.cols(); ++a) {
      const Eigen::VectorXd phi = arms.col(a);
      const double ucb =
          phi.dot(theta) + beta * std::sqrt(phi.dot(v_inv * phi));
      if (ucb > best_ucb) {
        best_ucb = ucb;
        best = a;
      }
    }
    const Eigen::VectorXd x = arms.col(best);
    bool clipped = false;
    const double y = instance.DrawReward(x, rewards, &clipped);
    v += x * x.transpose();
    b += y * x;
    actions.push_back(best);
  }
  return actions;
}

Verdict Ac6DegenerateFederation() {
  Verdict v;
  Rng rng = MakeStream(606, StreamPurpose::kInstance);
  auto instance = MakeSynthetic({5, 100, 0.5}, 1, rng);
  if (!instance.ok()) {
    v.Check(false, std::string(instance.status().message()));
    return v;
  }
  SimConfig config;
  config.num_silos = 1;
  config.horizon = 500;
  config.batch_size = 1;
  config.budget.mode = PrivacyMode::kNonPrivate;
  config.seed = 6;
  auto run = RunEpisode(config, **instance);
  if (!run.ok()) {
    v.Check(false, std::string(run.status().message()));
    return v;
  }
  const std::vector<int> reference =
      ReferenceLinUcb(**instance, 500, config.alpha, config.seed);
  for (size_t t = 0; t < reference.size(); ++t) {
    v.Check(run->actions[t] == reference[t],
            absl::StrFormat("first divergence at t=%d", t + 1));
  }
  if (v.pass) v.detail = "500/500 actions identical";
  return v;
}

// One shared run of the synthetic grid used by AC7, AC8 and AC9.
struct GridRun {
  absl::StatusOr<ExperimentReport> report;
  double seconds = 0.0;
  std::map<std::string, const CellOutcome*> by_name;
};

GridRun RunSyntheticGrid() {
  GridRun run;
  auto spec = ValidateConfig(R"(
[simulation]
M = 10
T = 2000
B = 25
alpha = 0.01

[instance]
source = synthetic
d = 5
arms = 100
instance_seed = 7

[grid]
modes = NonPrivate, SiloLDP, SDPAmplify, SDPVecSum
epsilons = 0.2, 1, 5
deltas = 0.1
)");
  if (!spec.ok()) {
    run.report = spec.status();
    return run;
  }
  const Clock::time_point start = Clock::now();
  run.report = RunExperiment(
      *spec, std::max(1u, std::thread::hardware_concurrency()));
  run.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (run.report.ok()) {
    for (const CellOutcome& cell : run.report->cells) {
      run.by_name[cell.cell.name] = &cell;
    }
  }
  return run;
}

double FinalMean(const CellOutcome& cell) { return cell.mean.back(); }

Verdict Ac7RegretTrend(const GridRun& grid) {
  Verdict v;
  if (!grid.report.ok()) {
    v.Check(false, std::string(grid.report.status().message()));
    return v;
  }
  const CellOutcome* non_private = grid.by_name.at("NonPrivate");
  std::string summary =
      absl::StrFormat("NonPrivate %.4f", FinalMean(*non_private));
  for (PrivacyMode mode : {PrivacyMode::kSiloLdp, PrivacyMode::kSdpAmplify,
                           PrivacyMode::kSdpVecSum}) {
    const std::string name = PrivacyModeName(mode);
    double prev = INFINITY;
    std::string row;
    for (double eps : {0.2, 1.0, 5.0}) {
      const CellOutcome* cell =
          grid.by_name.at(absl::StrFormat("%s_eps%g_delta%g", name, eps, 0.1));
      if (cell->status == CellStatus::kSkipped) {
        absl::StrAppend(&row, " skipped");
        continue;
      }
      v.Check(cell->status == CellStatus::kCompleted,
              absl::StrCat(cell->cell.name, " failed: ", cell->reason));
      if (cell->status != CellStatus::kCompleted) continue;
      const double mean = FinalMean(*cell);
      absl::StrAppendFormat(&row, " %.4f", mean);
      v.Check(mean <= prev, absl::StrFormat("%s not monotone in eps", name));
      v.Check(FinalMean(*non_private) <= mean,
              absl::StrFormat("NonPrivate above %s", cell->cell.name));
      prev = mean;
    }
    absl::StrAppend(&summary, "; ", name, row);
  }
  v.detail = v.pass ? summary : absl::StrCat(v.detail, " [", summary, "]");
  return v;
}

Verdict Ac8SdpBeatsLdp(const GridRun& grid) {
  Verdict v;
  if (!grid.report.ok()) {
    v.Check(false, std::string(grid.report.status().message()));
    return v;
  }
  const CellOutcome* vecsum = grid.by_name.at("SDPVecSum_eps0.2_delta0.1");
  const CellOutcome* ldp = grid.by_name.at("SiloLDP_eps0.2_delta0.1");
  v.Check(vecsum->status == CellStatus::kCompleted &&
              ldp->status == CellStatus::kCompleted,
          "cell did not complete");
  if (!v.pass) return v;
  const double a = FinalMean(*vecsum);
  const double b = FinalMean(*ldp);
  v.Check(a <= b, "SDPVecSum above SiloLDP");
  v.detail = absl::StrFormat("%sSDPVecSum %.4f vs SiloLDP %.4f (sigma_total^2 "
                             "%.4g vs %.4g)",
                             v.pass ? "" : "SDPVecSum above SiloLDP: ", a, b,
                             vecsum->plan.sigma_total_sq,
                             ldp->plan.sigma_total_sq);
  return v;
}

Verdict Ac9Sublinear(const GridRun& grid) {
  Verdict v;
  if (!grid.report.ok()) {
    v.Check(false, std::string(grid.report.status().message()));
    return v;
  }
  const CellOutcome* cell = grid.by_name.at("NonPrivate");
  const double at_200 = cell->mean[199];
  const double at_2000 = cell->mean[1999];
  v.Check(at_2000 < 0.5 * at_200, "not halved");
  v.detail = absl::StrFormat("Reg(200)/200 = %.4f, Reg(2000)/2000 = %.4f "
                             "(ratio %.3f)",
                             at_200, at_2000, at_2000 / at_200);
  return v;
}

Verdict Ac10ShufflerUniformity() {
  Verdict v;
  constexpr int kTrials = 60000;
  // 0.001 upper quantile of chi-square with 5 degrees of freedom.
  constexpr double kCritical = 20.5150056;
  Rng rng = MakeStream(1010, StreamPurpose::kShuffler);
  std::map<std::vector<int>, int> freq;
  for (int trial = 0; trial < kTrials; ++trial) {
    ++freq[Shuffler(std::vector<int>{0, 1, 2}, PrivacyMode::kSdpAmplify, rng)];
  }
  v.Check(freq.size() == 6, "not all permutations observed");
  const double expected = kTrials / 6.0;
  double chi_sq = 0.0;
  for (const auto& [perm, count] : freq) {
    chi_sq += (count - expected) * (count - expected) / expected;
  }
  v.Check(chi_sq < kCritical, "chi-square too large");
  v.detail = absl::StrFormat("chi^2 = %.3f < %.3f", chi_sq, kCritical);
  return v;
}

Verdict Ac11ConfigValidation() {
  Verdict v;
  std::vector<std::string> errors;
  auto divisible = ValidateConfig("[simulation]\nT = 1000\nB = 30\n", &errors);
  v.Check(!divisible.ok() && errors.size() == 1 &&
              errors[0].find("T not divisible by B") != std::string::npos,
          "T=1000, B=30 not rejected as specified");

  const double bound = VecSumEpsilonBound(7, 0.1);
  errors.clear();
  auto vecsum = ValidateConfig(
      absl::StrFormat("[simulation]\nT = 2000\nB = 25\n[grid]\nmodes = "
                      "SDPVecSum\nepsilons = %g\ndeltas = 0.1\n",
                      bound * 1.5),
      &errors);
  v.Check(!vecsum.ok() && errors.size() == 1 &&
              errors[0].find("60 sqrt(2 kappa ln(2/delta))") !=
                  std::string::npos,
          "SDPVecSum epsilon bound not enforced");

  auto seeds = ValidateConfig("[experiment]\nseeds =\n");
  v.Check(seeds.ok() && seeds->seeds.size() == 25,
          "empty seed list not defaulted to 25");
  if (v.pass) v.detail = "all three examples behave as specified";
  return v;
}

struct Criterion {
  std::string id;
  double budget_seconds;
  std::function<Verdict()> run;
};

}  // namespace
}  // namespace fedbandit

int main() {
  using namespace fedbandit;
  GridRun grid;
  bool grid_done = false;
  auto with_grid = [&](std::function<Verdict(const GridRun&)> check) {
    return [&, check] {
      if (!grid_done) {
        grid = RunSyntheticGrid();
        grid_done = true;
      }
      return check(grid);
    };
  };
  const std::vector<Criterion> criteria = {
      {"AC1", 1.0, Ac1TreeOracle},
      {"AC2", 1.0, Ac2Participation},
      {"AC3", 1.0, Ac3LdpCalibration},
      {"AC4", 5.0, Ac4Amplification},
      {"AC5", 60.0, Ac5VecSum},
      {"AC6", 5.0, Ac6DegenerateFederation},
      // AC7 pays for the shared grid run; AC8 and AC9 reuse it.
      {"AC7", 300.0, with_grid(Ac7RegretTrend)},
      {"AC8", 300.0, with_grid(Ac8SdpBeatsLdp)},
      {"AC9", 120.0, with_grid(Ac9Sublinear)},
      {"AC10", 5.0, Ac10ShufflerUniformity},
      {"AC11", 1.0, Ac11ConfigValidation},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const Clock::time_point start = Clock::now();
    Verdict verdict = c.run();
    const double seconds =
        std::chrono::duration<double>(Clock::now() - start).count();
    if (seconds > c.budget_seconds) {
      verdict.pass = false;
      verdict.detail = absl::StrFormat("took %.1f s > %.0f s; %s", seconds,
                                       c.budget_seconds, verdict.detail);
    }
    if (!verdict.pass) ++failures;
    std::printf("%s %s (%.2f s) %s\n", c.id.c_str(),
                verdict.pass ? "PASS" : "FAIL", seconds,
                verdict.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
