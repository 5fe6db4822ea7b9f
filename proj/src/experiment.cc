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

#include "fedbandit/experiment.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "fedbandit/shuffle_vecsum.h"
#include "fedbandit/status_macros.h"
#include "fedbandit/tree_mechanism.h"
#include "json.hpp"

namespace fedbandit {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Collects parse and validation errors with their line numbers.
class ErrorList {
 public:
  void Add(std::string message) { errors_.push_back(std::move(message)); }
  void AddAt(int line, absl::string_view message) {
    errors_.push_back(absl::StrFormat("line %d: %s", line, message));
  }
  bool empty() const { return errors_.empty(); }
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

std::vector<std::string> SplitList(absl::string_view value) {
  std::vector<std::string> out;
  for (absl::string_view piece : absl::StrSplit(value, ',')) {
    piece = absl::StripAsciiWhitespace(piece);
    if (!piece.empty()) out.emplace_back(piece);
  }
  return out;
}

bool ParseBool(absl::string_view value, bool* out) {
  if (value == "true" || value == "1") {
    *out = true;
    return true;
  }
  if (value == "false" || value == "0") {
    *out = false;
    return true;
  }
  return false;
}

std::string FormatDouble(double v) { return absl::StrFormat("%.17g", v); }

std::string CellName(PrivacyMode mode, double eps, double delta) {
  if (mode == PrivacyMode::kNonPrivate) return "NonPrivate";
  return absl::StrFormat("%s_eps%g_delta%g", PrivacyModeName(mode), eps,
                         delta);
}

// Parsed config: section -> key -> (value, line).
struct RawEntry {
  std::string value;
  int line = 0;
};
using RawConfig = std::map<std::string, std::map<std::string, RawEntry>>;

const std::map<std::string, std::set<std::string>>& KnownKeys() {
  static const auto* keys = new std::map<std::string, std::set<std::string>>{
      {"simulation",
       {"M", "num_silos", "T", "horizon", "B", "batch_size", "alpha", "lazy",
        "tree_variant", "lambda", "force_zero_noise"}},
      {"instance",
       {"source", "d", "dim", "arms", "noise_sd", "instance_seed", "path",
        "slice", "ridge_lambda"}},
      {"grid", {"modes", "epsilons", "deltas"}},
      {"experiment", {"seeds", "output_dir"}},
  };
  return *keys;
}

RawConfig ParseRaw(absl::string_view text, ErrorList& errors) {
  RawConfig raw;
  std::string section;
  int line_no = 0;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != absl::string_view::npos) line = line.substr(0, hash);
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.AddAt(line_no, "unterminated section header");
        continue;
      }
      section = std::string(
          absl::StripAsciiWhitespace(line.substr(1, line.size() - 2)));
      if (!KnownKeys().contains(section)) {
        errors.AddAt(line_no, absl::StrCat("unknown section [", section, "]"));
      }
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      errors.AddAt(line_no, "expected 'key = value'");
      continue;
    }
    const std::string key(absl::StripAsciiWhitespace(line.substr(0, eq)));
    const std::string value(absl::StripAsciiWhitespace(line.substr(eq + 1)));
    if (section.empty()) {
      errors.AddAt(line_no, absl::StrCat("key '", key, "' outside a section"));
      continue;
    }
    auto known = KnownKeys().find(section);
    if (known == KnownKeys().end()) continue;
    if (!known->second.contains(key)) {
      errors.AddAt(line_no,
                   absl::StrCat("unknown key '", key, "' in [", section, "]"));
      continue;
    }
    if (raw[section].contains(key)) {
      errors.AddAt(line_no, absl::StrCat("duplicate key '", key, "'"));
      continue;
    }
    raw[section][key] = {value, line_no};
  }
  return raw;
}

// Typed access to the raw config; parse failures are reported once.
class Reader {
 public:
  Reader(const RawConfig& raw, ErrorList& errors)
      : raw_(raw), errors_(errors) {}

  const RawEntry* Find(const std::string& section,
                       std::initializer_list<const char*> keys) {
    auto sec = raw_.find(section);
    if (sec == raw_.end()) return nullptr;
    const RawEntry* found = nullptr;
    for (const char* key : keys) {
      auto it = sec->second.find(key);
      if (it == sec->second.end()) continue;
      if (found != nullptr) {
        errors_.AddAt(it->second.line,
                      absl::StrCat("'", key, "' repeats an aliased key"));
      }
      found = &it->second;
    }
    return found;
  }

  template <typename T>
  void Number(const std::string& section,
              std::initializer_list<const char*> keys, T* out) {
    const RawEntry* e = Find(section, keys);
    if (e == nullptr) return;
    bool ok;
    if constexpr (std::is_floating_point_v<T>) {
      ok = absl::SimpleAtod(e->value, out);
    } else {
      ok = absl::SimpleAtoi(e->value, out);
    }
    if (!ok) {
      errors_.AddAt(e->line, absl::StrCat("'", *keys.begin(),
                                          "' is not a number: ", e->value));
    }
  }

  void Bool(const std::string& section, const char* key, bool* out) {
    const RawEntry* e = Find(section, {key});
    if (e != nullptr && !ParseBool(e->value, out)) {
      errors_.AddAt(e->line,
                    absl::StrCat("'", key, "' must be true or false"));
    }
  }

  template <typename T>
  void NumberList(const std::string& section, const char* key,
                  std::vector<T>* out) {
    const RawEntry* e = Find(section, {key});
    if (e == nullptr) return;
    out->clear();
    for (const std::string& item : SplitList(e->value)) {
      T v{};
      bool ok;
      if constexpr (std::is_floating_point_v<T>) {
        ok = absl::SimpleAtod(item, &v);
      } else {
        ok = absl::SimpleAtoi(item, &v);
      }
      if (!ok) {
        errors_.AddAt(e->line, absl::StrCat("'", key, "' entry '", item,
                                            "' is not a number"));
        continue;
      }
      out->push_back(v);
    }
  }

 private:
  const RawConfig& raw_;
  ErrorList& errors_;
};

void CheckSemantics(const ExperimentSpec& spec, bool force_zero_noise,
                    ErrorList& errors) {
  const SimConfig& c = spec.base;
  if (c.num_silos < 1) errors.Add("M must be positive");
  if (c.horizon < 1) errors.Add("T must be positive");
  if (c.batch_size < 1) errors.Add("B must be positive");
  const bool divisible = c.horizon >= 1 && c.batch_size >= 1 &&
                         c.horizon % c.batch_size == 0;
  if (c.horizon >= 1 && c.batch_size >= 1 && !divisible) {
    errors.Add(absl::StrFormat("T not divisible by B (T = %d, B = %d)",
                               c.horizon, c.batch_size));
  }
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) {
    errors.Add(absl::StrFormat("alpha must lie in (0, 1], got %g", c.alpha));
  }
  if (c.lambda_override < 0.0) errors.Add("lambda must be non-negative");

  const InstanceSpec& inst = spec.instance;
  if (inst.source == InstanceSource::kSynthetic) {
    if (inst.synthetic.dim < 2) {
      errors.Add(absl::StrFormat("synthetic instance needs d >= 2, got %d",
                                 inst.synthetic.dim));
    }
    if (inst.synthetic.arms < 1) errors.Add("arms must be positive");
  } else if (inst.ltr_path.empty()) {
    errors.Add("ltr instance needs a path");
  }
  if (!(inst.synthetic.reward_noise_sd >= 0.0)) {
    errors.Add("noise_sd must be non-negative");
  }
  if (!(inst.ridge_lambda >= 0.0)) {
    errors.Add("ridge_lambda must be non-negative");
  }

  if (spec.modes.empty()) errors.Add("grid needs at least one mode");
  const bool any_private =
      std::any_of(spec.modes.begin(), spec.modes.end(),
                  [](PrivacyMode m) { return m != PrivacyMode::kNonPrivate; });
  if (any_private) {
    if (spec.epsilons.empty()) errors.Add("private modes need epsilons");
    if (spec.deltas.empty()) errors.Add("private modes need deltas");
  }
  if (force_zero_noise && any_private) {
    errors.Add(
        "force_zero_noise is a test hook and cannot be combined with a "
        "private mode");
  }
  for (double eps : spec.epsilons) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
      errors.Add(absl::StrFormat("epsilon must be positive, got %g", eps));
    }
  }
  for (double delta : spec.deltas) {
    if (!(delta > 0.0 && delta < 1.0)) {
      errors.Add(absl::StrFormat("delta must lie in (0, 1), got %g", delta));
    }
  }
  const bool vecsum =
      std::find(spec.modes.begin(), spec.modes.end(),
                PrivacyMode::kSdpVecSum) != spec.modes.end();
  if (vecsum && c.horizon >= 1 && c.batch_size >= 1 &&
      c.horizon >= c.batch_size) {
    const int kappa = TreeDepth(c.horizon / c.batch_size);
    for (double eps : spec.epsilons) {
      for (double delta : spec.deltas) {
        if (!(eps > 0.0) || !(delta > 0.0 && delta < 1.0)) continue;
        const double bound = VecSumEpsilonBound(kappa, delta);
        if (eps > bound) {
          errors.Add(absl::StrFormat(
              "SDPVecSum epsilon %g out of range: must be <= "
              "60 sqrt(2 kappa ln(2/delta)) = %g (kappa = %d, delta = %g)",
              eps, bound, kappa, delta));
        }
      }
    }
  }

  std::set<uint64_t> distinct(spec.seeds.begin(), spec.seeds.end());
  if (distinct.size() != spec.seeds.size()) errors.Add("seeds must be distinct");
  std::set<std::string> names;
  for (const GridCell& cell : spec.Cells()) {
    if (!names.insert(cell.name).second) {
      errors.Add(absl::StrCat("duplicate grid cell ", cell.name));
    }
  }
}

void WriteFile(const fs::path& path, const std::string& contents,
               absl::Status& status) {
  if (!status.ok()) return;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
  out.close();
  if (!out) {
    status = absl::InternalError(
        absl::StrCat("Failed to write ", path.string()));
  }
}

nlohmann::json PlanJson(const NoisePlan& plan) {
  return {{"mode", PrivacyModeName(plan.mode)},
          {"kappa", plan.kappa},
          {"sigma0_sq", plan.sigma0_sq},
          {"sigma_total_sq", plan.sigma_total_sq},
          {"per_round_eps", plan.per_round_eps},
          {"per_round_delta", plan.per_round_delta},
          {"local_eps0", plan.local_eps0},
          {"local_delta0", plan.local_delta0},
          {"amplified_eps", plan.amplified_eps},
          {"amplified_delta", plan.amplified_delta},
          {"delta_slack", plan.delta_slack}};
}

}  // namespace

std::vector<GridCell> ExperimentSpec::Cells() const {
  std::vector<GridCell> cells;
  for (PrivacyMode mode : modes) {
    if (mode == PrivacyMode::kNonPrivate) {
      cells.push_back({CellName(mode, 0, 0), PrivacyBudget{1.0, 0.1, mode}});
      continue;
    }
    for (double eps : epsilons) {
      for (double delta : deltas) {
        cells.push_back(
            {CellName(mode, eps, delta), PrivacyBudget{eps, delta, mode}});
      }
    }
  }
  return cells;
}

std::string ExperimentSpec::ToConfigText() const {
  std::string out;
  absl::StrAppend(&out, "[simulation]\n");
  absl::StrAppend(&out, "M = ", base.num_silos, "\n");
  absl::StrAppend(&out, "T = ", base.horizon, "\n");
  absl::StrAppend(&out, "B = ", base.batch_size, "\n");
  absl::StrAppend(&out, "alpha = ", FormatDouble(base.alpha), "\n");
  absl::StrAppend(&out, "lazy = ", base.lazy ? "true" : "false", "\n");
  absl::StrAppend(&out, "tree_variant = ",
                  base.tree_variant == TreeVariant::kPSum ? "psum"
                                                          : "prefix_alt",
                  "\n");
  absl::StrAppend(&out, "lambda = ", FormatDouble(base.lambda_override),
                  "\n\n");

  absl::StrAppend(&out, "[instance]\n");
  if (instance.source == InstanceSource::kSynthetic) {
    absl::StrAppend(&out, "source = synthetic\n");
    absl::StrAppend(&out, "d = ", instance.synthetic.dim, "\n");
    absl::StrAppend(&out, "arms = ", instance.synthetic.arms, "\n");
  } else {
    absl::StrAppend(&out, "source = ltr\n");
    absl::StrAppend(&out, "path = ", instance.ltr_path, "\n");
    absl::StrAppend(&out, "slice = ", FeatureSliceName(instance.slice), "\n");
    absl::StrAppend(&out, "ridge_lambda = ",
                    FormatDouble(instance.ridge_lambda), "\n");
  }
  absl::StrAppend(&out, "noise_sd = ",
                  FormatDouble(instance.synthetic.reward_noise_sd), "\n");
  absl::StrAppend(&out, "instance_seed = ", instance.instance_seed, "\n\n");

  absl::StrAppend(&out, "[grid]\n");
  std::vector<std::string> names;
  for (PrivacyMode m : modes) names.push_back(PrivacyModeName(m));
  absl::StrAppend(&out, "modes = ", absl::StrJoin(names, ", "), "\n");
  auto join_doubles = [](const std::vector<double>& v) {
    return absl::StrJoin(v, ", ", [](std::string* o, double x) {
      o->append(FormatDouble(x));
    });
  };
  absl::StrAppend(&out, "epsilons = ", join_doubles(epsilons), "\n");
  absl::StrAppend(&out, "deltas = ", join_doubles(deltas), "\n\n");

  absl::StrAppend(&out, "[experiment]\n");
  absl::StrAppend(&out, "seeds = ", absl::StrJoin(seeds, ", "), "\n");
  if (!output_dir.empty()) {
    absl::StrAppend(&out, "output_dir = ", output_dir, "\n");
  }
  return out;
}

absl::StatusOr<ExperimentSpec> ValidateConfig(
    absl::string_view text, std::vector<std::string>* errors_out) {
  ErrorList errors;
  const RawConfig raw = ParseRaw(text, errors);
  Reader reader(raw, errors);

  ExperimentSpec spec;
  spec.base.num_silos = 10;
  spec.base.horizon = 2000;
  spec.base.batch_size = 25;
  spec.base.alpha = 0.01;
  reader.Number("simulation", {"M", "num_silos"}, &spec.base.num_silos);
  reader.Number("simulation", {"T", "horizon"}, &spec.base.horizon);
  reader.Number("simulation", {"B", "batch_size"}, &spec.base.batch_size);
  reader.Number("simulation", {"alpha"}, &spec.base.alpha);
  reader.Number("simulation", {"lambda"}, &spec.base.lambda_override);
  reader.Bool("simulation", "lazy", &spec.base.lazy);
  bool force_zero_noise = false;
  reader.Bool("simulation", "force_zero_noise", &force_zero_noise);
  spec.base.force_zero_noise = force_zero_noise;
  if (const RawEntry* e = reader.Find("simulation", {"tree_variant"})) {
    if (e->value == "psum") {
      spec.base.tree_variant = TreeVariant::kPSum;
    } else if (e->value == "prefix_alt") {
      spec.base.tree_variant = TreeVariant::kPrefixAlt;
    } else {
      errors.AddAt(e->line, "tree_variant must be psum or prefix_alt");
    }
  }

  if (const RawEntry* e = reader.Find("instance", {"source"})) {
    if (e->value == "synthetic") {
      spec.instance.source = InstanceSource::kSynthetic;
    } else if (e->value == "ltr") {
      spec.instance.source = InstanceSource::kLtr;
    } else {
      errors.AddAt(e->line, "source must be synthetic or ltr");
    }
  }
  reader.Number("instance", {"d", "dim"}, &spec.instance.synthetic.dim);
  reader.Number("instance", {"arms"}, &spec.instance.synthetic.arms);
  reader.Number("instance", {"noise_sd"},
                &spec.instance.synthetic.reward_noise_sd);
  reader.Number("instance", {"instance_seed"}, &spec.instance.instance_seed);
  reader.Number("instance", {"ridge_lambda"}, &spec.instance.ridge_lambda);
  if (const RawEntry* e = reader.Find("instance", {"path"})) {
    spec.instance.ltr_path = e->value;
  }
  if (const RawEntry* e = reader.Find("instance", {"slice"})) {
    absl::StatusOr<FeatureSlice> slice = ParseFeatureSlice(e->value);
    if (slice.ok()) {
      spec.instance.slice = *slice;
    } else {
      errors.AddAt(e->line, slice.status().message());
    }
  }

  if (const RawEntry* e = reader.Find("grid", {"modes"})) {
    for (const std::string& name : SplitList(e->value)) {
      absl::StatusOr<PrivacyMode> mode = ParsePrivacyMode(name);
      if (mode.ok()) {
        spec.modes.push_back(*mode);
      } else {
        errors.AddAt(e->line, mode.status().message());
      }
    }
  } else {
    spec.modes.push_back(PrivacyMode::kNonPrivate);
  }
  reader.NumberList("grid", "epsilons", &spec.epsilons);
  reader.NumberList("grid", "deltas", &spec.deltas);
  reader.NumberList("experiment", "seeds", &spec.seeds);
  if (spec.seeds.empty()) {
    for (int s = 0; s < kDefaultSeedCount; ++s) spec.seeds.push_back(s);
  }
  if (const RawEntry* e = reader.Find("experiment", {"output_dir"})) {
    spec.output_dir = e->value;
  }

  CheckSemantics(spec, force_zero_noise, errors);
  if (!errors.empty()) {
    if (errors_out != nullptr) *errors_out = errors.errors();
    return absl::InvalidArgumentError(absl::StrJoin(errors.errors(), "\n"));
  }
  return spec;
}

std::string CellStatusName(CellStatus status) {
  switch (status) {
    case CellStatus::kCompleted:
      return "completed";
    case CellStatus::kSkipped:
      return "skipped";
    case CellStatus::kFailed:
      return "failed";
  }
  return "unknown";
}

bool ExperimentReport::AllCompleted() const {
  return std::none_of(cells.begin(), cells.end(), [](const CellOutcome& c) {
    return c.status == CellStatus::kFailed;
  });
}

absl::StatusOr<std::unique_ptr<BanditInstance>> BuildInstance(
    const ExperimentSpec& spec, std::string* normalization_note) {
  const InstanceSpec& inst = spec.instance;
  if (inst.source == InstanceSource::kSynthetic) {
    Rng rng = MakeStream(inst.instance_seed, StreamPurpose::kInstance);
    return MakeSynthetic(inst.synthetic, spec.base.num_silos, rng);
  }
  ASSIGN_OR_RETURN(LtrDataset dataset, ParseLtr(inst.ltr_path, inst.slice));
  const FeatureNormalization norm = NormalizeFeatures(dataset);
  if (normalization_note != nullptr) {
    *normalization_note = absl::StrFormat(
        "per-feature min-max to [0,1] over %d documents, then division by "
        "max norm %.17g; %d grades clamped",
        dataset.num_documents(), norm.norm_scale, dataset.clamped_grades);
  }
  ASSIGN_OR_RETURN(Eigen::VectorXd theta,
                   FitTheta(dataset, inst.ridge_lambda));
  return MakeLtrInstance(dataset, theta, spec.base.num_silos,
                         inst.synthetic.reward_noise_sd);
}

void AggregateRuns(const std::vector<RunResult>& runs,
                   std::vector<double>& mean,
                   std::vector<double>& standard_error) {
  mean.clear();
  standard_error.clear();
  if (runs.empty()) return;
  std::vector<std::vector<double>> averaged;
  averaged.reserve(runs.size());
  for (const RunResult& r : runs) averaged.push_back(r.regret.TimeAveraged());
  const size_t horizon = averaged[0].size();
  const double n = static_cast<double>(runs.size());
  mean.resize(horizon);
  standard_error.resize(horizon);
  for (size_t t = 0; t < horizon; ++t) {
    double sum = 0.0;
    for (const auto& a : averaged) sum += a[t];
    const double mu = sum / n;
    double ss = 0.0;
    for (const auto& a : averaged) ss += (a[t] - mu) * (a[t] - mu);
    mean[t] = mu;
    standard_error[t] = runs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
}

absl::StatusOr<ExperimentReport> RunExperiment(const ExperimentSpec& spec,
                                               int parallelism) {
  const Clock::time_point start = Clock::now();
  ExperimentReport report;
  ASSIGN_OR_RETURN(std::unique_ptr<BanditInstance> instance,
                   BuildInstance(spec, &report.normalization_note));
  report.instance_description = instance->Describe();

  const std::vector<GridCell> cells = spec.Cells();
  const size_t num_seeds = spec.seeds.size();
  report.cells.resize(cells.size());
  std::vector<std::pair<size_t, size_t>> tasks;
  for (size_t c = 0; c < cells.size(); ++c) {
    CellOutcome& out = report.cells[c];
    out.cell = cells[c];
    SimConfig config = spec.base;
    config.budget = cells[c].budget;
    absl::StatusOr<NoisePlan> plan = PlanNoise(config, instance->dim());
    if (!plan.ok()) {
      out.status = absl::IsResourceExhausted(plan.status())
                       ? CellStatus::kSkipped
                       : CellStatus::kFailed;
      out.reason = std::string(plan.status().message());
      continue;
    }
    out.plan = *plan;
    for (size_t s = 0; s < num_seeds; ++s) tasks.emplace_back(c, s);
  }

  std::vector<std::vector<std::optional<absl::StatusOr<RunResult>>>> results(
      cells.size(),
      std::vector<std::optional<absl::StatusOr<RunResult>>>(num_seeds));
  std::vector<std::vector<double>> durations(
      cells.size(), std::vector<double>(num_seeds, 0.0));
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < tasks.size();
         i = next.fetch_add(1)) {
      const auto [c, s] = tasks[i];
      SimConfig config = spec.base;
      config.budget = cells[c].budget;
      config.seed = spec.seeds[s];
      const Clock::time_point t0 = Clock::now();
      results[c][s] = RunEpisode(config, *instance);
      durations[c][s] = SecondsSince(t0);
    }
  };
  const int threads = std::max(
      1, std::min<int>(parallelism, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();

  for (size_t c = 0; c < cells.size(); ++c) {
    CellOutcome& out = report.cells[c];
    if (out.status != CellStatus::kCompleted) continue;
    for (size_t s = 0; s < num_seeds; ++s) {
      out.wall_seconds += durations[c][s];
      absl::StatusOr<RunResult>& r = *results[c][s];
      if (!r.ok()) {
        out.status = CellStatus::kFailed;
        out.reason = absl::StrFormat("seed %d: %s", spec.seeds[s],
                                     r.status().message());
        break;
      }
      out.runs.push_back(*std::move(r));
    }
    if (out.status != CellStatus::kCompleted) {
      out.runs.clear();
      continue;
    }
    out.lambda = out.runs.front().lambda;
    AggregateRuns(out.runs, out.mean, out.standard_error);
  }
  report.wall_seconds = SecondsSince(start);
  return report;
}

absl::Status WriteOutputs(const ExperimentSpec& spec,
                          const ExperimentReport& report,
                          const std::string& output_dir) {
  std::error_code ec;
  const fs::path root(output_dir);
  fs::create_directories(root, ec);
  if (ec) {
    return absl::InternalError(
        absl::StrCat("Cannot create ", output_dir, ": ", ec.message()));
  }
  absl::Status status;
  nlohmann::json cells_json = nlohmann::json::array();
  for (const CellOutcome& cell : report.cells) {
    nlohmann::json cj = {
        {"name", cell.cell.name},
        {"mode", PrivacyModeName(cell.cell.budget.mode)},
        {"epsilon", cell.cell.budget.epsilon},
        {"delta", cell.cell.budget.delta},
        {"status", CellStatusName(cell.status)},
        {"reason", cell.reason},
        {"wall_seconds", cell.wall_seconds},
    };
    if (cell.status == CellStatus::kCompleted) {
      cj["noise_plan"] = PlanJson(cell.plan);
      cj["lambda"] = cell.lambda;
      int64_t jitter = 0, clipped = 0, messages = 0, syncs = 0;
      for (const RunResult& r : cell.runs) {
        jitter += r.jitter_repairs;
        clipped += r.clipped_rewards;
        messages += r.messages;
        syncs = r.sync_count;
      }
      cj["sync_count"] = syncs;
      cj["jitter_repairs_total"] = jitter;
      cj["clipped_rewards_total"] = clipped;
      cj["messages_total"] = messages;
      cj["final_mean_time_averaged_regret"] = cell.mean.back();

      std::string csv = "t,mean_time_averaged_regret,standard_error\n";
      for (size_t t = 0; t < cell.mean.size(); ++t) {
        absl::StrAppendFormat(&csv, "%d,%.17g,%.17g\n", t + 1, cell.mean[t],
                              cell.standard_error[t]);
      }
      WriteFile(root / (cell.cell.name + ".csv"), csv, status);

      const fs::path seed_dir = root / cell.cell.name;
      fs::create_directories(seed_dir, ec);
      if (ec) {
        return absl::InternalError(absl::StrCat(
            "Cannot create ", seed_dir.string(), ": ", ec.message()));
      }
      for (size_t s = 0; s < cell.runs.size(); ++s) {
        const RegretTrace& trace = cell.runs[s].regret;
        const std::vector<double> avg = trace.TimeAveraged();
        std::string seed_csv =
            "t,group_regret,cumulative_regret,time_averaged_regret\n";
        for (int64_t t = 0; t < trace.size(); ++t) {
          absl::StrAppendFormat(&seed_csv, "%d,%.17g,%.17g,%.17g\n", t + 1,
                                trace.per_round()[t], trace.cumulative()[t],
                                avg[t]);
        }
        WriteFile(seed_dir / absl::StrCat("seed_", spec.seeds[s], ".csv"),
                  seed_csv, status);
      }
    }
    cells_json.push_back(std::move(cj));
  }
  RETURN_IF_ERROR(status);

  nlohmann::json manifest = {
      {"software", "fedbandit"},
      {"version", kFedbanditVersion},
      {"config", spec.ToConfigText()},
      {"instance", report.instance_description},
      {"normalization", report.normalization_note},
      {"seeds", spec.seeds},
      {"cells", cells_json},
      {"all_completed", report.AllCompleted()},
      {"wall_seconds", report.wall_seconds},
  };
  const fs::path tmp = root / "manifest.json.tmp";
  WriteFile(tmp, manifest.dump(2) + "\n", status);
  RETURN_IF_ERROR(status);
  fs::rename(tmp, root / "manifest.json", ec);
  if (ec) {
    return absl::InternalError(
        absl::StrCat("Cannot publish manifest: ", ec.message()));
  }
  return absl::OkStatus();
}

absl::StatusOr<ExperimentSpec> SpecFromManifest(absl::string_view path) {
  std::ifstream in{std::string(path)};
  if (!in) {
    return absl::NotFoundError(absl::StrFormat("Cannot open '%s'", path));
  }
  nlohmann::json manifest =
      nlohmann::json::parse(in, /*cb=*/nullptr, /*allow_exceptions=*/false);
  if (manifest.is_discarded() || !manifest.contains("config") ||
      !manifest["config"].is_string()) {
    return absl::InvalidArgumentError(
        absl::StrFormat("'%s' is not a run manifest", path));
  }
  return ValidateConfig(manifest["config"].get<std::string>());
}

}  // namespace fedbandit
