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

#include "fedbandit/data_ingestion.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "fedbandit/status_macros.h"

namespace fedbandit {

namespace {

constexpr int kTitleFirst = 1;
constexpr int kTitleWidth = 57;
constexpr int kBodyFirst = 58;
constexpr int kBodyWidth = 78;
constexpr int kMaxGrade = 2;

Eigen::VectorXd RandomSpherePoint(int dim, double radius, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  do {
    for (int i = 0; i < dim; ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v * (radius / v.norm());
}

Eigen::VectorXd SyntheticVector(int dim, Rng& rng) {
  const double half = std::sqrt(0.5);
  Eigen::VectorXd x(dim);
  x.head(dim - 1) = RandomSpherePoint(dim - 1, half, rng);
  x(dim - 1) = half;
  return x;
}

class SyntheticInstance : public BanditInstance {
 public:
  SyntheticInstance(Eigen::VectorXd theta, const SyntheticSpec& spec)
      : BanditInstance(std::move(theta), spec.reward_noise_sd), spec_(spec) {}

  ArmSet DrawArms(int64_t /*t*/, int /*silo*/, Rng& rng) const override {
    ArmSet arms(spec_.dim, spec_.arms);
    for (int a = 0; a < spec_.arms; ++a) {
      arms.col(a) = SyntheticVector(spec_.dim, rng);
    }
    return arms;
  }

  std::string Describe() const override {
    return absl::StrFormat("synthetic(d=%d, arms=%d, noise_sd=%g)", spec_.dim,
                           spec_.arms, spec_.reward_noise_sd);
  }

 private:
  SyntheticSpec spec_;
};

class LtrInstance : public BanditInstance {
 public:
  LtrInstance(Eigen::VectorXd theta, double noise_sd,
              std::vector<std::vector<ArmSet>> silo_queries,
              std::string description)
      : BanditInstance(std::move(theta), noise_sd),
        silo_queries_(std::move(silo_queries)),
        description_(std::move(description)) {}

  ArmSet DrawArms(int64_t /*t*/, int silo, Rng& rng) const override {
    const std::vector<ArmSet>& queries = silo_queries_[silo];
    std::uniform_int_distribution<size_t> pick(0, queries.size() - 1);
    return queries[pick(rng)];
  }

  std::string Describe() const override { return description_; }

 private:
  std::vector<std::vector<ArmSet>> silo_queries_;
  std::string description_;
};

absl::Status LineError(int line_no, absl::string_view what) {
  return absl::InvalidArgumentError(
      absl::StrFormat("Line %d: %s", line_no, what));
}

std::vector<size_t> QueryOrderById(const LtrDataset& dataset) {
  std::vector<size_t> order(dataset.queries.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return dataset.queries[a].qid < dataset.queries[b].qid;
  });
  return order;
}

}  // namespace

BanditInstance::BanditInstance(Eigen::VectorXd theta_star,
                               double reward_noise_sd)
    : theta_star_(std::move(theta_star)), reward_noise_sd_(reward_noise_sd) {}

double BanditInstance::DrawReward(const FeatureVector& x, Rng& rng,
                                  bool* clipped) const {
  double y = x.dot(theta_star_);
  if (reward_noise_sd_ > 0.0) {
    std::normal_distribution<double> noise(0.0, reward_noise_sd_);
    y += noise(rng);
  }
  const double bounded = std::clamp(y, 0.0, 1.0);
  if (clipped != nullptr) *clipped = bounded != y;
  return bounded;
}

absl::StatusOr<std::unique_ptr<BanditInstance>> MakeSynthetic(
    const SyntheticSpec& spec, int num_silos, Rng& rng) {
  if (spec.dim < 2) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Synthetic instance needs d >= 2, got %d", spec.dim));
  }
  if (spec.arms < 1 || num_silos < 1 || !(spec.reward_noise_sd >= 0.0)) {
    return absl::InvalidArgumentError(
        "Synthetic instance needs arms >= 1, M >= 1 and noise sd >= 0");
  }
  return std::make_unique<SyntheticInstance>(SyntheticVector(spec.dim, rng),
                                             spec);
}

int SliceFirstFeature(FeatureSlice slice) {
  return slice == FeatureSlice::kTitle ? kTitleFirst : kBodyFirst;
}

int SliceWidth(FeatureSlice slice) {
  return slice == FeatureSlice::kTitle ? kTitleWidth : kBodyWidth;
}

absl::StatusOr<FeatureSlice> ParseFeatureSlice(absl::string_view name) {
  if (name == "title") return FeatureSlice::kTitle;
  if (name == "body") return FeatureSlice::kBody;
  return absl::InvalidArgumentError(absl::StrFormat(
      "Unknown feature slice '%s' (expected title or body)", name));
}

std::string FeatureSliceName(FeatureSlice slice) {
  return slice == FeatureSlice::kTitle ? "title" : "body";
}

int64_t LtrDataset::num_documents() const {
  int64_t n = 0;
  for (const LtrQuery& q : queries) n += q.documents.size();
  return n;
}

absl::StatusOr<LtrDataset> ParseLtr(absl::string_view path,
                                    FeatureSlice slice) {
  std::ifstream in{std::string(path)};
  if (!in) {
    return absl::NotFoundError(absl::StrFormat("Cannot open '%s'", path));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseLtrText(buffer.str(), slice);
}

absl::StatusOr<LtrDataset> ParseLtrText(absl::string_view text,
                                        FeatureSlice slice) {
  LtrDataset dataset;
  dataset.slice = slice;
  const int first = SliceFirstFeature(slice);
  const int width = SliceWidth(slice);
  std::map<int64_t, size_t> query_index;

  int line_no = 0;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != absl::string_view::npos) line = line.substr(0, hash);
    std::vector<absl::string_view> tokens =
        absl::StrSplit(line, absl::ByAnyChar(" \t\r"), absl::SkipEmpty());
    if (tokens.empty()) continue;
    if (tokens.size() < 2) return LineError(line_no, "missing qid field");

    int grade = 0;
    if (!absl::SimpleAtoi(tokens[0], &grade)) {
      return LineError(line_no,
                       absl::StrCat("malformed grade '", tokens[0], "'"));
    }
    if (grade < 0) {
      return LineError(line_no, absl::StrCat("negative grade ", grade));
    }
    if (grade > kMaxGrade) {
      dataset.warnings.push_back(absl::StrFormat(
          "Line %d: grade %d clamped to %d", line_no, grade, kMaxGrade));
      ++dataset.clamped_grades;
      grade = kMaxGrade;
    }

    int64_t qid = 0;
    if (!absl::ConsumePrefix(&tokens[1], "qid:") ||
        !absl::SimpleAtoi(tokens[1], &qid)) {
      return LineError(line_no, "malformed qid field");
    }

    LtrDocument doc;
    doc.grade = grade;
    doc.features = Eigen::VectorXd::Zero(width);
    for (size_t i = 2; i < tokens.size(); ++i) {
      const size_t colon = tokens[i].find(':');
      int index = 0;
      double value = 0.0;
      if (colon == absl::string_view::npos ||
          !absl::SimpleAtoi(tokens[i].substr(0, colon), &index) || index < 1) {
        return LineError(line_no, absl::StrCat("malformed feature index in '",
                                               tokens[i], "'"));
      }
      if (!absl::SimpleAtod(tokens[i].substr(colon + 1), &value) ||
          !std::isfinite(value)) {
        return LineError(line_no, absl::StrCat("malformed feature value in '",
                                               tokens[i], "'"));
      }
      if (index >= first && index < first + width) {
        doc.features(index - first) = value;
      }
    }

    auto [it, inserted] = query_index.emplace(qid, dataset.queries.size());
    if (inserted) dataset.queries.push_back(LtrQuery{qid, {}});
    dataset.queries[it->second].documents.push_back(std::move(doc));
  }
  return dataset;
}

std::string SerializeLtr(const LtrDataset& dataset) {
  const int first = SliceFirstFeature(dataset.slice);
  std::string out;
  for (const LtrQuery& q : dataset.queries) {
    for (const LtrDocument& doc : q.documents) {
      absl::StrAppend(&out, doc.grade, " qid:", q.qid);
      for (Eigen::Index j = 0; j < doc.features.size(); ++j) {
        absl::StrAppendFormat(&out, " %d:%.17g", first + j, doc.features(j));
      }
      out.push_back('\n');
    }
  }
  return out;
}

FeatureNormalization NormalizeFeatures(LtrDataset& dataset) {
  const int width = SliceWidth(dataset.slice);
  FeatureNormalization norm;
  norm.min = Eigen::VectorXd::Constant(width,
                                       std::numeric_limits<double>::infinity());
  norm.max = -norm.min;
  for (const LtrQuery& q : dataset.queries) {
    for (const LtrDocument& doc : q.documents) {
      norm.min = norm.min.cwiseMin(doc.features);
      norm.max = norm.max.cwiseMax(doc.features);
    }
  }
  double max_norm = 0.0;
  for (LtrQuery& q : dataset.queries) {
    for (LtrDocument& doc : q.documents) {
      for (int j = 0; j < width; ++j) {
        const double span = norm.max(j) - norm.min(j);
        doc.features(j) =
            span > 0.0 ? (doc.features(j) - norm.min(j)) / span : 0.0;
      }
      max_norm = std::max(max_norm, doc.features.norm());
    }
  }
  if (max_norm > 0.0) {
    norm.norm_scale = max_norm;
    for (LtrQuery& q : dataset.queries) {
      for (LtrDocument& doc : q.documents) doc.features /= max_norm;
    }
  }
  return norm;
}

absl::StatusOr<Eigen::VectorXd> FitTheta(const LtrDataset& dataset,
                                         double ridge_lambda) {
  if (dataset.num_documents() == 0) {
    return absl::InvalidArgumentError("Cannot fit theta on an empty dataset");
  }
  if (!(ridge_lambda >= 0.0)) {
    return absl::InvalidArgumentError("Ridge lambda must be non-negative");
  }
  const int width = SliceWidth(dataset.slice);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(width, width);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(width);
  for (const LtrQuery& q : dataset.queries) {
    for (const LtrDocument& doc : q.documents) {
      gram.selfadjointView<Eigen::Lower>().rankUpdate(doc.features);
      rhs += doc.features * (doc.grade / 2.0);
    }
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += ridge_lambda;
  Eigen::VectorXd theta =
      gram.completeOrthogonalDecomposition().solve(rhs);
  if (!theta.allFinite()) {
    return absl::InternalError("Ridge solve produced non-finite values");
  }
  const double norm = theta.norm();
  if (norm > 1.0) theta /= norm;
  return theta;
}

std::vector<std::vector<int64_t>> PartitionQueries(const LtrDataset& dataset,
                                                   int num_silos) {
  std::vector<std::vector<int64_t>> parts(std::max(num_silos, 0));
  if (num_silos < 1) return parts;
  const std::vector<size_t> order = QueryOrderById(dataset);
  for (size_t r = 0; r < order.size(); ++r) {
    parts[r % num_silos].push_back(dataset.queries[order[r]].qid);
  }
  return parts;
}

absl::StatusOr<std::unique_ptr<BanditInstance>> MakeLtrInstance(
    const LtrDataset& dataset, const Eigen::VectorXd& theta, int num_silos,
    double reward_noise_sd) {
  if (num_silos < 1) {
    return absl::InvalidArgumentError("num_silos must be positive");
  }
  if (static_cast<int64_t>(dataset.queries.size()) < num_silos) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "Need at least M = %d queries, dataset has %d", num_silos,
        dataset.queries.size()));
  }
  const int width = SliceWidth(dataset.slice);
  if (theta.size() != width) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "theta has dimension %d, slice has %d", theta.size(), width));
  }
  std::vector<std::vector<ArmSet>> silo_queries(num_silos);
  const std::vector<size_t> order = QueryOrderById(dataset);
  for (size_t r = 0; r < order.size(); ++r) {
    const LtrQuery& q = dataset.queries[order[r]];
    if (q.documents.empty()) continue;
    ArmSet arms(width, static_cast<Eigen::Index>(q.documents.size()));
    for (size_t a = 0; a < q.documents.size(); ++a) {
      arms.col(a) = q.documents[a].features;
    }
    silo_queries[r % num_silos].push_back(std::move(arms));
  }
  return std::make_unique<LtrInstance>(
      theta, reward_noise_sd, std::move(silo_queries),
      absl::StrFormat("ltr(slice=%s, queries=%d, documents=%d, M=%d)",
                      FeatureSliceName(dataset.slice), dataset.queries.size(),
                      dataset.num_documents(), num_silos));
}

}  // namespace fedbandit
