// Copyright 2026 The Early Cutting Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "ec/dynamics.hpp"
#include "ec/earlycut.hpp"
#include "ec/error.hpp"

namespace ec {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return std::sqrt(s);
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Matrix class_centroids(const Matrix& features, std::span<const Label> labels,
                       std::uint32_t num_classes) {
  require(labels.size() == features.rows, ErrorKind::kInvalidArgument,
          "label count does not match feature rows");
  Matrix c(num_classes, features.cols);
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < features.rows; ++i) {
    require(labels[i] < num_classes, ErrorKind::kInvalidArgument, "label out of range");
    ++counts[labels[i]];
    auto row = c.row(labels[i]);
    const auto f = features.row(i);
    for (std::size_t j = 0; j < f.size(); ++j) row[j] += f[j];
  }
  for (std::uint32_t k = 0; k < num_classes; ++k) {
    if (counts[k] == 0) {
      fail(ErrorKind::kDegenerateClass,
           "class " + std::to_string(k) + " has no samples; centroid undefined");
    }
    for (double& v : c.row(k)) v /= static_cast<double>(counts[k]);
  }
  return c;
}

RatioSummary summarize_ratios(std::span<const double> ratios) {
  RatioSummary s;
  s.count = ratios.size();
  std::vector<double> finite;
  std::size_t below = 0;
  for (double r : ratios) {
    if (std::isfinite(r)) finite.push_back(r);
    if (r < 1.0) ++below;
  }
  s.finite = finite.size();
  s.median = median_of(std::move(finite));
  s.frac_below_one = s.count == 0 ? 0.0 : static_cast<double>(below) / static_cast<double>(s.count);
  return s;
}

DistanceRatioReport distance_ratios(const Matrix& features,
                                    std::span<const Label> true_labels,
                                    std::span<const Label> noisy_labels,
                                    const Matrix& true_centroids,
                                    const Matrix& noisy_centroids,
                                    const std::vector<bool>& mee_flags) {
  const std::size_t n = features.rows;
  require(true_labels.size() == n && noisy_labels.size() == n && mee_flags.size() == n,
          ErrorKind::kInvalidArgument, "distance_ratios: length mismatch");
  DistanceRatioReport rep;
  rep.is_mee = mee_flags;
  std::vector<double> mee_r;
  std::vector<double> other_r;
  for (std::size_t i = 0; i < n; ++i) {
    if (true_labels[i] == noisy_labels[i]) {
      fail(ErrorKind::kInvalidInput,
           "distance_ratios: row " + std::to_string(i) + " is not mislabeled");
    }
    const double dt = euclidean(features.row(i), true_centroids.row(true_labels[i]));
    const double dm = euclidean(features.row(i), noisy_centroids.row(noisy_labels[i]));
    const double r = dt == 0.0 ? kInf : dm / dt;
    rep.d_true.push_back(dt);
    rep.d_mislabeled.push_back(dm);
    rep.ratio.push_back(r);
    (mee_flags[i] ? mee_r : other_r).push_back(r);
  }
  rep.mee = summarize_ratios(mee_r);
  rep.other = summarize_ratios(other_r);
  return rep;
}

FeatureSpaceReport feature_space_report(const Model& model, const Dataset& ds,
                                        std::span<const std::size_t> ids,
                                        std::span<const std::size_t> mees) {
  FeatureSpaceReport out;
  out.ids.assign(ids.begin(), ids.end());
  out.features = penultimate_features(model, rows_as_double(ds, ids));
  const auto y_true = gather(ds.true_labels, ids);
  const auto y_noisy = gather(ds.noisy_labels, ids);
  const Matrix c_true = class_centroids(out.features, y_true, ds.num_classes);
  const Matrix c_noisy = class_centroids(out.features, y_noisy, ds.num_classes);

  const std::unordered_set<std::size_t> mee_set(mees.begin(), mees.end());
  std::vector<std::size_t> rows;
  std::vector<bool> flags;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (!ds.is_mislabeled(ids[r])) continue;
    rows.push_back(r);
    out.mislabeled.push_back(ids[r]);
    flags.push_back(mee_set.contains(ids[r]));
  }
  Matrix f(rows.size(), out.features.cols);
  std::vector<Label> t(rows.size()), nz(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(out.features.row(rows[i]).begin(), f.cols, f.row(i).begin());
    t[i] = y_true[rows[i]];
    nz[i] = y_noisy[rows[i]];
  }
  out.ratios = distance_ratios(f, t, nz, c_true, c_noisy, flags);
  return out;
}

std::string SelectionQuality::removal_summary() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu (%.2f%%)", removed,
                std::isfinite(purity) ? 100.0 * purity : 0.0);
  return buf;
}

SelectionQuality selection_report(std::span<const std::size_t> selected,
                                  std::span<const std::size_t> mees,
                                  const Dataset& ds) {
  SelectionQuality q;
  q.selected = selected.size();
  for (std::size_t i : selected) q.selected_mislabeled += ds.is_mislabeled(i) ? 1 : 0;
  q.noise_rate = q.selected == 0 ? 0.0
                                 : static_cast<double>(q.selected_mislabeled) /
                                       static_cast<double>(q.selected);
  q.removed = mees.size();
  for (std::size_t i : mees) q.removed_mislabeled += ds.is_mislabeled(i) ? 1 : 0;
  q.purity = q.removed == 0 ? kNaN
                            : static_cast<double>(q.removed_mislabeled) /
                                  static_cast<double>(q.removed);
  return q;
}

std::vector<std::size_t> partition_sizes(std::size_t m, std::size_t g) {
  std::vector<std::size_t> sizes(g, m / g);
  for (std::size_t i = 0; i < m % g; ++i) ++sizes[i];
  return sizes;
}

MislabeledGroups group_mislabeled_by_learning_time(const Dataset& ds,
                                                   const SplitIndices& split,
                                                   const Arch& arch,
                                                   const TrainConfig& cfg,
                                                   std::size_t groups,
                                                   std::uint32_t window) {
  require(groups >= 1, ErrorKind::kInvalidConfig, "need at least one group");
  MislabeledGroups out;
  IndexList mislabeled_pos;
  for (std::size_t p = 0; p < split.train.size(); ++p) {
    if (ds.is_mislabeled(split.train[p])) {
      mislabeled_pos.push_back(p);
    } else {
      out.clean.push_back(split.train[p]);
    }
  }
  require(mislabeled_pos.size() >= groups, ErrorKind::kInvalidConfig,
          "only " + std::to_string(mislabeled_pos.size()) +
              " mislabeled training samples for " + std::to_string(groups) + " groups");

  DynamicsLog log;
  train_on(ds, split.train, split.validation, arch, cfg, &log);
  const LearningTimes lt =
      learning_times(log, gather(ds.noisy_labels, split.train), window);
  std::stable_sort(mislabeled_pos.begin(), mislabeled_pos.end(),
                   [&](std::size_t a, std::size_t b) { return lt.lt[a] < lt.lt[b]; });

  std::size_t at = 0;
  for (std::size_t size : partition_sizes(mislabeled_pos.size(), groups)) {
    IndexList g;
    for (std::size_t k = 0; k < size; ++k) g.push_back(split.train[mislabeled_pos[at + k]]);
    out.lt_first.push_back(lt.lt[mislabeled_pos[at]]);
    out.lt_last.push_back(lt.lt[mislabeled_pos[at + size - 1]]);
    at += size;
    out.groups.push_back(std::move(g));
  }
  return out;
}

OrderHarmResult order_harm_experiment(const Dataset& ds, const SplitIndices& split,
                                      const Dataset& test, const Arch& arch,
                                      const TrainConfig& cfg, std::size_t groups,
                                      std::size_t repeats, std::uint32_t window) {
  require(repeats >= 1, ErrorKind::kInvalidConfig, "repeats must be >= 1");
  const MislabeledGroups mg =
      group_mislabeled_by_learning_time(ds, split, arch, cfg, groups, window);
  const Matrix x_test = to_double(test.features);

  OrderHarmResult res;
  res.lt_first = mg.lt_first;
  res.lt_last = mg.lt_last;
  for (const IndexList& group : mg.groups) {
    IndexList ids = mg.clean;
    ids.insert(ids.end(), group.begin(), group.end());
    std::sort(ids.begin(), ids.end());
    std::vector<double> accs;
    for (std::size_t r = 0; r < repeats; ++r) {
      TrainConfig rc = cfg;
      rc.seed = cfg.seed + 1 + r;
      const TrainResult tr = train_on(ds, ids, split.validation, arch, rc);
      accs.push_back(evaluate_accuracy(tr.model, x_test, test.true_labels));
    }
    const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) /
                        static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    res.group_sizes.push_back(group.size());
    res.mean.push_back(mean);
    res.stddev.push_back(accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1))
                                         : 0.0);
    res.accuracy.push_back(std::move(accs));
  }
  return res;
}

std::vector<std::uint32_t> epochs_to_fraction(std::span<const std::uint32_t> lt,
                                              std::uint32_t epochs,
                                              std::span<const double> fractions) {
  std::vector<std::uint32_t> out;
  for (double f : fractions) {
    const std::size_t need = ceil_count(f * static_cast<double>(lt.size()));
    std::uint32_t reached = epochs + 1;
    for (std::uint32_t e = 1; e <= epochs; ++e) {
      const auto learned = static_cast<std::size_t>(
          std::count_if(lt.begin(), lt.end(), [e](std::uint32_t v) { return v <= e; }));
      if (learned >= need) {
        reached = e;
        break;
      }
    }
    out.push_back(reached);
  }
  return out;
}

PretrainedSpeedResult pretrained_speed_experiment(const Dataset& ds,
                                                  const SplitIndices& split,
                                                  const Dataset& test, const Arch& arch,
                                                  const TrainConfig& cfg, std::size_t groups,
                                                  std::uint32_t window,
                                                  std::vector<double> fractions) {
  const MislabeledGroups mg =
      group_mislabeled_by_learning_time(ds, split, arch, cfg, groups, window);
  TrainConfig pre_cfg = cfg;
  pre_cfg.seed = cfg.seed + 1;
  const TrainResult pretrained = train_on(ds, mg.clean, split.validation, arch, pre_cfg);

  PretrainedSpeedResult res;
  res.fractions = fractions;
  res.pretrain_test_accuracy =
      evaluate_accuracy(pretrained.model, to_double(test.features), test.true_labels);
  for (const IndexList& group : mg.groups) {
    IndexList ids = mg.clean;
    ids.insert(ids.end(), group.begin(), group.end());
    std::sort(ids.begin(), ids.end());
    TrainConfig cont = cfg;
    cont.seed = cfg.seed + 2;
    DynamicsLog log(ids.size(), ds.num_classes);
    train(pretrained.model, ds, SplitIndices{ids, split.validation}, cont, log);

    // Learning times of the group's samples only.
    const std::unordered_set<std::size_t> members(group.begin(), group.end());
    std::vector<std::size_t> group_pos;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (members.contains(ids[p])) group_pos.push_back(p);
    }
    const LearningTimes all = learning_times(log, gather(ds.noisy_labels, ids), window);
    std::vector<std::uint32_t> lt;
    for (std::size_t p : group_pos) lt.push_back(all.lt[p]);

    std::vector<std::size_t> curve;
    for (std::uint32_t e = 1; e <= cont.epochs; ++e) {
      curve.push_back(static_cast<std::size_t>(
          std::count_if(lt.begin(), lt.end(), [e](std::uint32_t v) { return v <= e; })));
    }
    res.group_sizes.push_back(group.size());
    res.learned.push_back(std::move(curve));
    res.epochs_to_learn.push_back(epochs_to_fraction(lt, cont.epochs, fractions));
  }
  return res;
}

json to_json(const RatioSummary& s) {
  return json{{"count", s.count},
              {"finite", s.finite},
              {"median", nan_to_null(s.median)},
              {"frac_below_one", s.frac_below_one}};
}

json to_json(const SelectionQuality& q) {
  return json{{"selected", q.selected},
              {"selected_mislabeled", q.selected_mislabeled},
              {"noise_rate", q.noise_rate},
              {"removed", q.removed},
              {"removed_mislabeled", q.removed_mislabeled},
              {"purity", nan_to_null(q.purity)},
              {"removal_summary", q.removal_summary()}};
}

json to_json(const OrderHarmResult& r) {
  return json{{"group_sizes", r.group_sizes}, {"lt_first", r.lt_first},
              {"lt_last", r.lt_last},         {"accuracy", r.accuracy},
              {"mean", r.mean},               {"stddev", r.stddev}};
}

json to_json(const PretrainedSpeedResult& r) {
  return json{{"group_sizes", r.group_sizes},
              {"fractions", r.fractions},
              {"epochs_to_learn", r.epochs_to_learn},
              {"learned", r.learned},
              {"pretrain_test_accuracy", r.pretrain_test_accuracy}};
}

}  // namespace ec
