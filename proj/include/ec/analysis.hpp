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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ec/dataset.hpp"
#include "ec/matrix.hpp"
#include "ec/nettrain.hpp"

namespace ec {

/// Per-class arithmetic mean of feature rows (K x h).
Matrix class_centroids(const Matrix& features, std::span<const Label> labels,
                       std::uint32_t num_classes);

struct RatioSummary {
  std::size_t count = 0;
  std::size_t finite = 0;          // ratios entering the median
  double median = 0.0;             // NaN when no finite ratio exists
  double frac_below_one = 0.0;
};

/// d_true to the true-class centre, d_mislabeled to the noisy-class centre,
/// r = d_mislabeled / d_true (+inf when d_true == 0).
struct DistanceRatioReport {
  std::vector<double> d_true;
  std::vector<double> d_mislabeled;
  std::vector<double> ratio;
  std::vector<bool> is_mee;
  RatioSummary mee;
  RatioSummary other;
};

DistanceRatioReport distance_ratios(const Matrix& features,
                                    std::span<const Label> true_labels,
                                    std::span<const Label> noisy_labels,
                                    const Matrix& true_centroids,
                                    const Matrix& noisy_centroids,
                                    const std::vector<bool>& mee_flags);

RatioSummary summarize_ratios(std::span<const double> ratios);

struct SelectionQuality {
  std::size_t selected = 0;
  std::size_t selected_mislabeled = 0;
  double noise_rate = 0.0;
  std::size_t removed = 0;
  std::size_t removed_mislabeled = 0;
  double purity = 0.0;  // NaN when nothing was removed

  // "300 (91.33%)"
  std::string removal_summary() const;
};

/// Penultimate features of `ids` under `model`, centroids over the same rows
/// (true labels and noisy labels), and distance ratios of the mislabeled ids.
struct FeatureSpaceReport {
  IndexList ids;
  Matrix features;        // aligned with ids
  IndexList mislabeled;   // ids the ratios refer to
  DistanceRatioReport ratios;
};

FeatureSpaceReport feature_space_report(const Model& model, const Dataset& ds,
                                        std::span<const std::size_t> ids,
                                        std::span<const std::size_t> mees);

SelectionQuality selection_report(std::span<const std::size_t> selected,
                                  std::span<const std::size_t> mees,
                                  const Dataset& ds);

/// Mislabeled training samples ordered by the learning time a model trained
/// on all of split.train assigns them, cut into `groups` near-equal groups.
struct MislabeledGroups {
  std::vector<IndexList> groups;   // dataset ids, earliest group first
  IndexList clean;                 // clean training ids
  std::vector<std::uint32_t> lt_first;
  std::vector<std::uint32_t> lt_last;
};

MislabeledGroups group_mislabeled_by_learning_time(const Dataset& ds,
                                                   const SplitIndices& split,
                                                   const Arch& arch,
                                                   const TrainConfig& cfg,
                                                   std::size_t groups,
                                                   std::uint32_t window);

/// Near-equal contiguous partition sizes (first m % g groups get one more).
std::vector<std::size_t> partition_sizes(std::size_t m, std::size_t g);

struct OrderHarmResult {
  std::vector<std::size_t> group_sizes;
  std::vector<std::uint32_t> lt_first;
  std::vector<std::uint32_t> lt_last;
  std::vector<std::vector<double>> accuracy;  // [group][repeat]
  std::vector<double> mean;
  std::vector<double> stddev;  // sample standard deviation; 0 for 1 repeat
};

OrderHarmResult order_harm_experiment(const Dataset& ds, const SplitIndices& split,
                                      const Dataset& test, const Arch& arch,
                                      const TrainConfig& cfg, std::size_t groups = 5,
                                      std::size_t repeats = 3, std::uint32_t window = 3);

struct PretrainedSpeedResult {
  std::vector<std::size_t> group_sizes;
  std::vector<double> fractions;
  std::vector<std::vector<std::size_t>> learned;          // [group][epoch-1], cumulative
  std::vector<std::vector<std::uint32_t>> epochs_to_learn;  // [group][fraction]
  double pretrain_test_accuracy = 0.0;
};

/// Epochs for a clean-pretrained model to reach each fraction of a group
/// learned; T+1 when never reached.
std::vector<std::uint32_t> epochs_to_fraction(std::span<const std::uint32_t> lt,
                                              std::uint32_t epochs,
                                              std::span<const double> fractions);

PretrainedSpeedResult pretrained_speed_experiment(
    const Dataset& ds, const SplitIndices& split, const Dataset& test,
    const Arch& arch, const TrainConfig& cfg, std::size_t groups = 5,
    std::uint32_t window = 3, std::vector<double> fractions = {0.25, 0.5, 0.75});

nlohmann::json to_json(const RatioSummary& s);
nlohmann::json to_json(const SelectionQuality& q);
nlohmann::json to_json(const OrderHarmResult& r);
nlohmann::json to_json(const PretrainedSpeedResult& r);

}  // namespace ec
