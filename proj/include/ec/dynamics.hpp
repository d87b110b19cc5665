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

#include "ec/dataset.hpp"

namespace ec {

/// Predicted label of every tracked sample after each epoch, plus the
/// validation accuracy curve. Epochs are 1-indexed.
class DynamicsLog {
 public:
  DynamicsLog() = default;
  DynamicsLog(std::size_t num_samples, std::uint32_t num_classes);

  std::size_t num_samples() const { return num_samples_; }
  std::uint32_t num_classes() const { return num_classes_; }
  std::size_t epochs() const { return val_curve_.size(); }

  // Appends the row for epoch epochs() + 1.
  void append(std::span<const Label> preds, double val_acc);

  Label pred(std::size_t epoch, std::size_t sample) const {
    return preds_[(epoch - 1) * num_samples_ + sample];
  }
  std::span<const Label> epoch_row(std::size_t epoch) const {
    return {preds_.data() + (epoch - 1) * num_samples_, num_samples_};
  }
  const std::vector<double>& val_curve() const { return val_curve_; }

  bool operator==(const DynamicsLog&) const = default;

 private:
  std::size_t num_samples_ = 0;
  std::uint32_t num_classes_ = 0;
  std::vector<Label> preds_;
  std::vector<double> val_curve_;
};

struct LearningTimes {
  std::vector<std::uint32_t> lt;
  std::uint32_t sentinel = 0;  // epochs + 1
  std::uint32_t window = 3;
};

/// Earliest epoch E at which the last `window` predictions (epochs
/// E-window+1 .. E) all equal the given label; sentinel T+1 otherwise.
LearningTimes learning_times(const DynamicsLog& log,
                             std::span<const Label> labels,
                             std::uint32_t window = 3);

/// Ascending learning time, ties by ascending sample index.
IndexList rank_by_learning_time(const LearningTimes& lt);

/// counts[e-1] = samples first predicted as their true label at epoch e;
/// counts[T] = samples never predicted correctly.
std::vector<std::size_t> first_correct_histogram(const DynamicsLog& log,
                                                 std::span<const Label> true_labels);

// Line-delimited log format ("ec-dynlog/1").
inline constexpr const char* kDynlogSchema = "ec-dynlog/1";
std::string encode_dynlog(const DynamicsLog& log);
DynamicsLog decode_dynlog(const std::string& text,
                          const std::string& what = "dynamics log");
void store_dynlog(const DynamicsLog& log, const std::string& path);
DynamicsLog load_dynlog(const std::string& path);

}  // namespace ec
