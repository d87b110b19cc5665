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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ec/dataset.hpp"
#include "ec/earlycut.hpp"
#include "ec/nettrain.hpp"

namespace ec {

struct DatasetBlock {
  std::optional<std::string> path;       // ECDS container instead of generating
  std::optional<std::string> test_path;  // ECDS container for the held-out set
  BlobSpec blobs;
  std::size_t test_n = 2000;
  NoiseSpec noise;
  double val_fraction = 0.1;
  std::uint64_t split_seed = 0;
};

struct ExperimentBlock {
  std::size_t groups = 5;
  std::size_t repeats = 3;
  std::uint32_t feature_epoch = 10;
  std::vector<double> fractions{0.25, 0.5, 0.75};
  std::optional<std::string> train_dir;
  std::optional<std::string> metrics_csv;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  DatasetBlock dataset;
  std::vector<std::size_t> hidden{64};
  TrainConfig train;
  CutConfig cut;
  bool compare_base = false;
  ExperimentBlock experiment;
  nlohmann::json resolved;  // fully merged document the fields were read from

  Arch arch_for(const Dataset& ds) const {
    return Arch{ds.dim(), hidden, ds.num_classes};
  }
};

nlohmann::json default_config_json();

/// Applies `dotted.key=value` to a document. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads every block, validating ranges; unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Merge order: defaults, config file, --set overrides, --seed, --out.
ExperimentConfig load_config(const std::optional<std::string>& path,
                             const std::vector<std::string>& overrides,
                             const std::optional<std::uint64_t>& seed,
                             const std::optional<std::string>& out_dir);

std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Dataset from the container path, or generated and noise-injected.
Dataset build_dataset(const ExperimentConfig& cfg);
Dataset build_test_set(const ExperimentConfig& cfg);

}  // namespace ec
