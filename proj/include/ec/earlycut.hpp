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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ec/dataset.hpp"
#include "ec/dynamics.hpp"
#include "ec/nettrain.hpp"

namespace ec {

/// Which samples the loss/confidence/gradient percentiles are ranked over.
/// MEEs are always drawn from the candidate pool.
enum class RankPopulation { kCandidates, kConfidentSubset };

const char* to_string(RankPopulation p);
RankPopulation parse_rank_population(const std::string& name);

struct CutConfig {
  double gamma = 1.5;
  double loss_top_frac = 0.10;
  double conf_top_frac = 0.20;
  double grad_bottom_frac = 0.20;
  std::uint32_t i_rate = 3;
  double target_retain = 0.6;
  std::uint32_t window = 3;
  RankPopulation population = RankPopulation::kCandidates;

  void validate() const;
  // Same configuration with all three cut fractions at zero (base selection).
  CutConfig without_cutting() const;
};

/// Per-sample statistics of the epoch-t model, aligned with `ids`.
struct SelectionMetrics {
  IndexList ids;
  std::vector<double> loss;
  std::vector<double> confidence;
  std::vector<double> grad_norm;
  std::uint32_t epoch_t = 0;

  std::size_t size() const { return ids.size(); }
};

/// Rank sets realizing the loss/confidence/gradient thresholds.
struct RankSets {
  IndexList high_loss;
  IndexList high_confidence;
  IndexList low_grad;
  // Metric values at the last admitted rank; NaN when the set is empty.
  double delta = 0.0;
  double tau = 0.0;
  double epsilon = 0.0;
};

struct SelectionState {
  IndexList d_s;           // confident subset, learning-time order
  IndexList d_s_prime;     // candidate pool, learning-time order
  IndexList suspicious;    // S: high loss and high confidence (sorted ids)
  IndexList mees;          // S': S with low gradient norm (sorted ids)
  IndexList refined;       // D^s minus MEEs (sorted ids)
  std::uint32_t round = 0;
};

struct RoundReport {
  std::uint32_t round = 0;
  std::size_t input_size = 0;
  double input_noise = 0.0;
  double retain = 1.0;
  std::size_t ds_size = 0;
  std::size_t ds_mislabeled = 0;
  std::size_t candidates_size = 0;
  std::size_t candidates_mislabeled = 0;
  std::uint32_t epoch_t = 0;
  double val_acc_at_t = 0.0;
  std::size_t suspicious_size = 0;
  std::size_t mee_count = 0;
  std::size_t mee_mislabeled = 0;
  std::size_t refined_size = 0;
  std::size_t refined_mislabeled = 0;

  double ds_noise() const;
  double refined_noise() const;
  // NaN when nothing was removed.
  double mee_purity() const;
};

struct RoundResult {
  IndexList input;          // dataset ids trained on this round
  LearningTimes lt;         // aligned with `input`
  SelectionMetrics metrics;
  RankSets ranks;
  SelectionState state;
  RoundReport report;
  DynamicsLog log;
};

struct PipelineReport {
  std::vector<RoundReport> rounds;
  std::size_t train_size = 0;
  std::size_t final_size = 0;
  double final_noise = 0.0;
  double test_accuracy = 0.0;
  std::optional<double> base_test_accuracy;
  std::optional<double> base_final_noise;
};

struct PipelineResult {
  IndexList final_subset;
  Model final_model;
  std::vector<RoundResult> rounds;
  PipelineReport report;
};

/// target_retain^(1/i_rate).
double retention_per_round(double target_retain, std::uint32_t i_rate);

/// ceil(x) that ignores representation error just above an integer.
std::size_t ceil_count(double x);

IndexList base_select(const LearningTimes& lt, double retain_fraction);

/// 1-indexed argmax of the curve, earliest on ties.
std::uint32_t pick_early_stop_epoch(std::span<const double> val_curve);

IndexList candidate_subset(std::span<const std::size_t> d_s_ordered, double gamma);

SelectionMetrics compute_metrics(const Model& model_at_t, const Dataset& ds,
                                 std::span<const std::size_t> ids,
                                 std::uint32_t epoch_t);

RankSets rank_sets(const SelectionMetrics& m, const CutConfig& cfg);

/// Three-way intersection of the rank sets, as sorted sample ids.
IndexList identify_mees(const SelectionMetrics& m, const CutConfig& cfg);

using MetricsProvider =
    std::function<SelectionMetrics(std::span<const std::size_t> ids, std::uint32_t epoch_t)>;

/// Base selection plus Early Cutting over an already recorded trajectory.
/// `input` are the dataset ids the log's columns refer to; `metrics_for`
/// supplies the epoch-t statistics for the requested ids.
RoundResult select_round(const Dataset& ds, std::span<const std::size_t> input,
                         const DynamicsLog& log, const MetricsProvider& metrics_for,
                         const CutConfig& cfg, double retain, std::uint32_t round);

/// Metrics provider backed by in-memory checkpoints.
MetricsProvider checkpoint_metrics(const Dataset& ds, const Checkpoints& ckpts);

/// Trains a fresh model on `input` then runs select_round. Round r uses
/// shuffle seed train_cfg.seed + r and an init seed derived from it.
RoundResult run_round(const Dataset& ds, std::span<const std::size_t> input,
                      std::span<const std::size_t> validation, const Arch& arch,
                      const TrainConfig& train_cfg, const CutConfig& cut_cfg,
                      std::uint32_t round);

/// Trains a model from scratch on `ids`; init seed derived from cfg.seed.
TrainResult train_on(const Dataset& ds, std::span<const std::size_t> ids,
                     std::span<const std::size_t> validation, const Arch& arch,
                     const TrainConfig& cfg, DynamicsLog* log_out = nullptr);

PipelineResult run_pipeline(const Dataset& ds, const SplitIndices& split,
                            const Dataset& test, const Arch& arch,
                            const TrainConfig& train_cfg, const CutConfig& cut_cfg,
                            bool compare_base = false);

nlohmann::json to_json(const RoundReport& r);
nlohmann::json to_json(const PipelineReport& r);

// Per-sample metrics CSV: sample_id,loss,confidence,grad_norm,epoch_t
std::string encode_metrics_csv(const SelectionMetrics& m);
SelectionMetrics decode_metrics_csv(const std::string& text,
                                    const std::string& what = "metrics csv");

/// Provider that looks ids up in an externally computed metrics table.
MetricsProvider table_metrics(SelectionMetrics table);

// sample_id,lt,loss,confidence,grad_norm,is_mee,is_truly_mislabeled
std::string encode_round_csv(const RoundResult& r, const Dataset& ds);

std::string format_double(double v);

}  // namespace ec
