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

#include "ec/earlycut.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ec/error.hpp"
#include "ec/rng.hpp"

namespace ec {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::size_t count_mislabeled(const Dataset& ds, std::span<const std::size_t> ids) {
  std::size_t c = 0;
  for (std::size_t i : ids) c += ds.is_mislabeled(i) ? 1 : 0;
  return c;
}

std::size_t rank_count(double frac, std::size_t m) {
  return static_cast<std::size_t>(std::llround(frac * static_cast<double>(m)));
}

// Positions of the `count` best entries under `better`, ties by ascending id.
IndexList top_ids(const SelectionMetrics& m, const std::vector<double>& key,
                  bool largest, std::size_t count, double& cutoff) {
  std::vector<std::size_t> pos(m.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  std::sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
    if (key[a] != key[b]) return largest ? key[a] > key[b] : key[a] < key[b];
    return m.ids[a] < m.ids[b];
  });
  count = std::min(count, pos.size());
  IndexList out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r) out.push_back(m.ids[pos[r]]);
  cutoff = count == 0 ? kNaN : key[pos[count - 1]];
  std::sort(out.begin(), out.end());
  return out;
}

IndexList intersect_sorted(const IndexList& a, const IndexList& b) {
  IndexList out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

const char* to_string(RankPopulation p) {
  return p == RankPopulation::kCandidates ? "candidates" : "confident_subset";
}

RankPopulation parse_rank_population(const std::string& name) {
  if (name == "candidates") return RankPopulation::kCandidates;
  if (name == "confident_subset") return RankPopulation::kConfidentSubset;
  fail(ErrorKind::kInvalidConfig, "unknown rank population '" + name + "'");
}

void CutConfig::validate() const {
  require(gamma >= 1.0, ErrorKind::kInvalidConfig, "early cutting rate gamma must be >= 1");
  for (double f : {loss_top_frac, conf_top_frac, grad_bottom_frac}) {
    require(f >= 0.0 && f <= 1.0, ErrorKind::kInvalidConfig,
            "cut fractions must lie in [0, 1]");
  }
  require(i_rate >= 1, ErrorKind::kInvalidConfig, "i_rate must be >= 1");
  require(target_retain > 0.0 && target_retain <= 1.0, ErrorKind::kInvalidConfig,
          "target_retain must lie in (0, 1]");
  require(window >= 1, ErrorKind::kInvalidConfig, "window must be >= 1");
}

CutConfig CutConfig::without_cutting() const {
  CutConfig c = *this;
  c.loss_top_frac = 0.0;
  c.conf_top_frac = 0.0;
  c.grad_bottom_frac = 0.0;
  return c;
}

double RoundReport::ds_noise() const { return ratio(ds_mislabeled, ds_size); }
double RoundReport::refined_noise() const { return ratio(refined_mislabeled, refined_size); }
double RoundReport::mee_purity() const {
  return mee_count == 0 ? kNaN : ratio(mee_mislabeled, mee_count);
}

double retention_per_round(double target_retain, std::uint32_t i_rate) {
  require(target_retain > 0.0 && target_retain <= 1.0, ErrorKind::kInvalidConfig,
          "target_retain must lie in (0, 1]");
  require(i_rate >= 1, ErrorKind::kInvalidConfig, "i_rate must be >= 1");
  return std::pow(target_retain, 1.0 / static_cast<double>(i_rate));
}

std::size_t ceil_count(double x) {
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

IndexList base_select(const LearningTimes& lt, double retain_fraction) {
  require(!lt.lt.empty(), ErrorKind::kInvalidArgument, "base_select: empty input");
  require(retain_fraction > 0.0 && retain_fraction <= 1.0, ErrorKind::kInvalidConfig,
          "retain fraction must lie in (0, 1]");
  IndexList order = rank_by_learning_time(lt);
  const std::size_t keep = std::min(
      order.size(), ceil_count(retain_fraction * static_cast<double>(order.size())));
  order.resize(keep);
  return order;
}

std::uint32_t pick_early_stop_epoch(std::span<const double> val_curve) {
  require(!val_curve.empty(), ErrorKind::kInvalidArgument,
          "pick_early_stop_epoch: empty validation curve");
  std::size_t best = val_curve.size();  // 1-indexed; last epoch if all NaN
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < val_curve.size(); ++e) {
    if (val_curve[e] > best_val) {
      best_val = val_curve[e];
      best = e + 1;
    }
  }
  return static_cast<std::uint32_t>(best);
}

IndexList candidate_subset(std::span<const std::size_t> d_s_ordered, double gamma) {
  require(gamma >= 1.0, ErrorKind::kInvalidConfig, "early cutting rate gamma must be >= 1");
  const std::size_t keep = std::min(
      d_s_ordered.size(), ceil_count(static_cast<double>(d_s_ordered.size()) / gamma));
  return {d_s_ordered.begin(), d_s_ordered.begin() + static_cast<std::ptrdiff_t>(keep)};
}

SelectionMetrics compute_metrics(const Model& model_at_t, const Dataset& ds,
                                 std::span<const std::size_t> ids,
                                 std::uint32_t epoch_t) {
  SelectionMetrics m;
  m.ids.assign(ids.begin(), ids.end());
  m.epoch_t = epoch_t;
  if (ids.empty()) return m;
  const Matrix x = rows_as_double(ds, ids);
  const auto y = gather(ds.noisy_labels, ids);
  PredictionBatch pb = predict_batch(model_at_t, x, y);
  m.loss = std::move(pb.loss);
  m.confidence = std::move(pb.confidence);
  m.grad_norm = input_gradient_norms(model_at_t, x, y);
  return m;
}

RankSets rank_sets(const SelectionMetrics& m, const CutConfig& cfg) {
  require(m.loss.size() == m.size() && m.confidence.size() == m.size() &&
              m.grad_norm.size() == m.size(),
          ErrorKind::kInvalidArgument, "metric vectors differ in length");
  RankSets r;
  const std::size_t n = m.size();
  r.high_loss = top_ids(m, m.loss, true, rank_count(cfg.loss_top_frac, n), r.delta);
  r.high_confidence =
      top_ids(m, m.confidence, true, rank_count(cfg.conf_top_frac, n), r.tau);
  r.low_grad = top_ids(m, m.grad_norm, false, rank_count(cfg.grad_bottom_frac, n), r.epsilon);
  return r;
}

IndexList identify_mees(const SelectionMetrics& m, const CutConfig& cfg) {
  const RankSets r = rank_sets(m, cfg);
  return intersect_sorted(intersect_sorted(r.high_loss, r.high_confidence), r.low_grad);
}

RoundResult select_round(const Dataset& ds, std::span<const std::size_t> input,
                         const DynamicsLog& log, const MetricsProvider& metrics_for,
                         const CutConfig& cfg, double retain, std::uint32_t round) {
  cfg.validate();
  require(log.num_samples() == input.size(), ErrorKind::kInvalidArgument,
          "dynamics log covers " + std::to_string(log.num_samples()) +
              " samples but the round input has " + std::to_string(input.size()));
  RoundResult out;
  out.input.assign(input.begin(), input.end());
  const auto labels = gather(ds.noisy_labels, input);
  out.lt = learning_times(log, labels, cfg.window);

  SelectionState& st = out.state;
  st.round = round;
  for (std::size_t pos : base_select(out.lt, retain)) st.d_s.push_back(input[pos]);
  st.d_s_prime = candidate_subset(st.d_s, cfg.gamma);

  const std::uint32_t t = pick_early_stop_epoch(log.val_curve());
  const IndexList& ranked =
      cfg.population == RankPopulation::kCandidates ? st.d_s_prime : st.d_s;
  out.metrics = metrics_for(ranked, t);
  require(out.metrics.size() == ranked.size(), ErrorKind::kContract,
          "metrics provider returned the wrong number of samples");
  out.ranks = rank_sets(out.metrics, cfg);
  st.suspicious = intersect_sorted(out.ranks.high_loss, out.ranks.high_confidence);
  st.mees = intersect_sorted(st.suspicious, out.ranks.low_grad);
  if (cfg.population == RankPopulation::kConfidentSubset) {
    IndexList pool = st.d_s_prime;
    std::sort(pool.begin(), pool.end());
    st.suspicious = intersect_sorted(st.suspicious, pool);
    st.mees = intersect_sorted(st.mees, pool);
  }
  const std::unordered_set<std::size_t> removed(st.mees.begin(), st.mees.end());
  for (std::size_t id : st.d_s) {
    if (!removed.contains(id)) st.refined.push_back(id);
  }
  std::sort(st.refined.begin(), st.refined.end());

  RoundReport& rep = out.report;
  rep.round = round;
  rep.input_size = input.size();
  rep.input_noise = noise_rate(ds, input);
  rep.retain = retain;
  rep.ds_size = st.d_s.size();
  rep.ds_mislabeled = count_mislabeled(ds, st.d_s);
  rep.candidates_size = st.d_s_prime.size();
  rep.candidates_mislabeled = count_mislabeled(ds, st.d_s_prime);
  rep.epoch_t = t;
  rep.val_acc_at_t = log.val_curve()[t - 1];
  rep.suspicious_size = st.suspicious.size();
  rep.mee_count = st.mees.size();
  rep.mee_mislabeled = count_mislabeled(ds, st.mees);
  rep.refined_size = st.refined.size();
  rep.refined_mislabeled = count_mislabeled(ds, st.refined);
  return out;
}

MetricsProvider checkpoint_metrics(const Dataset& ds, const Checkpoints& ckpts) {
  return [&ds, &ckpts](std::span<const std::size_t> ids, std::uint32_t t) {
    return compute_metrics(ckpts.at(t), ds, ids, t);
  };
}

TrainResult train_on(const Dataset& ds, std::span<const std::size_t> ids,
                     std::span<const std::size_t> validation, const Arch& arch,
                     const TrainConfig& cfg, DynamicsLog* log_out) {
  SplitIndices split{{ids.begin(), ids.end()}, {validation.begin(), validation.end()}};
  DynamicsLog log(ids.size(), ds.num_classes);
  const Model init = init_model(arch, derive_seed(cfg.seed, "init"));
  TrainResult result = train(init, ds, split, cfg, log);
  if (log_out != nullptr) *log_out = std::move(log);
  return result;
}

RoundResult run_round(const Dataset& ds, std::span<const std::size_t> input,
                      std::span<const std::size_t> validation, const Arch& arch,
                      const TrainConfig& train_cfg, const CutConfig& cut_cfg,
                      std::uint32_t round) {
  cut_cfg.validate();
  TrainConfig cfg = train_cfg;
  cfg.seed = train_cfg.seed + round;
  DynamicsLog log;
  const TrainResult trained = train_on(ds, input, validation, arch, cfg, &log);
  const double retain = retention_per_round(cut_cfg.target_retain, cut_cfg.i_rate);
  RoundResult r = select_round(ds, input, log, checkpoint_metrics(ds, trained.checkpoints),
                               cut_cfg, retain, round);
  r.log = std::move(log);
  return r;
}

PipelineResult run_pipeline(const Dataset& ds, const SplitIndices& split,
                            const Dataset& test, const Arch& arch,
                            const TrainConfig& train_cfg, const CutConfig& cut_cfg,
                            bool compare_base) {
  cut_cfg.validate();
  train_cfg.validate();
  PipelineResult out;
  IndexList current = split.train;
  for (std::uint32_t r = 1; r <= cut_cfg.i_rate; ++r) {
    if (current.size() < ds.num_classes) {
      fail(ErrorKind::kInvalidConfig,
           "pipeline aborted: round " + std::to_string(r) + " subset has " +
               std::to_string(current.size()) + " samples, fewer than K");
    }
    RoundResult rr = run_round(ds, current, split.validation, arch, train_cfg, cut_cfg, r);
    current = rr.state.refined;
    out.report.rounds.push_back(rr.report);
    out.rounds.push_back(std::move(rr));
  }
  if (current.size() < ds.num_classes) {
    fail(ErrorKind::kInvalidConfig, "pipeline aborted: final subset has " +
                                        std::to_string(current.size()) +
                                        " samples, fewer than K");
  }
  TrainResult final_run = train_on(ds, current, split.validation, arch, train_cfg);
  out.final_model = std::move(final_run.model);
  out.final_subset = current;

  PipelineReport& rep = out.report;
  rep.train_size = split.train.size();
  rep.final_size = current.size();
  rep.final_noise = noise_rate(ds, current);
  rep.test_accuracy =
      evaluate_accuracy(out.final_model, to_double(test.features), test.true_labels);
  if (compare_base) {
    const PipelineResult base =
        run_pipeline(ds, split, test, arch, train_cfg, cut_cfg.without_cutting(), false);
    rep.base_test_accuracy = base.report.test_accuracy;
    rep.base_final_noise = base.report.final_noise;
  }
  return out;
}

json to_json(const RoundReport& r) {
  return json{{"round", r.round},
              {"input_size", r.input_size},
              {"input_noise", r.input_noise},
              {"retain_per_round", r.retain},
              {"confident_size", r.ds_size},
              {"confident_noise", r.ds_noise()},
              {"candidates_size", r.candidates_size},
              {"candidates_noise", ratio(r.candidates_mislabeled, r.candidates_size)},
              {"early_stop_epoch", r.epoch_t},
              {"val_acc_at_early_stop", r.val_acc_at_t},
              {"suspicious_size", r.suspicious_size},
              {"mee_count", r.mee_count},
              {"mee_mislabeled", r.mee_mislabeled},
              {"mee_purity", r.mee_purity()},
              {"refined_size", r.refined_size},
              {"refined_noise", r.refined_noise()}};
}

json to_json(const PipelineReport& r) {
  json rounds = json::array();
  for (const auto& rr : r.rounds) rounds.push_back(to_json(rr));
  json j{{"rounds", rounds},
         {"train_size", r.train_size},
         {"final_size", r.final_size},
         {"final_noise", r.final_noise},
         {"test_accuracy", r.test_accuracy}};
  if (r.base_test_accuracy) j["base_test_accuracy"] = *r.base_test_accuracy;
  if (r.base_final_noise) j["base_final_noise"] = *r.base_final_noise;
  return j;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string encode_metrics_csv(const SelectionMetrics& m) {
  std::string out = "sample_id,loss,confidence,grad_norm,epoch_t\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += std::to_string(m.ids[i]) + ',' + format_double(m.loss[i]) + ',' +
           format_double(m.confidence[i]) + ',' + format_double(m.grad_norm[i]) + ',' +
           std::to_string(m.epoch_t) + '\n';
  }
  return out;
}

SelectionMetrics decode_metrics_csv(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kFormat, what + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "sample_id,loss,confidence,grad_norm,epoch_t") {
    fail(ErrorKind::kFormat, what + ": unexpected header '" + line + "'");
  }
  SelectionMetrics m;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) {
      fail(ErrorKind::kFormat, what + ": line " + std::to_string(line_no) +
                                   " has " + std::to_string(cells.size()) + " fields");
    }
    try {
      std::size_t used = 0;
      const unsigned long long id = std::stoull(cells[0], &used);
      if (used != cells[0].size()) throw std::invalid_argument("id");
      m.ids.push_back(static_cast<std::size_t>(id));
      m.loss.push_back(std::stod(cells[1]));
      m.confidence.push_back(std::stod(cells[2]));
      m.grad_norm.push_back(std::stod(cells[3]));
      const auto t = static_cast<std::uint32_t>(std::stoul(cells[4]));
      if (m.ids.size() > 1 && t != m.epoch_t) {
        fail(ErrorKind::kFormat, what + ": line " + std::to_string(line_no) +
                                     " disagrees on epoch_t");
      }
      m.epoch_t = t;
    } catch (const std::logic_error&) {
      fail(ErrorKind::kFormat, what + ": line " + std::to_string(line_no) +
                                   " has a malformed number");
    }
  }
  return m;
}

MetricsProvider table_metrics(SelectionMetrics table) {
  std::unordered_map<std::size_t, std::size_t> where;
  for (std::size_t r = 0; r < table.size(); ++r) where.emplace(table.ids[r], r);
  return [table = std::move(table), where = std::move(where)](
             std::span<const std::size_t> ids, std::uint32_t t) {
    SelectionMetrics m;
    m.epoch_t = table.size() == 0 ? t : table.epoch_t;
    for (std::size_t id : ids) {
      const auto it = where.find(id);
      if (it == where.end()) {
        fail(ErrorKind::kContract,
             "metrics table has no row for sample " + std::to_string(id));
      }
      m.ids.push_back(id);
      m.loss.push_back(table.loss[it->second]);
      m.confidence.push_back(table.confidence[it->second]);
      m.grad_norm.push_back(table.grad_norm[it->second]);
    }
    return m;
  };
}

std::string encode_round_csv(const RoundResult& r, const Dataset& ds) {
  std::unordered_map<std::size_t, std::size_t> metric_row;
  for (std::size_t i = 0; i < r.metrics.size(); ++i) metric_row.emplace(r.metrics.ids[i], i);
  const std::unordered_set<std::size_t> mees(r.state.mees.begin(), r.state.mees.end());
  std::string out = "sample_id,lt,loss,confidence,grad_norm,is_mee,is_truly_mislabeled\n";
  for (std::size_t pos = 0; pos < r.input.size(); ++pos) {
    const std::size_t id = r.input[pos];
    out += std::to_string(id) + ',' + std::to_string(r.lt.lt[pos]) + ',';
    if (const auto it = metric_row.find(id); it != metric_row.end()) {
      out += format_double(r.metrics.loss[it->second]) + ',' +
             format_double(r.metrics.confidence[it->second]) + ',' +
             format_double(r.metrics.grad_norm[it->second]) + ',';
    } else {
      out += ",,,";
    }
    out += std::string(mees.contains(id) ? "1" : "0") + ',' +
           (ds.is_mislabeled(id) ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace ec
