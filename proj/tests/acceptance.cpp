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

// Acceptance checks on the standard fixture. Prints one PASS/FAIL line per
// criterion and exits nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ec/analysis.hpp"
#include "ec/binio.hpp"
#include "ec/cli.hpp"
#include "ec/config.hpp"
#include "ec/dynamics.hpp"
#include "ec/earlycut.hpp"
#include "ec/rng.hpp"
#include "oracles.hpp"

using namespace ec;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

struct Fixture {
  ExperimentConfig cfg;
  Dataset ds;
  Dataset test;
  SplitIndices split;
  Arch arch;
};

Fixture fixture(std::uint64_t seed) {
  Fixture f;
  f.cfg = load_config(std::nullopt, {}, seed, std::nullopt);
  f.ds = build_dataset(f.cfg);
  f.test = build_test_set(f.cfg);
  f.split = split_validation(f.ds, f.cfg.dataset.val_fraction, f.cfg.dataset.split_seed);
  f.arch = f.cfg.arch_for(f.ds);
  return f;
}

void gradient_check() {
  Rng rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Model m = oracle::random_model(rng, 3);
    std::vector<double> x(m.arch.input_dim);
    for (double& v : x) v = rng.normal();
    const int y = static_cast<int>(rng.below(m.arch.num_classes));
    const auto g = oracle::check_gradients(m, x, y);
    worst = std::max({worst, g.input_rel, g.param_rel});
  }
  verdict(worst < 1e-4, "gradient correctness",
          fmt("worst relative error %.3e over 100 pairs (limit 1e-4)", worst));
}

void oracle_equivalence() {
  Rng rng(99);
  int lt_bad = 0, lt_done = 0;
  while (lt_done < 1000) {
    const auto in = oracle::random_lt_instance(rng);
    if (in.window > static_cast<int>(in.preds.size())) continue;
    DynamicsLog log(in.labels.size(), static_cast<std::uint32_t>(in.K));
    for (const auto& row : in.preds) {
      const std::vector<Label> r(row.begin(), row.end());
      log.append(r, 0.0);
    }
    const std::vector<Label> y(in.labels.begin(), in.labels.end());
    if (learning_times(log, y, static_cast<std::uint32_t>(in.window)).lt !=
        oracle::learning_times(in.preds, in.labels, in.window)) {
      ++lt_bad;
    }
    ++lt_done;
  }
  int mee_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto in = oracle::random_mee_instance(rng);
    const auto want = oracle::mees(oracle::rows_of(in.metrics), in.cfg.loss_top_frac,
                                   in.cfg.conf_top_frac, in.cfg.grad_bottom_frac);
    if (identify_mees(in.metrics, in.cfg) != IndexList(want.begin(), want.end())) ++mee_bad;
  }
  verdict(lt_bad == 0 && mee_bad == 0, "oracle equivalence",
          std::to_string(lt_bad) + " learning-time and " + std::to_string(mee_bad) +
              " MEE mismatches over 1000 instances each");
}

struct PipelineRun {
  std::uint64_t seed;
  PipelineReport report;
};

void pipeline_criteria(const std::vector<PipelineRun>& runs) {
  const double r = retention_per_round(0.60, 3);
  const PipelineReport& first = runs.front().report;
  const double want = 0.6 * static_cast<double>(first.train_size);
  const double off = std::abs(static_cast<double>(first.final_size) - want);
  verdict(std::abs(r - 0.8434) <= 5e-5 && off <= 2.0, "retention arithmetic",
          fmt("per-round retention %.6f", r) + ", final subset " +
              std::to_string(first.final_size) + " vs 60% of " +
              std::to_string(first.train_size) + fmt(" (off by %.1f)", off));

  // Purity: removed-set mislabeled fraction against the D^s noise rate, pooled
  // over rounds within a seed, then averaged over the first three seeds.
  std::vector<double> purity, noise;
  std::string per_seed;
  bool defined = true;
  for (std::size_t s = 0; s < 3; ++s) {
    std::size_t removed = 0, removed_bad = 0, ds = 0, ds_bad = 0;
    for (const RoundReport& rr : runs[s].report.rounds) {
      removed += rr.mee_count;
      removed_bad += rr.mee_mislabeled;
      ds += rr.ds_size;
      ds_bad += rr.ds_mislabeled;
    }
    const double nr = static_cast<double>(ds_bad) / static_cast<double>(ds);
    noise.push_back(nr);
    per_seed += " seed " + std::to_string(runs[s].seed) + ": removed " +
                std::to_string(removed) + fmt(", D^s noise %.4f;", nr);
    if (removed == 0) {
      defined = false;
      continue;
    }
    purity.push_back(static_cast<double>(removed_bad) / static_cast<double>(removed));
  }
  const double p = defined ? mean(purity) : std::nan("");
  verdict(defined && p >= 2.0 * mean(noise), "MEE purity",
          (defined ? fmt("mean purity %.4f", p) : std::string("no samples removed on some seed"))
              + fmt(" vs 2x mean D^s noise %.4f;", 2.0 * mean(noise)) + per_seed);

  std::size_t qualifying = 0, improved = 0;
  for (const PipelineRun& run : runs) {
    for (const RoundReport& rr : run.report.rounds) {
      if (rr.mee_count == 0 || !(rr.mee_purity() >= 2.0 * rr.ds_noise())) continue;
      ++qualifying;
      if (rr.refined_noise() < rr.ds_noise()) ++improved;
    }
  }
  verdict(improved == qualifying, "subset improvement",
          qualifying == 0 ? std::string("vacuous: no round satisfied the purity property")
                          : std::to_string(improved) + " of " + std::to_string(qualifying) +
                                " qualifying rounds lowered the noise rate");

  std::vector<double> cut, base;
  for (const PipelineRun& run : runs) {
    cut.push_back(run.report.test_accuracy);
    base.push_back(*run.report.base_test_accuracy);
  }
  verdict(mean(cut) >= mean(base) - 0.002, "end-to-end benefit",
          fmt("mean test accuracy %.4f", mean(cut)) +
              fmt(" with cutting vs %.4f base selection over 5 seeds (tolerance -0.002)",
                  mean(base)));
}

void order_harm(const std::vector<Fixture>& fx) {
  std::vector<double> gaps, pooled_var;
  std::string per_seed;
  for (const Fixture& f : fx) {
    const auto r = order_harm_experiment(f.ds, f.split, f.test, f.arch, f.cfg.train,
                                         f.cfg.experiment.groups, f.cfg.experiment.repeats,
                                         f.cfg.cut.window);
    gaps.push_back(r.mean.back() - r.mean.front());
    pooled_var.push_back(0.5 * (r.stddev.front() * r.stddev.front() +
                                r.stddev.back() * r.stddev.back()));
    per_seed += fmt(" %.3f/", r.mean.front()) + fmt("%.3f", r.mean.back());
  }
  const double gap = mean(gaps), sd = std::sqrt(mean(pooled_var));
  verdict(gap > 0.0 && gap > sd, "learning-order harm",
          fmt("latest minus earliest group accuracy %.4f", gap) +
              fmt(" vs pooled std %.4f; earliest/latest per seed:", sd) + per_seed);
}

void pretrained_speed(const std::vector<Fixture>& fx) {
  std::vector<double> early, late;
  std::string per_seed;
  for (const Fixture& f : fx) {
    const std::vector<double> half{0.5};
    const auto r = pretrained_speed_experiment(f.ds, f.split, f.test, f.arch, f.cfg.train,
                                               f.cfg.experiment.groups, f.cfg.cut.window, half);
    early.push_back(r.epochs_to_learn.front()[0]);
    late.push_back(r.epochs_to_learn.back()[0]);
    per_seed += " " + std::to_string(r.epochs_to_learn.front()[0]) + "/" +
                std::to_string(r.epochs_to_learn.back()[0]);
  }
  verdict(mean(early) < mean(late), "pretrained speed",
          fmt("mean epochs to learn 50%% of the earliest group %.2f", mean(early)) +
              fmt(" vs latest %.2f; per seed:", mean(late)) + per_seed);
}

void distance_ratio(const std::vector<Fixture>& fx) {
  std::vector<double> mee_med, other_med;
  std::string per_seed;
  bool defined = true;
  for (const Fixture& f : fx) {
    DynamicsLog log;
    const TrainResult tr =
        train_on(f.ds, f.split.train, f.split.validation, f.arch, f.cfg.train, &log);
    const double retain = retention_per_round(f.cfg.cut.target_retain, f.cfg.cut.i_rate);
    const RoundResult r = select_round(f.ds, f.split.train, log,
                                       checkpoint_metrics(f.ds, tr.checkpoints), f.cfg.cut,
                                       retain, 1);
    const auto rep = feature_space_report(tr.checkpoints.at(f.cfg.experiment.feature_epoch),
                                          f.ds, f.split.train, r.state.mees);
    per_seed += " " + std::to_string(rep.ratios.mee.count) + " MEEs" +
                fmt(" (median %.3f)", rep.ratios.mee.median) +
                fmt(" vs others %.3f;", rep.ratios.other.median);
    if (!std::isfinite(rep.ratios.mee.median)) defined = false;
    mee_med.push_back(rep.ratios.mee.median);
    other_med.push_back(rep.ratios.other.median);
  }
  verdict(defined && mean(mee_med) < mean(other_med), "distance-ratio ordering",
          (defined ? fmt("mean median ratio %.4f", mean(mee_med)) +
                         fmt(" for MEEs vs %.4f for other mislabeled;", mean(other_med))
                   : std::string("MEE median undefined on some seed;")) +
              per_seed);
}

std::map<std::string, std::vector<unsigned char>> snapshot(const fs::path& dir) {
  std::map<std::string, std::vector<unsigned char>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), dir).string()] = binio::read_file(e.path().string());
    }
  }
  return files;
}

void cli_determinism() {
  const fs::path root = fs::path(EC_TEST_TMP) / "acceptance_cli";
  fs::remove_all(root);
  const std::vector<std::string> base{
      "--seed", "5",
      "--set", "dataset.n=400", "--set", "dataset.d=6", "--set", "dataset.K=3",
      "--set", "dataset.test_n=150", "--set", "train.epochs=8", "--set", "arch.hidden=[12]",
      "--set", "experiment.groups=3", "--set", "experiment.repeats=2",
      "--set", "experiment.feature_epoch=4", "--set", "cut.compare_base=true"};
  auto run = [&](const std::string& cmd, const fs::path& out,
                 std::vector<std::string> extra) {
    std::vector<std::string> args{cmd};
    args.insert(args.end(), base.begin(), base.end());
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back("--out");
    args.push_back(out.string());
    std::ostringstream o, e;
    return run_command(args, o, e);
  };

  if (run("train", root / "train", {}) != kExitOk) {
    verdict(false, "determinism", "train command failed");
    return;
  }
  const std::vector<std::string> commands{"gen", "train", "select", "pipeline", "report",
                                          "exp-order-harm", "exp-pretrained-speed"};
  std::string detail;
  bool ok = true;
  for (const std::string& cmd : commands) {
    std::vector<std::string> extra;
    if (cmd == "select") {
      extra = {"--set", "experiment.train_dir=\"" + (root / "train").string() + "\""};
    }
    const fs::path out = root / ("run_" + cmd);
    const int a = run(cmd, out, extra);
    const auto first = snapshot(out);
    fs::remove_all(out);
    const int b = run(cmd, out, extra);
    const bool same = a == kExitOk && b == kExitOk && snapshot(out) == first;
    ok = ok && same;
    detail += " " + cmd + (same ? " identical" : " DIFFERENT") + " (" +
              std::to_string(first.size()) + " files);";
  }
  verdict(ok, "determinism", "two runs per command into the same directory:" + detail);
}

}  // namespace

int main() {
  gradient_check();
  oracle_equivalence();

  std::vector<PipelineRun> runs;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    Fixture f = fixture(s);
    const PipelineResult r =
        run_pipeline(f.ds, f.split, f.test, f.arch, f.cfg.train, f.cfg.cut, true);
    runs.push_back({s, r.report});
  }
  pipeline_criteria(runs);

  std::vector<Fixture> fx;
  for (std::uint64_t s = 1; s <= 3; ++s) fx.push_back(fixture(s));
  order_harm(fx);
  pretrained_speed(fx);
  distance_ratio(fx);
  cli_determinism();

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
