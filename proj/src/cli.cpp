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

#include "ec/cli.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ec/analysis.hpp"
#include "ec/binio.hpp"
#include "ec/config.hpp"
#include "ec/dataset.hpp"
#include "ec/dynamics.hpp"
#include "ec/earlycut.hpp"
#include "ec/error.hpp"
#include "ec/nettrain.hpp"
#include "ec/rng.hpp"

namespace ec {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Context {
  std::string command;
  ExperimentConfig cfg;
  fs::path out;
  std::ostream& log;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  binio::write_file(path.string(), std::vector<unsigned char>(text.begin(), text.end()));
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string read_text(const fs::path& path) {
  const auto bytes = binio::read_file(path.string());
  return std::string(bytes.begin(), bytes.end());
}

std::string checkpoint_name(std::uint32_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04u.ecck", epoch);
  return buf;
}

IndexList all_ids(std::size_t n) {
  IndexList ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

std::string ids_csv(std::span<const std::size_t> ids, const Dataset& ds) {
  std::string s = "sample_id,noisy_label,true_label\n";
  for (std::size_t id : ids) {
    s += std::to_string(id) + "," + std::to_string(ds.noisy_labels[id]) + "," +
         std::to_string(ds.true_labels[id]) + "\n";
  }
  return s;
}

json split_json(const SplitIndices& split) {
  return json{{"train", split.train}, {"validation", split.validation}};
}

SplitIndices parse_split(const json& doc, std::size_t n, const std::string& what) {
  SplitIndices s;
  try {
    s.train = doc.at("train").get<IndexList>();
    s.validation = doc.at("validation").get<IndexList>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, what + ": " + e.what());
  }
  for (auto id : s.train) require(id < n, ErrorKind::kFormat, what + ": id out of range");
  for (auto id : s.validation) require(id < n, ErrorKind::kFormat, what + ": id out of range");
  return s;
}

void write_manifest(const Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  json m;
  m["toolkit"] = kToolkitName;
  m["version"] = kToolkitVersion;
  m["command"] = ctx.command;
  m["config_hash"] = hex64(config_hash(c));
  m["seeds"] = {{"root", c.seed},
                {"dataset", c.dataset.blobs.seed},
                {"noise", c.dataset.noise.seed},
                {"split", c.dataset.split_seed},
                {"train", c.train.seed}};
  m["config"] = c.resolved;
  write_json(ctx.out / "manifest.json", m);
}

struct Prepared {
  Dataset ds;
  SplitIndices split;
};

Prepared prepare(const Context& ctx) {
  Prepared p{build_dataset(ctx.cfg), {}};
  p.split = split_validation(p.ds, ctx.cfg.dataset.val_fraction, ctx.cfg.dataset.split_seed);
  return p;
}

int cmd_gen(const Context& ctx) {
  const Prepared p = prepare(ctx);
  const Dataset test = build_test_set(ctx.cfg);
  store_dataset(p.ds, (ctx.out / "dataset.ecds").string());
  store_dataset(test, (ctx.out / "test.ecds").string());
  write_json(ctx.out / "split.json", split_json(p.split));
  json summary{{"n", p.ds.size()},
               {"d", p.ds.dim()},
               {"K", p.ds.num_classes},
               {"test_n", test.size()},
               {"train_size", p.split.train.size()},
               {"validation_size", p.split.validation.size()},
               {"noise_rate", noise_rate(p.ds, all_ids(p.ds.size()))},
               {"train_noise_rate", noise_rate(p.ds, p.split.train)}};
  write_json(ctx.out / "gen.json", summary);
  ctx.log << "wrote " << p.ds.size() << " samples (" << test.size() << " test) to "
          << ctx.out.string() << "\n";
  return kExitOk;
}

int cmd_train(const Context& ctx) {
  const Prepared p = prepare(ctx);
  const Dataset test = build_test_set(ctx.cfg);
  const Arch arch = ctx.cfg.arch_for(p.ds);
  DynamicsLog log(p.split.train.size(), p.ds.num_classes);
  const TrainResult res =
      train_on(p.ds, p.split.train, p.split.validation, arch, ctx.cfg.train, &log);

  store_dynlog(log, (ctx.out / "dynamics.jsonl").string());
  fs::create_directories(ctx.out / "checkpoints");
  for (const auto& [epoch, model] : res.checkpoints.all()) {
    store_checkpoint(model, (ctx.out / "checkpoints" / checkpoint_name(epoch)).string());
  }
  store_checkpoint(res.model, (ctx.out / "model.ecck").string());
  write_json(ctx.out / "split.json", split_json(p.split));

  const auto curve = log.val_curve();
  const std::uint32_t t = pick_early_stop_epoch(curve);
  json summary{{"epochs", log.epochs()},
               {"train_size", p.split.train.size()},
               {"final_val_acc", curve.empty() ? 0.0 : curve.back()},
               {"best_epoch", t},
               {"best_val_acc", curve[t - 1]},
               {"test_accuracy", evaluate_accuracy(res.model, to_double(test.features),
                                                   test.true_labels)},
               {"val_curve", curve}};
  write_json(ctx.out / "train.json", summary);
  ctx.log << "trained " << log.epochs() << " epochs, test accuracy "
          << summary["test_accuracy"].get<double>() << "\n";
  return kExitOk;
}

// Dataset ids that the columns of a recorded log refer to.
IndexList log_columns(const fs::path& dir, const Dataset& ds, const SplitIndices& split,
                      std::size_t columns) {
  const fs::path sp = dir / "split.json";
  if (fs::exists(sp)) {
    json doc;
    try {
      doc = json::parse(read_text(sp));
    } catch (const json::exception& e) {
      fail(ErrorKind::kFormat, sp.string() + ": " + e.what());
    }
    IndexList ids = parse_split(doc, ds.size(), sp.string()).train;
    require(ids.size() == columns, ErrorKind::kFormat,
            sp.string() + " does not match the dynamics log width");
    return ids;
  }
  if (columns == split.train.size()) return split.train;
  if (columns == ds.size()) return all_ids(columns);
  fail(ErrorKind::kFormat, "dynamics log has " + std::to_string(columns) +
                               " columns, matching neither the training split nor the dataset");
}

int cmd_select(const Context& ctx) {
  const ExperimentBlock& e = ctx.cfg.experiment;
  require(e.train_dir.has_value(), ErrorKind::kInvalidConfig,
          "select needs experiment.train_dir (directory holding dynamics.jsonl)");
  const fs::path dir = *e.train_dir;
  const Prepared p = prepare(ctx);
  const DynamicsLog log = load_dynlog((dir / "dynamics.jsonl").string());
  require(log.num_classes() == p.ds.num_classes, ErrorKind::kFormat,
          "dynamics log class count differs from the dataset");
  const IndexList input = log_columns(dir, p.ds, p.split, log.num_samples());

  MetricsProvider provider;
  if (e.metrics_csv) {
    provider = table_metrics(decode_metrics_csv(read_text(*e.metrics_csv), *e.metrics_csv));
  } else {
    const Dataset& ds = p.ds;
    provider = [&ds, dir](std::span<const std::size_t> ids, std::uint32_t t) {
      const fs::path ck = dir / "checkpoints" / checkpoint_name(t);
      if (!fs::exists(ck)) {
        fail(ErrorKind::kCheckpointNotFound,
             "no checkpoint for early-stop epoch " + std::to_string(t) + " at " + ck.string());
      }
      return compute_metrics(load_checkpoint(ck.string()), ds, ids, t);
    };
  }
  const double retain = retention_per_round(ctx.cfg.cut.target_retain, ctx.cfg.cut.i_rate);
  const RoundResult r = select_round(p.ds, input, log, provider, ctx.cfg.cut, retain, 1);

  json doc = to_json(r.report);
  doc["mees"] = r.state.mees;
  doc["delta"] = std::isfinite(r.ranks.delta) ? json(r.ranks.delta) : json(nullptr);
  doc["tau"] = std::isfinite(r.ranks.tau) ? json(r.ranks.tau) : json(nullptr);
  doc["epsilon"] = std::isfinite(r.ranks.epsilon) ? json(r.ranks.epsilon) : json(nullptr);
  write_json(ctx.out / "selection.json", doc);
  write_text(ctx.out / "round_1.csv", encode_round_csv(r, p.ds));
  write_text(ctx.out / "metrics.csv", encode_metrics_csv(r.metrics));
  write_text(ctx.out / "selected.csv", ids_csv(r.state.refined, p.ds));
  ctx.log << "selected " << r.state.refined.size() << " of " << input.size() << " ("
          << r.state.mees.size() << " removed by cutting)\n";
  return kExitOk;
}

int cmd_pipeline(const Context& ctx) {
  const Prepared p = prepare(ctx);
  const Dataset test = build_test_set(ctx.cfg);
  const PipelineResult res = run_pipeline(p.ds, p.split, test, ctx.cfg.arch_for(p.ds),
                                          ctx.cfg.train, ctx.cfg.cut, ctx.cfg.compare_base);
  write_json(ctx.out / "report.json", to_json(res.report));
  for (const RoundResult& r : res.rounds) {
    write_text(ctx.out / ("round_" + std::to_string(r.state.round) + ".csv"),
               encode_round_csv(r, p.ds));
  }
  write_text(ctx.out / "final_subset.csv", ids_csv(res.final_subset, p.ds));
  store_checkpoint(res.final_model, (ctx.out / "model.ecck").string());
  ctx.log << "final subset " << res.report.final_size << " of " << res.report.train_size
          << ", test accuracy " << res.report.test_accuracy << "\n";
  return kExitOk;
}

int cmd_report(const Context& ctx) {
  const Prepared p = prepare(ctx);
  const Arch arch = ctx.cfg.arch_for(p.ds);
  const std::uint32_t fe = ctx.cfg.experiment.feature_epoch;
  require(fe >= 1 && fe <= ctx.cfg.train.epochs, ErrorKind::kInvalidConfig,
          "experiment.feature_epoch must lie in [1, train.epochs]");

  DynamicsLog log(p.split.train.size(), p.ds.num_classes);
  const TrainResult res =
      train_on(p.ds, p.split.train, p.split.validation, arch, ctx.cfg.train, &log);
  const double retain = retention_per_round(ctx.cfg.cut.target_retain, ctx.cfg.cut.i_rate);
  const RoundResult r = select_round(p.ds, p.split.train, log,
                                     checkpoint_metrics(p.ds, res.checkpoints), ctx.cfg.cut,
                                     retain, 1);

  const auto hist = first_correct_histogram(log, gather(p.ds.true_labels, p.split.train));
  std::string hcsv = "epoch,first_correct\n";
  for (std::size_t e = 0; e < hist.size(); ++e) {
    hcsv += (e + 1 == hist.size() ? std::string("never") : std::to_string(e + 1)) + "," +
            std::to_string(hist[e]) + "\n";
  }
  write_text(ctx.out / "histogram.csv", hcsv);

  const FeatureSpaceReport fsr =
      feature_space_report(res.checkpoints.at(fe), p.ds, p.split.train, r.state.mees);
  std::string rcsv = "sample_id,d_true,d_mislabeled,ratio,is_mee\n";
  for (std::size_t i = 0; i < fsr.mislabeled.size(); ++i) {
    rcsv += std::to_string(fsr.mislabeled[i]) + "," + format_double(fsr.ratios.d_true[i]) +
            "," + format_double(fsr.ratios.d_mislabeled[i]) + "," +
            format_double(fsr.ratios.ratio[i]) + "," + (fsr.ratios.is_mee[i] ? "1" : "0") +
            "\n";
  }
  write_text(ctx.out / "ratios.csv", rcsv);

  Dataset feats;
  feats.features = FloatMatrix(fsr.features.rows, fsr.features.cols);
  for (std::size_t i = 0; i < fsr.features.data.size(); ++i) {
    feats.features.data[i] = static_cast<float>(fsr.features.data[i]);
  }
  feats.true_labels = gather(p.ds.true_labels, p.split.train);
  feats.noisy_labels = gather(p.ds.noisy_labels, p.split.train);
  feats.num_classes = p.ds.num_classes;
  feats.seed = p.ds.seed;
  store_dataset(feats, (ctx.out / "features.ecds").string());

  const SelectionQuality q = selection_report(r.state.refined, r.state.mees, p.ds);
  json doc{{"selection", to_json(q)},
           {"removal_summary", q.removal_summary()},
           {"round", to_json(r.report)},
           {"feature_epoch", fe},
           {"distance_ratio", {{"mee", to_json(fsr.ratios.mee)},
                               {"other", to_json(fsr.ratios.other)}}},
           {"first_correct_histogram", hist}};
  write_json(ctx.out / "report.json", doc);
  ctx.log << "removed " << q.removal_summary() << "\n";
  return kExitOk;
}

int cmd_order_harm(const Context& ctx) {
  const Prepared p = prepare(ctx);
  const Dataset test = build_test_set(ctx.cfg);
  const ExperimentBlock& e = ctx.cfg.experiment;
  const OrderHarmResult r =
      order_harm_experiment(p.ds, p.split, test, ctx.cfg.arch_for(p.ds), ctx.cfg.train,
                            e.groups, e.repeats, ctx.cfg.cut.window);
  write_json(ctx.out / "order_harm.json", to_json(r));
  std::string csv = "group,size,lt_first,lt_last,mean,stddev\n";
  for (std::size_t g = 0; g < r.mean.size(); ++g) {
    csv += std::to_string(g + 1) + "," + std::to_string(r.group_sizes[g]) + "," +
           std::to_string(r.lt_first[g]) + "," + std::to_string(r.lt_last[g]) + "," +
           format_double(r.mean[g]) + "," + format_double(r.stddev[g]) + "\n";
  }
  write_text(ctx.out / "order_harm.csv", csv);
  ctx.log << "earliest group " << r.mean.front() << ", latest group " << r.mean.back() << "\n";
  return kExitOk;
}

int cmd_pretrained_speed(const Context& ctx) {
  const Prepared p = prepare(ctx);
  const Dataset test = build_test_set(ctx.cfg);
  const ExperimentBlock& e = ctx.cfg.experiment;
  const PretrainedSpeedResult r =
      pretrained_speed_experiment(p.ds, p.split, test, ctx.cfg.arch_for(p.ds), ctx.cfg.train,
                                  e.groups, ctx.cfg.cut.window, e.fractions);
  write_json(ctx.out / "pretrained_speed.json", to_json(r));
  std::string csv = "group,epoch,learned,group_size\n";
  for (std::size_t g = 0; g < r.learned.size(); ++g) {
    for (std::size_t ep = 0; ep < r.learned[g].size(); ++ep) {
      csv += std::to_string(g + 1) + "," + std::to_string(ep + 1) + "," +
             std::to_string(r.learned[g][ep]) + "," + std::to_string(r.group_sizes[g]) + "\n";
    }
  }
  write_text(ctx.out / "pretrained_speed.csv", csv);
  return kExitOk;
}

int status_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidConfig:
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kUnsupportedArch:
      return kExitConfig;
    case ErrorKind::kInvalidInput:
    case ErrorKind::kFormat:
    case ErrorKind::kIo:
    case ErrorKind::kCheckpointNotFound:
      return kExitIo;
    case ErrorKind::kNumeric:
    case ErrorKind::kDegenerateClass:
    case ErrorKind::kContract:
      return kExitNumeric;
  }
  return kExitNumeric;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noisy-label sample selection toolkit", "ectool"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitName) + " " + kToolkitVersion);

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;

  using Handler = int (*)(const Context&);
  const std::vector<std::pair<std::string, std::pair<std::string, Handler>>> commands = {
      {"gen", {"generate a noisy dataset and its split", cmd_gen}},
      {"train", {"train and record dynamics and checkpoints", cmd_train}},
      {"select", {"one selection round over a recorded run", cmd_select}},
      {"pipeline", {"iterative selection, then final training", cmd_pipeline}},
      {"report", {"selection, distance-ratio and histogram reports", cmd_report}},
      {"exp-order-harm", {"accuracy by learning-order group", cmd_order_harm}},
      {"exp-pretrained-speed", {"learning speed of groups after clean pretraining",
                                cmd_pretrained_speed}},
  };
  for (const auto& [name, info] : commands) {
    CLI::App* sub = app.add_subcommand(name, info.first);
    sub->add_option("--config", config_path, "config file (JSON)");
    sub->add_option("--set", overrides, "dotted.key=value override")->allow_extra_args(false);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "root seed");
  }

  std::vector<const char*> argv{"ectool"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "ectool: usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  Handler handler = nullptr;
  for (const auto& [name, info] : commands) {
    if (name == chosen->get_name()) handler = info.second;
  }

  try {
    Context ctx{chosen->get_name(), load_config(config_path, overrides, seed, out_dir), {}, out};
    ctx.out = ctx.cfg.out_dir;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create output directory " + ctx.out.string());
    write_manifest(ctx);
    return handler(ctx);
  } catch (const Error& e) {
    err << "ectool: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    err << "ectool: out of memory\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "ectool: error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace ec
