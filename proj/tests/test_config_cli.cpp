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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ec/binio.hpp"
#include "ec/cli.hpp"
#include "ec/config.hpp"
#include "helpers.hpp"

using namespace ec;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> small_config(const fs::path& out) {
  return {"--set", "dataset.n=300",         "--set", "dataset.d=4",
          "--set", "dataset.K=3",           "--set", "dataset.test_n=100",
          "--set", "train.epochs=6",        "--set", "arch.hidden=[8]",
          "--set", "experiment.groups=3",   "--set", "experiment.repeats=1",
          "--set", "experiment.feature_epoch=3", "--out", out.string()};
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = run_command(args, o, e);
  return {code, o.str(), e.str()};
}

Run run_cmd(const std::string& cmd, const fs::path& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{cmd};
  for (auto& a : small_config(out)) args.push_back(a);
  for (auto& a : extra) args.push_back(a);
  return run(args);
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

}  // namespace

TEST_CASE("defaults resolve and hash stably") {
  const ExperimentConfig a = load_config(std::nullopt, {}, std::nullopt, std::nullopt);
  CHECK(a.dataset.blobs.n == 4000);
  CHECK(a.dataset.blobs.dim == 32);
  CHECK(a.dataset.blobs.num_classes == 4);
  CHECK(a.dataset.noise.kind == NoiseKind::kInstanceDependent);
  CHECK(a.dataset.noise.rate == 0.4);
  CHECK(a.cut.target_retain == doctest::Approx(0.6));
  CHECK(a.cut.i_rate == 3);
  CHECK(a.train.epochs == 60);
  CHECK(a.hidden == std::vector<std::size_t>{64});
  const ExperimentConfig b = load_config(std::nullopt, {}, std::nullopt, std::nullopt);
  CHECK(config_hash(a) == config_hash(b));
  const ExperimentConfig c = load_config(std::nullopt, {}, 1, std::nullopt);
  CHECK(config_hash(a) != config_hash(c));
  CHECK(a.dataset.blobs.seed != c.dataset.blobs.seed);
}

TEST_CASE("overrides and file merge") {
  const auto dir = testutil::scratch("config");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"train": {"epochs": 7}, "cut": {"population": "confident_subset"}})";
  }
  const ExperimentConfig c = load_config((dir / "c.json").string(),
                                         {"train.epochs=9", "dataset.noise.kind=symmetric"},
                                         std::nullopt, std::string("elsewhere"));
  CHECK(c.train.epochs == 9);
  CHECK(c.cut.population == RankPopulation::kConfidentSubset);
  CHECK(c.dataset.noise.kind == NoiseKind::kSymmetric);
  CHECK(c.out_dir == "elsewhere");

  nlohmann::json doc = default_config_json();
  apply_override(doc, "cut.target_retain=0.5");
  CHECK(parse_config(doc).cut.target_retain == 0.5);
}

TEST_CASE("config errors") {
  auto kind = [](std::vector<std::string> sets) {
    return testutil::kind_of([&] { load_config(std::nullopt, sets, std::nullopt, std::nullopt); });
  };
  CHECK(kind({"train.epoch=3"}) == ErrorKind::kInvalidConfig);
  CHECK(kind({"cut.gamma=0.5"}) == ErrorKind::kInvalidConfig);
  CHECK(kind({"train.epochs=\"many\""}) == ErrorKind::kInvalidConfig);
  CHECK(kind({"dataset.noise.kind=gaussian"}) == ErrorKind::kInvalidConfig);
  CHECK(kind({"noequals"}) == ErrorKind::kInvalidConfig);
  CHECK(testutil::kind_of([] {
          load_config(std::string("/nonexistent/c.json"), {}, std::nullopt, std::nullopt);
        }) == ErrorKind::kIo);
}

TEST_CASE("cli exit codes") {
  const auto dir = testutil::scratch("cli_codes");
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"gen", "--bogus"}).code == kExitUsage);
  const Run v = run({"--version"});
  CHECK(v.code == kExitOk);
  CHECK(v.out.find("earlycut 0.1.0") != std::string::npos);

  CHECK(run_cmd("gen", dir / "a", {"--set", "cut.gamma=0.2"}).code == kExitConfig);
  CHECK(run_cmd("select", dir / "b").code == kExitConfig);
  CHECK(run_cmd("select", dir / "c", {"--set", "experiment.train_dir=\"" +
                                                    (dir / "missing").string() + "\""})
            .code == kExitIo);
  CHECK(run_cmd("train", dir / "d", {"--set", "train.lr_init=1e12"}).code == kExitNumeric);
  CHECK(run_cmd("report", dir / "e", {"--set", "experiment.feature_epoch=99"}).code ==
        kExitConfig);
}

TEST_CASE("train then select reproduces the recorded round") {
  const auto dir = testutil::scratch("cli_select");
  REQUIRE(run_cmd("train", dir / "train").code == kExitOk);
  for (const char* f : {"dynamics.jsonl", "model.ecck", "split.json", "train.json",
                        "manifest.json", "checkpoints/epoch_0006.ecck"}) {
    CHECK(fs::exists(dir / "train" / f));
  }
  const std::string td = "experiment.train_dir=\"" + (dir / "train").string() + "\"";
  REQUIRE(run_cmd("select", dir / "sel", {"--set", td}).code == kExitOk);
  CHECK(fs::exists(dir / "sel" / "selection.json"));

  // the metrics table written by select feeds a second select to the same result
  const std::string mc = "experiment.metrics_csv=\"" + (dir / "sel" / "metrics.csv").string() + "\"";
  REQUIRE(run_cmd("select", dir / "sel2", {"--set", td, "--set", mc}).code == kExitOk);
  CHECK(binio::read_file((dir / "sel" / "selected.csv").string()) ==
        binio::read_file((dir / "sel2" / "selected.csv").string()));

  // a window longer than the log
  CHECK(run_cmd("select", dir / "sel3", {"--set", td, "--set", "cut.window=9"}).code ==
        kExitConfig);

  fs::remove_all(dir / "train" / "checkpoints");
  CHECK(run_cmd("select", dir / "sel4", {"--set", td}).code == kExitIo);
}

TEST_CASE("identity pipeline keeps the whole training split") {
  const auto dir = testutil::scratch("cli_identity");
  REQUIRE(run_cmd("pipeline", dir,
                  {"--set", "cut.i_rate=1", "--set", "cut.target_retain=1.0", "--set",
                   "cut.loss_top_frac=0", "--set", "cut.conf_top_frac=0", "--set",
                   "cut.grad_bottom_frac=0"})
              .code == kExitOk);
  std::ifstream f(dir / "report.json");
  const auto rep = nlohmann::json::parse(f);
  CHECK(rep["final_size"] == rep["train_size"]);
  CHECK(rep["train_size"].get<std::size_t>() == 270);
}

TEST_CASE("gen is byte-identical when rerun into the same directory") {
  const auto dir = testutil::scratch("cli_gen");
  REQUIRE(run_cmd("gen", dir).code == kExitOk);
  const auto first = snapshot(dir);
  CHECK(first.count("dataset.ecds") == 1);
  CHECK(first.count("manifest.json") == 1);
  REQUIRE(run_cmd("gen", dir).code == kExitOk);
  CHECK(snapshot(dir) == first);

  std::ifstream f(dir / "manifest.json");
  const auto m = nlohmann::json::parse(f);
  CHECK(m["toolkit"] == "earlycut");
  CHECK(m["command"] == "gen");
  CHECK(m["config_hash"].get<std::string>().size() == 16);
}
