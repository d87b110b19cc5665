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

#include "ec/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ec/error.hpp"
#include "ec/rng.hpp"

namespace ec {

using nlohmann::json;

namespace {

// Reads typed leaves from one object and rejects keys nobody asked for.
class Block {
 public:
  Block(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.is_object()) fail(ErrorKind::kInvalidConfig, name_ + " must be an object");
    doc_ = &doc;
  }

  template <typename T>
  T get(const std::string& key) {
    seen_.insert(key);
    if (!doc_->contains(key)) fail(ErrorKind::kInvalidConfig, "missing key " + path(key));
    try {
      return (*doc_)[key].get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::kInvalidConfig, "wrong type for " + path(key));
    }
  }

  template <typename T>
  std::optional<T> optional(const std::string& key) {
    seen_.insert(key);
    if (!doc_->contains(key) || (*doc_)[key].is_null()) return std::nullopt;
    return get<T>(key);
  }

  const json& child(const std::string& key) {
    seen_.insert(key);
    if (!doc_->contains(key)) fail(ErrorKind::kInvalidConfig, "missing block " + path(key));
    return (*doc_)[key];
  }

  void finish() const {
    for (const auto& [key, _] : doc_->items()) {
      if (!seen_.contains(key)) fail(ErrorKind::kInvalidConfig, "unknown key " + path(key));
    }
  }

 private:
  std::string path(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  const json* doc_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

json default_config_json() {
  return json::parse(R"({
    "seed": 0,
    "out": "out",
    "dataset": {
      "path": null,
      "test_path": null,
      "n": 4000,
      "d": 32,
      "K": 4,
      "separation": 3.0,
      "within_std": 1.0,
      "test_n": 2000,
      "val_fraction": 0.1,
      "noise": {"kind": "instance_dependent", "rate": 0.4, "class_map": null}
    },
    "arch": {"hidden": [64]},
    "train": {
      "epochs": 60,
      "batch_size": 32,
      "lr_init": 0.1,
      "lr_min": 1e-5,
      "momentum": 0.9,
      "weight_decay": 5e-4,
      "checkpoint_stride": 1
    },
    "cut": {
      "gamma": 1.5,
      "loss_top_frac": 0.1,
      "conf_top_frac": 0.2,
      "grad_bottom_frac": 0.2,
      "i_rate": 3,
      "target_retain": null,
      "window": 3,
      "population": "candidates",
      "compare_base": false
    },
    "experiment": {
      "groups": 5,
      "repeats": 3,
      "feature_epoch": 10,
      "fractions": [0.25, 0.5, 0.75],
      "train_dir": null,
      "metrics_csv": null
    }
  })");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail(ErrorKind::kInvalidConfig, "--set expects dotted.key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) {
      fail(ErrorKind::kInvalidConfig, "--set: unknown block '" + parts[i] + "' in " + key);
    }
    node = &(*node)[parts[i]];
  }
  if (!node->is_object()) fail(ErrorKind::kInvalidConfig, "--set: '" + key + "' is not a leaf");
  (*node)[parts.back()] = value;
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  cfg.resolved = doc;
  Block root(doc, "");
  cfg.seed = root.get<std::uint64_t>("seed");
  cfg.out_dir = root.get<std::string>("out");

  {
    Block b(root.child("dataset"), "dataset");
    DatasetBlock& d = cfg.dataset;
    d.path = b.optional<std::string>("path");
    d.test_path = b.optional<std::string>("test_path");
    d.blobs.n = b.get<std::size_t>("n");
    d.blobs.dim = b.get<std::size_t>("d");
    d.blobs.num_classes = b.get<std::uint32_t>("K");
    d.blobs.separation = b.get<double>("separation");
    d.blobs.within_std = b.get<double>("within_std");
    d.blobs.seed = derive_seed(cfg.seed, "dataset");
    d.test_n = b.get<std::size_t>("test_n");
    d.val_fraction = b.get<double>("val_fraction");
    d.split_seed = derive_seed(cfg.seed, "split");
    Block nb(b.child("noise"), "dataset.noise");
    d.noise.kind = parse_noise_kind(nb.get<std::string>("kind"));
    d.noise.rate = nb.get<double>("rate");
    d.noise.seed = derive_seed(cfg.seed, "noise");
    if (auto m = nb.optional<std::map<std::string, int>>("class_map")) {
      std::map<Label, Label> cm;
      for (const auto& [src, dst] : *m) {
        try {
          cm[static_cast<Label>(std::stoul(src))] = static_cast<Label>(dst);
        } catch (const std::logic_error&) {
          fail(ErrorKind::kInvalidConfig, "class_map key '" + src + "' is not a class index");
        }
      }
      d.noise.class_map = std::move(cm);
    }
    nb.finish();
    b.finish();
    require(d.noise.rate >= 0.0 && d.noise.rate < 1.0, ErrorKind::kInvalidConfig,
            "dataset.noise.rate must lie in [0, 1)");
  }
  {
    Block b(root.child("arch"), "arch");
    cfg.hidden = b.get<std::vector<std::size_t>>("hidden");
    b.finish();
    for (std::size_t h : cfg.hidden) {
      require(h >= 1, ErrorKind::kInvalidConfig, "arch.hidden widths must be >= 1");
    }
  }
  {
    Block b(root.child("train"), "train");
    TrainConfig& t = cfg.train;
    t.epochs = b.get<std::uint32_t>("epochs");
    t.batch_size = b.get<std::size_t>("batch_size");
    t.lr_init = b.get<double>("lr_init");
    t.lr_min = b.get<double>("lr_min");
    t.momentum = b.get<double>("momentum");
    t.weight_decay = b.get<double>("weight_decay");
    t.checkpoint_stride = b.get<std::uint32_t>("checkpoint_stride");
    t.seed = derive_seed(cfg.seed, "train");
    b.finish();
    t.validate();
  }
  {
    Block b(root.child("cut"), "cut");
    CutConfig& c = cfg.cut;
    c.gamma = b.get<double>("gamma");
    c.loss_top_frac = b.get<double>("loss_top_frac");
    c.conf_top_frac = b.get<double>("conf_top_frac");
    c.grad_bottom_frac = b.get<double>("grad_bottom_frac");
    c.i_rate = b.get<std::uint32_t>("i_rate");
    c.target_retain =
        b.optional<double>("target_retain").value_or(1.0 - cfg.dataset.noise.rate);
    c.window = b.get<std::uint32_t>("window");
    c.population = parse_rank_population(b.get<std::string>("population"));
    cfg.compare_base = b.get<bool>("compare_base");
    b.finish();
    c.validate();
  }
  {
    Block b(root.child("experiment"), "experiment");
    ExperimentBlock& e = cfg.experiment;
    e.groups = b.get<std::size_t>("groups");
    e.repeats = b.get<std::size_t>("repeats");
    e.feature_epoch = b.get<std::uint32_t>("feature_epoch");
    e.fractions = b.get<std::vector<double>>("fractions");
    e.train_dir = b.optional<std::string>("train_dir");
    e.metrics_csv = b.optional<std::string>("metrics_csv");
    b.finish();
    require(e.groups >= 1 && e.repeats >= 1, ErrorKind::kInvalidConfig,
            "experiment.groups and experiment.repeats must be >= 1");
    for (double f : e.fractions) {
      require(f > 0.0 && f <= 1.0, ErrorKind::kInvalidConfig,
              "experiment.fractions must lie in (0, 1]");
    }
  }
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::optional<std::string>& path,
                             const std::vector<std::string>& overrides,
                             const std::optional<std::uint64_t>& seed,
                             const std::optional<std::string>& out_dir) {
  json doc = default_config_json();
  if (path) {
    std::ifstream in(*path);
    if (!in) fail(ErrorKind::kIo, "cannot open config '" + *path + "'");
    json file;
    try {
      in >> file;
    } catch (const json::exception& e) {
      fail(ErrorKind::kInvalidConfig, "config '" + *path + "' is not valid JSON: " + e.what());
    }
    if (!file.is_object()) fail(ErrorKind::kInvalidConfig, "config root must be an object");
    doc.merge_patch(file);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (seed) doc["seed"] = *seed;
  if (out_dir) doc["out"] = *out_dir;
  return parse_config(doc);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(cfg.resolved.dump());
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.path) {
    Dataset ds = load_dataset(*cfg.dataset.path);
    ds.validate();
    return ds;
  }
  BlobSpec spec = cfg.dataset.blobs;
  return inject_noise(make_blobs(spec), cfg.dataset.noise);
}

Dataset build_test_set(const ExperimentConfig& cfg) {
  if (cfg.dataset.test_path) {
    Dataset ds = load_dataset(*cfg.dataset.test_path);
    ds.validate();
    return ds;
  }
  require(!cfg.dataset.path, ErrorKind::kInvalidConfig,
          "dataset.test_path is required when dataset.path is set");
  return make_blobs_holdout(cfg.dataset.blobs, cfg.dataset.test_n);
}

}  // namespace ec
