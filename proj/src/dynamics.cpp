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

#include "ec/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ec/error.hpp"

namespace ec {

using nlohmann::json;

DynamicsLog::DynamicsLog(std::size_t num_samples, std::uint32_t num_classes)
    : num_samples_(num_samples), num_classes_(num_classes) {}

void DynamicsLog::append(std::span<const Label> preds, double val_acc) {
  require(preds.size() == num_samples_, ErrorKind::kContract,
          "dynamics log row has " + std::to_string(preds.size()) +
              " predictions, expected " + std::to_string(num_samples_));
  for (Label p : preds) {
    require(p < num_classes_, ErrorKind::kContract,
            "predicted label " + std::to_string(p) + " >= K");
  }
  preds_.insert(preds_.end(), preds.begin(), preds.end());
  val_curve_.push_back(val_acc);
}

LearningTimes learning_times(const DynamicsLog& log, std::span<const Label> labels,
                             std::uint32_t window) {
  const std::size_t epochs = log.epochs();
  require(window >= 1, ErrorKind::kInvalidConfig, "window must be >= 1");
  require(window <= epochs, ErrorKind::kInvalidConfig,
          "learning-time window " + std::to_string(window) +
              " exceeds the " + std::to_string(epochs) + " recorded epochs");
  require(labels.size() == log.num_samples(), ErrorKind::kInvalidArgument,
          "label vector length does not match the log");

  LearningTimes out;
  out.window = window;
  out.sentinel = static_cast<std::uint32_t>(epochs + 1);
  out.lt.assign(log.num_samples(), out.sentinel);
  std::vector<std::uint32_t> run(log.num_samples(), 0);
  std::size_t pending = log.num_samples();
  for (std::size_t e = 1; e <= epochs && pending > 0; ++e) {
    const auto row = log.epoch_row(e);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (out.lt[i] != out.sentinel) continue;
      run[i] = row[i] == labels[i] ? run[i] + 1 : 0;
      if (run[i] >= window) {
        out.lt[i] = static_cast<std::uint32_t>(e);
        --pending;
      }
    }
  }
  return out;
}

IndexList rank_by_learning_time(const LearningTimes& lt) {
  IndexList order(lt.lt.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lt.lt[a] < lt.lt[b];
  });
  return order;
}

std::vector<std::size_t> first_correct_histogram(const DynamicsLog& log,
                                                 std::span<const Label> true_labels) {
  require(true_labels.size() == log.num_samples(), ErrorKind::kInvalidArgument,
          "label vector length does not match the log");
  const std::size_t epochs = log.epochs();
  std::vector<std::size_t> counts(epochs + 1, 0);
  for (std::size_t i = 0; i < log.num_samples(); ++i) {
    std::size_t first = epochs;  // overflow bucket
    for (std::size_t e = 1; e <= epochs; ++e) {
      if (log.pred(e, i) == true_labels[i]) {
        first = e - 1;
        break;
      }
    }
    ++counts[first];
  }
  return counts;
}

std::string encode_dynlog(const DynamicsLog& log) {
  std::string out;
  nlohmann::ordered_json header = {
      {"schema", kDynlogSchema}, {"n", log.num_samples()}, {"K", log.num_classes()}};
  out += header.dump();
  out += '\n';
  for (std::size_t e = 1; e <= log.epochs(); ++e) {
    const auto row = log.epoch_row(e);
    nlohmann::ordered_json line;
    line["epoch"] = e;
    line["preds"] = std::vector<Label>(row.begin(), row.end());
    const double v = log.val_curve()[e - 1];
    line["val_acc"] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
    out += line.dump();
    out += '\n';
  }
  return out;
}

DynamicsLog decode_dynlog(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto parse = [&](const std::string& s) {
    try {
      return json::parse(s);
    } catch (const json::exception& e) {
      fail(ErrorKind::kFormat, what + ": line " + std::to_string(line_no) +
                                   ": " + e.what());
    }
  };
  if (!std::getline(in, line)) fail(ErrorKind::kFormat, what + ": missing header line");
  line_no = 1;
  const json header = parse(line);
  if (!header.is_object() || header.value("schema", "") != kDynlogSchema) {
    fail(ErrorKind::kFormat, what + ": header does not declare schema " + kDynlogSchema);
  }
  if (!header.contains("n") || !header["n"].is_number_unsigned() ||
      !header.contains("K") || !header["K"].is_number_unsigned()) {
    fail(ErrorKind::kFormat, what + ": header needs unsigned n and K");
  }
  DynamicsLog log(header["n"].get<std::size_t>(), header["K"].get<std::uint32_t>());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json rec = parse(line);
    const std::string at = what + ": line " + std::to_string(line_no);
    if (!rec.is_object() || !rec.contains("epoch") || !rec["epoch"].is_number_unsigned()) {
      fail(ErrorKind::kFormat, at + ": record lacks an epoch number");
    }
    const auto epoch = rec["epoch"].get<std::size_t>();
    if (epoch != log.epochs() + 1) {
      fail(ErrorKind::kFormat, at + ": epoch " + std::to_string(epoch) +
                                   " is not consecutive (expected " +
                                   std::to_string(log.epochs() + 1) + ")");
    }
    if (!rec.contains("preds") || !rec["preds"].is_array()) {
      fail(ErrorKind::kFormat, at + ": record lacks a preds array");
    }
    std::vector<Label> preds;
    preds.reserve(rec["preds"].size());
    for (const auto& p : rec["preds"]) {
      if (!p.is_number_unsigned() || p.get<std::uint64_t>() >= log.num_classes()) {
        fail(ErrorKind::kFormat, at + ": prediction out of range");
      }
      preds.push_back(p.get<Label>());
    }
    if (preds.size() != log.num_samples()) {
      fail(ErrorKind::kFormat, at + ": expected " + std::to_string(log.num_samples()) +
                                   " predictions, found " + std::to_string(preds.size()));
    }
    double val = std::nan("");
    if (rec.contains("val_acc") && rec["val_acc"].is_number()) val = rec["val_acc"].get<double>();
    log.append(preds, val);
  }
  return log;
}

void store_dynlog(const DynamicsLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out << encode_dynlog(log);
  if (!out) fail(ErrorKind::kIo, "short write to '" + path + "'");
}

DynamicsLog load_dynlog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_dynlog(ss.str(), path);
}

}  // namespace ec
