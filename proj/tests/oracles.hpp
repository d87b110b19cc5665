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
// Brute-force reference implementations, written independently of the
// library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "ec/earlycut.hpp"
#include "ec/nettrain.hpp"
#include "ec/rng.hpp"

namespace oracle {

// preds[e][i] for epochs e = 0..T-1.
inline std::vector<std::uint32_t> learning_times(const std::vector<std::vector<int>>& preds,
                                                 const std::vector<int>& labels, int k) {
  const int T = static_cast<int>(preds.size());
  std::vector<std::uint32_t> out(labels.size(), static_cast<std::uint32_t>(T + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int E = k; E <= T; ++E) {
      bool ok = true;
      for (int e = E - k + 1; e <= E; ++e) ok = ok && preds[e - 1][i] == labels[i];
      if (ok) {
        out[i] = static_cast<std::uint32_t>(E);
        break;
      }
    }
  }
  return out;
}

struct Row {
  std::size_t id;
  double loss, conf, grad;
};

inline std::size_t rank_count(double frac, std::size_t m) {
  return static_cast<std::size_t>(std::floor(frac * static_cast<double>(m) + 0.5));
}

inline std::set<std::size_t> mees(std::vector<Row> rows, double fl, double fc, double fg) {
  const std::size_t m = rows.size();
  auto take = [&](auto better, std::size_t count) {
    std::vector<Row> r = rows;
    // selection by repeated scan: pick the best remaining row each time
    std::set<std::size_t> chosen;
    for (std::size_t c = 0; c < count && c < m; ++c) {
      const Row* best = nullptr;
      for (const Row& x : r) {
        if (chosen.count(x.id)) continue;
        if (best == nullptr || better(x, *best)) best = &x;
      }
      chosen.insert(best->id);
    }
    return chosen;
  };
  const auto loss = take(
      [](const Row& a, const Row& b) {
        return a.loss > b.loss || (a.loss == b.loss && a.id < b.id);
      },
      rank_count(fl, m));
  const auto conf = take(
      [](const Row& a, const Row& b) {
        return a.conf > b.conf || (a.conf == b.conf && a.id < b.id);
      },
      rank_count(fc, m));
  const auto grad = take(
      [](const Row& a, const Row& b) {
        return a.grad < b.grad || (a.grad == b.grad && a.id < b.id);
      },
      rank_count(fg, m));
  std::set<std::size_t> out;
  for (std::size_t id : loss) {
    if (conf.count(id) && grad.count(id)) out.insert(id);
  }
  return out;
}

// Plain forward pass straight from the flat parameter layout.
inline double loss(const ec::Model& model, const std::vector<double>& x, int label) {
  std::vector<double> a = x;
  const std::size_t L = model.arch.num_layers();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = model.arch.in_width(l), out = model.arch.out_width(l);
    const double* W = model.params.data() + model.weight_offset(l);
    const double* b = model.params.data() + model.bias_offset(l);
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += W[o * in + i] * a[i];
      z[o] = (l + 1 < L) ? std::max(0.0, s) : s;
    }
    a = std::move(z);
  }
  double mx = a[0];
  for (double v : a) mx = std::max(mx, v);
  double se = 0.0;
  for (double v : a) se += std::exp(v - mx);
  return std::log(se) + mx - a[static_cast<std::size_t>(label)];
}

struct GradCheck {
  double input_rel = 0.0;
  double param_rel = 0.0;
};

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  return denom < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / denom;
}

// Central differences with step h against the library's backward pass.
inline GradCheck check_gradients(const ec::Model& model, const std::vector<double>& x,
                                 int label, double h = 1e-5) {
  std::vector<double> pg(model.params.size(), 0.0), ig(x.size(), 0.0);
  ec::sample_loss_and_grad(model, x, static_cast<ec::Label>(label), pg, ig);

  std::vector<double> fd_in(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    std::vector<double> xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    fd_in[j] = (loss(model, xp, label) - loss(model, xm, label)) / (2 * h);
  }
  std::vector<double> fd_p(model.params.size());
  ec::Model m = model;
  for (std::size_t j = 0; j < m.params.size(); ++j) {
    const double keep = m.params[j];
    m.params[j] = keep + h;
    const double up = loss(m, x, label);
    m.params[j] = keep - h;
    const double dn = loss(m, x, label);
    m.params[j] = keep;
    fd_p[j] = (up - dn) / (2 * h);
  }
  return {rel_error(ig, fd_in), rel_error(pg, fd_p)};
}

// Random model with 0..max_hidden hidden layers of width 1..6.
inline ec::Model random_model(ec::Rng& rng, std::size_t max_hidden) {
  ec::Arch arch;
  arch.input_dim = 1 + rng.below(6);
  arch.num_classes = static_cast<std::uint32_t>(2 + rng.below(4));
  const std::size_t layers = rng.below(max_hidden + 1);
  for (std::size_t l = 0; l < layers; ++l) arch.hidden.push_back(1 + rng.below(6));
  ec::Model m = ec::init_model(arch, rng.next_u64());
  for (double& p : m.params) p += rng.uniform(-0.5, 0.5);
  return m;
}

struct LtInstance {
  std::vector<std::vector<int>> preds;
  std::vector<int> labels;
  int K = 2;
  int window = 2;
};

inline LtInstance random_lt_instance(ec::Rng& rng) {
  LtInstance in;
  const int T = 1 + static_cast<int>(rng.below(12));
  const std::size_t n = 1 + rng.below(20);
  in.K = 2 + static_cast<int>(rng.below(3));
  in.window = 2 + static_cast<int>(rng.below(2));
  for (std::size_t i = 0; i < n; ++i) in.labels.push_back(static_cast<int>(rng.below(in.K)));
  const double stick = rng.uniform();  // how often a prediction equals the label
  in.preds.assign(T, std::vector<int>(n));
  for (int e = 0; e < T; ++e) {
    for (std::size_t i = 0; i < n; ++i) {
      in.preds[e][i] = rng.uniform() < stick ? in.labels[i] : static_cast<int>(rng.below(in.K));
    }
  }
  return in;
}

struct MeeInstance {
  ec::SelectionMetrics metrics;
  ec::CutConfig cfg;
};

inline MeeInstance random_mee_instance(ec::Rng& rng) {
  MeeInstance in;
  const std::size_t m = rng.below(41);
  std::vector<std::size_t> ids(m * 3);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  rng.shuffle(ids);
  ids.resize(m);
  // a coarse grid of values forces plenty of ties
  const double grid = 1.0 + static_cast<double>(rng.below(8));
  auto draw = [&] { return std::floor(rng.uniform() * grid) / grid; };
  for (std::size_t i = 0; i < m; ++i) {
    in.metrics.ids.push_back(ids[i]);
    in.metrics.loss.push_back(draw());
    in.metrics.confidence.push_back(draw());
    in.metrics.grad_norm.push_back(draw());
  }
  in.metrics.epoch_t = 1;
  if (rng.below(2) == 0) {
    in.cfg.loss_top_frac = rng.uniform();
    in.cfg.conf_top_frac = rng.uniform();
    in.cfg.grad_bottom_frac = rng.uniform();
  }
  return in;
}

inline std::vector<Row> rows_of(const ec::SelectionMetrics& m) {
  std::vector<Row> rows;
  for (std::size_t i = 0; i < m.size(); ++i) {
    rows.push_back({m.ids[i], m.loss[i], m.confidence[i], m.grad_norm[i]});
  }
  return rows;
}

}  // namespace oracle
