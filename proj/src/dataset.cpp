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

#include "ec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "ec/binio.hpp"
#include "ec/error.hpp"
#include "ec/rng.hpp"

namespace ec {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

void check_blob_spec(const BlobSpec& spec) {
  require(spec.num_classes >= 2, ErrorKind::kInvalidConfig,
          "make_blobs: need at least 2 classes");
  require(spec.dim >= 2, ErrorKind::kInvalidConfig,
          "make_blobs: dimension must be >= 2");
  require(spec.separation >= 0.0 && std::isfinite(spec.separation),
          ErrorKind::kInvalidConfig, "make_blobs: separation must be >= 0");
  require(spec.within_std > 0.0 && std::isfinite(spec.within_std),
          ErrorKind::kInvalidConfig, "make_blobs: within_std must be > 0");
}

Dataset draw_blobs(const BlobSpec& spec, std::size_t n,
                   std::string_view label_stream,
                   std::string_view sample_stream) {
  const Matrix centroids = blob_centroids(spec);
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.seed = spec.seed;
  ds.true_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.true_labels[i] = static_cast<Label>(i % spec.num_classes);
  }
  Rng label_rng(derive_seed(spec.seed, label_stream));
  label_rng.shuffle(ds.true_labels);

  ds.features = FloatMatrix(n, spec.dim);
  Rng sample_rng(derive_seed(spec.seed, sample_stream));
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = centroids.row(ds.true_labels[i]);
    auto row = ds.features.row(i);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      row[j] = static_cast<float>(c[j] + spec.within_std * sample_rng.normal());
    }
  }
  ds.noisy_labels = ds.true_labels;
  return ds;
}

// Largest-first order with ascending index on ties.
IndexList order_by_score_desc(const std::vector<double>& score) {
  IndexList order(score.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score[a] > score[b];
  });
  return order;
}

}  // namespace

void Dataset::validate() const {
  require(size() >= 1 && dim() >= 1, ErrorKind::kInvalidInput,
          "dataset must have n >= 1 and d >= 1");
  require(num_classes >= 2, ErrorKind::kInvalidInput,
          "dataset must have at least 2 classes");
  require(true_labels.size() == size() && noisy_labels.size() == size(),
          ErrorKind::kInvalidInput, "label vectors must have length n");
  for (std::size_t i = 0; i < size(); ++i) {
    if (true_labels[i] >= num_classes || noisy_labels[i] >= num_classes) {
      fail(ErrorKind::kInvalidInput,
           "label out of range at sample " + std::to_string(i));
    }
  }
  for (float v : features.data) {
    require(std::isfinite(v), ErrorKind::kInvalidInput,
            "dataset features contain a non-finite value");
  }
}

const char* to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kSymmetric: return "symmetric";
    case NoiseKind::kAsymmetric: return "asymmetric";
    case NoiseKind::kPairflip: return "pairflip";
    case NoiseKind::kInstanceDependent: return "instance_dependent";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "symmetric") return NoiseKind::kSymmetric;
  if (name == "asymmetric") return NoiseKind::kAsymmetric;
  if (name == "pairflip") return NoiseKind::kPairflip;
  if (name == "instance_dependent" || name == "instance") {
    return NoiseKind::kInstanceDependent;
  }
  fail(ErrorKind::kInvalidConfig, "unknown noise kind '" + name + "'");
}

Matrix blob_centroids(const BlobSpec& spec) {
  check_blob_spec(spec);
  const std::size_t k = spec.num_classes;
  const std::size_t d = spec.dim;
  Rng rng(derive_seed(spec.seed, "centroids"));
  Matrix c(k, d);
  for (double& v : c.data) v = rng.normal();

  // Orthonormal rows scaled by s/sqrt(2) sit at pairwise distance s. With
  // more classes than dimensions only unit norm is enforced.
  const bool orthogonalize = k <= d;
  for (std::size_t i = 0; i < k; ++i) {
    auto row = c.row(i);
    if (orthogonalize) {
      for (std::size_t p = 0; p < i; ++p) {
        const auto prev = c.row(p);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += row[j] * prev[j];
        for (std::size_t j = 0; j < d; ++j) row[j] -= dot * prev[j];
      }
    }
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : row) v /= norm;
  }
  const double scale = spec.separation / std::sqrt(2.0);
  for (double& v : c.data) v *= scale;
  return c;
}

Dataset make_blobs(const BlobSpec& spec) {
  check_blob_spec(spec);
  require(spec.n >= spec.num_classes, ErrorKind::kInvalidConfig,
          "make_blobs: n must be >= number of classes");
  return draw_blobs(spec, spec.n, "labels", "samples");
}

Dataset make_blobs_holdout(const BlobSpec& spec, std::size_t n_test) {
  check_blob_spec(spec);
  require(n_test >= 1, ErrorKind::kInvalidConfig,
          "make_blobs_holdout: n_test must be >= 1");
  return draw_blobs(spec, n_test, "holdout-labels", "holdout-samples");
}

std::size_t noise_flip_count(double rate, std::size_t n) {
  const double expected = rate * static_cast<double>(n);
  if (expected < 1.0) return 0;
  return static_cast<std::size_t>(std::llround(expected));
}

Dataset inject_noise(const Dataset& clean, const NoiseSpec& spec) {
  require(spec.rate >= 0.0 && spec.rate < 1.0, ErrorKind::kInvalidConfig,
          "noise rate must lie in [0, 1)");
  require(clean.noisy_labels == clean.true_labels, ErrorKind::kInvalidInput,
          "inject_noise: dataset already carries label noise");
  const std::size_t n = clean.size();
  const std::uint32_t k = clean.num_classes;
  Dataset out = clean;

  if (spec.rate > 0.0 && spec.rate * static_cast<double>(n) < 1.0) {
    std::cerr << "warning: noise rate " << spec.rate << " on " << n
              << " samples flips no labels\n";
  }
  const std::size_t flips = noise_flip_count(spec.rate, n);
  if (flips == 0) return out;

  Rng rng(spec.seed);
  switch (spec.kind) {
    case NoiseKind::kSymmetric: {
      const IndexList perm = rng.permutation(n);
      for (std::size_t f = 0; f < flips; ++f) {
        const std::size_t i = perm[f];
        const auto y = clean.true_labels[i];
        auto r = static_cast<Label>(rng.below(k - 1));
        out.noisy_labels[i] = static_cast<Label>(r < y ? r : r + 1);
      }
      break;
    }
    case NoiseKind::kPairflip: {
      const IndexList perm = rng.permutation(n);
      for (std::size_t f = 0; f < flips; ++f) {
        const std::size_t i = perm[f];
        out.noisy_labels[i] =
            static_cast<Label>((clean.true_labels[i] + 1u) % k);
      }
      break;
    }
    case NoiseKind::kAsymmetric: {
      require(spec.class_map.has_value() && !spec.class_map->empty(),
              ErrorKind::kInvalidConfig, "asymmetric noise requires a class_map");
      for (const auto& [src, dst] : *spec.class_map) {
        require(src < k && dst < k, ErrorKind::kInvalidConfig,
                "class_map entry out of range");
        require(src != dst, ErrorKind::kInvalidConfig,
                "class_map maps class " + std::to_string(src) + " to itself");
      }
      IndexList eligible;
      for (std::size_t i = 0; i < n; ++i) {
        if (spec.class_map->contains(clean.true_labels[i])) eligible.push_back(i);
      }
      require(eligible.size() >= flips, ErrorKind::kInvalidConfig,
              "asymmetric noise: only " + std::to_string(eligible.size()) +
                  " samples belong to mapped classes, need " +
                  std::to_string(flips));
      rng.shuffle(eligible);
      for (std::size_t f = 0; f < flips; ++f) {
        const std::size_t i = eligible[f];
        out.noisy_labels[i] = spec.class_map->at(clean.true_labels[i]);
      }
      break;
    }
    case NoiseKind::kInstanceDependent: {
      // Corruption score of sample i toward class c: its offset from the
      // class mean projected on a random direction drawn for (true, c).
      const std::size_t d = clean.dim();
      Matrix means(k, d);
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto y = clean.true_labels[i];
        ++counts[y];
        const auto row = clean.features.row(i);
        for (std::size_t j = 0; j < d; ++j) means(y, j) += row[j];
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t j = 0; j < d; ++j) {
          means(c, j) /= static_cast<double>(counts[c]);
        }
      }
      Matrix directions(static_cast<std::size_t>(k) * k, d);
      const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
      for (double& v : directions.data) v = rng.normal() * inv_sqrt_d;

      std::vector<double> best_score(n);
      std::vector<Label> best_class(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto y = clean.true_labels[i];
        const auto row = clean.features.row(i);
        double best = -std::numeric_limits<double>::infinity();
        Label arg = 0;
        for (std::uint32_t c = 0; c < k; ++c) {
          if (c == y) continue;
          const auto w = directions.row(static_cast<std::size_t>(y) * k + c);
          double s = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            s += (static_cast<double>(row[j]) - means(y, j)) * w[j];
          }
          if (s > best) {
            best = s;
            arg = static_cast<Label>(c);
          }
        }
        best_score[i] = best;
        best_class[i] = arg;
      }
      const IndexList order = order_by_score_desc(best_score);
      for (std::size_t f = 0; f < flips; ++f) {
        out.noisy_labels[order[f]] = best_class[order[f]];
      }
      break;
    }
  }
  return out;
}

SplitIndices split_validation(const Dataset& ds, double fraction,
                              std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, ErrorKind::kInvalidConfig,
          "validation fraction must lie in (0, 1)");
  const std::size_t n = ds.size();
  const auto n_val = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(n) + 1e-9));
  require(n_val >= ds.num_classes, ErrorKind::kInvalidConfig,
          "validation split must hold at least K samples");
  require(n_val < n, ErrorKind::kInvalidConfig,
          "validation split leaves no training samples");
  Rng rng(seed);
  IndexList perm = rng.permutation(n);
  SplitIndices split;
  split.validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::vector<unsigned char> encode_dataset(const Dataset& ds) {
  binio::Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ds.size()));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ds.dim()));
  w.le<std::uint32_t>(ds.num_classes);
  w.le<std::uint64_t>(ds.seed);
  for (float v : ds.features.data) w.f32(v);
  for (Label y : ds.true_labels) w.le<std::uint16_t>(y);
  for (Label y : ds.noisy_labels) w.le<std::uint16_t>(y);
  return w.buffer();
}

Dataset decode_dataset(const std::vector<unsigned char>& bytes,
                       const std::string& what) {
  binio::Reader r(bytes, what);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) r.error("bad magic (expected ECDS)", 0);
  const auto version = r.le<std::uint32_t>("version");
  if (version != kVersion) {
    r.error("unsupported version " + std::to_string(version), 4);
  }
  const auto n = r.le<std::uint32_t>("n");
  const auto d = r.le<std::uint32_t>("d");
  const auto k = r.le<std::uint32_t>("K");
  Dataset ds;
  ds.num_classes = k;
  ds.seed = r.le<std::uint64_t>("seed");
  const std::uint64_t payload = std::uint64_t{n} * d * 4 + std::uint64_t{n} * 4;
  if (payload > r.remaining()) {
    r.error("declared n=" + std::to_string(n) + " d=" + std::to_string(d) +
                " needs " + std::to_string(payload) +
                " payload bytes but only " + std::to_string(r.remaining()) +
                " remain (truncated)",
            r.offset());
  }
  ds.features = FloatMatrix(n, d);
  for (float& v : ds.features.data) v = r.f32("features");
  ds.true_labels.resize(n);
  ds.noisy_labels.resize(n);
  for (auto* labels : {&ds.true_labels, &ds.noisy_labels}) {
    for (Label& y : *labels) {
      const std::size_t at = r.offset();
      y = r.le<std::uint16_t>("labels");
      if (y >= k) {
        r.error("label " + std::to_string(y) + " >= K=" + std::to_string(k), at);
      }
    }
  }
  if (r.remaining() != 0) r.error("trailing bytes after payload", r.offset());
  return ds;
}

void store_dataset(const Dataset& ds, const std::string& path) {
  binio::write_file(path, encode_dataset(ds));
}

Dataset load_dataset(const std::string& path) {
  return decode_dataset(binio::read_file(path), path);
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.seed = ds.seed;
  out.features = FloatMatrix(indices.size(), ds.dim());
  out.true_labels.reserve(indices.size());
  out.noisy_labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    std::copy_n(ds.features.row(i).begin(), ds.dim(), out.features.row(r).begin());
    out.true_labels.push_back(ds.true_labels[i]);
    out.noisy_labels.push_back(ds.noisy_labels[i]);
  }
  return out;
}

double noise_rate(const Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  std::size_t bad = 0;
  for (std::size_t i : indices) bad += ds.is_mislabeled(i) ? 1 : 0;
  return static_cast<double>(bad) / static_cast<double>(indices.size());
}

}  // namespace ec
