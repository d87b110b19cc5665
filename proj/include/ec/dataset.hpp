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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ec/matrix.hpp"

namespace ec {

using Label = std::uint16_t;
using IndexList = std::vector<std::size_t>;

/// Features plus true and observed (possibly corrupted) labels.
///
/// Features are stored as 32-bit floats so that the on-disk container
/// round-trips bit for bit. Model code widens rows to double.
struct Dataset {
  FloatMatrix features;
  std::vector<Label> true_labels;
  std::vector<Label> noisy_labels;
  std::uint32_t num_classes = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }

  bool is_mislabeled(std::size_t i) const {
    return noisy_labels[i] != true_labels[i];
  }

  // Throws kInvalidInput on the first violated invariant.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

enum class NoiseKind { kSymmetric, kAsymmetric, kPairflip, kInstanceDependent };

const char* to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kSymmetric;
  double rate = 0.0;
  // Source class -> confusable class; asymmetric noise only.
  std::optional<std::map<Label, Label>> class_map;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  IndexList train;
  IndexList validation;
};

struct BlobSpec {
  std::size_t n = 0;
  std::size_t dim = 2;
  std::uint32_t num_classes = 2;
  double separation = 3.0;
  double within_std = 1.0;
  std::uint64_t seed = 0;
};

/// Class centroids used by the blob generator; a pure function of
/// (dim, num_classes, separation, seed). Pairwise distance is exactly
/// `separation` whenever num_classes <= dim.
Matrix blob_centroids(const BlobSpec& spec);

/// Isotropic Gaussian blobs with class counts balanced to within one.
Dataset make_blobs(const BlobSpec& spec);

/// Fresh clean samples around the same centroids as make_blobs(spec), drawn
/// from an independent stream. Used as the held-out test set.
Dataset make_blobs_holdout(const BlobSpec& spec, std::size_t n_test);

/// Number of labels a rate flips on n samples: round(rate * n), or zero when
/// rate * n < 1.
std::size_t noise_flip_count(double rate, std::size_t n);

Dataset inject_noise(const Dataset& clean, const NoiseSpec& spec);

SplitIndices split_validation(const Dataset& ds, double fraction,
                              std::uint64_t seed);

void store_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

std::vector<unsigned char> encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::vector<unsigned char>& bytes,
                       const std::string& what = "dataset");

/// Rows of `ds` restricted to `indices`, in the given order.
Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

/// Fraction of `indices` whose noisy label differs from the true label.
double noise_rate(const Dataset& ds, std::span<const std::size_t> indices);

}  // namespace ec
