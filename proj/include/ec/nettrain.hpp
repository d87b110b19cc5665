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
#include <span>
#include <string>
#include <vector>

#include "ec/dataset.hpp"
#include "ec/dynamics.hpp"
#include "ec/matrix.hpp"

namespace ec {

/// Affine layers with ReLU in between and a softmax head. An empty
/// `hidden` list gives a linear softmax classifier.
struct Arch {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::uint32_t num_classes = 0;

  std::size_t num_layers() const { return hidden.size() + 1; }
  std::size_t in_width(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden[layer - 1];
  }
  std::size_t out_width(std::size_t layer) const {
    return layer == hidden.size() ? num_classes : hidden[layer];
  }
  std::size_t num_params() const;
  void validate() const;

  bool operator==(const Arch&) const = default;
};

/// Parameters live in one flat vector: for each layer, the out x in weight
/// matrix (row-major) followed by the bias vector.
struct Model {
  Arch arch;
  std::vector<double> params;
  std::uint32_t epoch_stamp = 0;

  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const {
    return weight_offset(layer) + arch.in_width(layer) * arch.out_width(layer);
  }

  bool operator==(const Model&) const = default;
};

struct TrainConfig {
  std::uint32_t epochs = 60;
  std::size_t batch_size = 32;
  double lr_init = 0.1;
  double lr_min = 1e-5;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  // Keep a parameter snapshot every `checkpoint_stride` epochs (and at the
  // final epoch).
  std::uint32_t checkpoint_stride = 1;

  void validate() const;
};

struct PredictionBatch {
  Matrix probs;
  std::vector<Label> predicted;
  std::vector<double> confidence;
  std::vector<double> loss;
};

Model init_model(const Arch& arch, std::uint64_t seed);

Matrix to_double(const FloatMatrix& m);
Matrix rows_as_double(const Dataset& ds, std::span<const std::size_t> indices);
std::vector<Label> gather(std::span<const Label> labels,
                          std::span<const std::size_t> indices);

Matrix logits(const Model& model, const Matrix& features);

/// Stable softmax over each logit row, argmax (lowest index on ties),
/// confidence and natural-log cross-entropy against `labels`.
PredictionBatch softmax_predictions(const Matrix& logits,
                                    std::span<const Label> labels);

PredictionBatch predict_batch(const Model& model, const Matrix& features,
                              std::span<const Label> labels);

std::vector<Label> predict_labels(const Model& model, const Matrix& features);

/// Loss of one sample plus its gradients. `param_grad` (size num_params) is
/// accumulated into; `input_grad` (size input_dim) is overwritten. Either may
/// be empty to skip it.
double sample_loss_and_grad(const Model& model, std::span<const double> x,
                            Label label, std::span<double> param_grad,
                            std::span<double> input_grad);

Matrix input_gradients(const Model& model, const Matrix& features,
                       std::span<const Label> labels);

std::vector<double> input_gradient_norms(const Model& model,
                                         const Matrix& features,
                                         std::span<const Label> labels);

/// Post-ReLU activations of the last hidden layer.
Matrix penultimate_features(const Model& model, const Matrix& features);

double evaluate_accuracy(const Model& model, const Matrix& features,
                         std::span<const Label> labels);

double cosine_lr(std::uint32_t epoch, const TrainConfig& cfg);

/// Classical SGD with momentum and additive L2 decay:
///   v <- mu v + (grad + lambda theta);  theta <- theta - lr v
class SgdMomentum {
 public:
  SgdMomentum(std::size_t num_params, double momentum, double weight_decay)
      : velocity_(num_params, 0.0), momentum_(momentum), decay_(weight_decay) {}

  void step(std::span<double> params, std::span<const double> grad, double lr);

  const std::vector<double>& velocity() const { return velocity_; }

 private:
  std::vector<double> velocity_;
  double momentum_;
  double decay_;
};

/// Parameter snapshots keyed by epoch of the run that produced them.
class Checkpoints {
 public:
  void put(std::uint32_t epoch, Model model) { models_[epoch] = std::move(model); }
  const Model& at(std::uint32_t epoch) const;
  bool contains(std::uint32_t epoch) const { return models_.contains(epoch); }
  const std::map<std::uint32_t, Model>& all() const { return models_; }

 private:
  std::map<std::uint32_t, Model> models_;
};

struct TrainResult {
  Model model;
  Checkpoints checkpoints;
};

/// Mini-batch SGD on the noisy labels of `split.train`. After every epoch the
/// predictions on all of `split.train` (in that order) and the accuracy on
/// `split.validation` against noisy labels are appended to `recorder`, which
/// must be sized for split.train.
TrainResult train(const Model& initial, const Dataset& ds,
                  const SplitIndices& split, const TrainConfig& cfg,
                  DynamicsLog& recorder);

// Checkpoint container ("ECCK"); parameters are stored as 32-bit floats.
std::vector<unsigned char> encode_checkpoint(const Model& model);
Model decode_checkpoint(const std::vector<unsigned char>& bytes,
                        const std::string& what = "checkpoint");
void store_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace ec
