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

#include "ec/nettrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ec/binio.hpp"
#include "ec/error.hpp"
#include "ec/rng.hpp"

namespace ec {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

// Forward-pass scratch for one sample: pre-activations z_l of every layer,
// post-ReLU activations of the hidden layers, and output probabilities.
struct Trace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  std::vector<double> probs;
};

void forward(const Model& m, std::span<const double> x, Trace& t) {
  const Arch& a = m.arch;
  const std::size_t layers = a.num_layers();
  t.pre.resize(layers);
  t.post.resize(layers - 1);
  std::span<const double> in = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n_in = a.in_width(l);
    const std::size_t n_out = a.out_width(l);
    const double* w = m.params.data() + m.weight_offset(l);
    const double* b = m.params.data() + m.bias_offset(l);
    auto& z = t.pre[l];
    z.resize(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* wr = w + o * n_in;
      double s = b[o];
      for (std::size_t i = 0; i < n_in; ++i) s += wr[i] * in[i];
      z[o] = s;
    }
    if (l + 1 < layers) {
      auto& act = t.post[l];
      act.resize(n_out);
      for (std::size_t o = 0; o < n_out; ++o) act[o] = z[o] > 0.0 ? z[o] : 0.0;
      in = act;
    }
  }
  const auto& z = t.pre.back();
  const double mx = *std::max_element(z.begin(), z.end());
  t.probs.resize(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    t.probs[k] = std::exp(z[k] - mx);
    sum += t.probs[k];
  }
  for (double& p : t.probs) p /= sum;
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

void check_features(const Model& m, const Matrix& x) {
  require(x.cols == m.arch.input_dim, ErrorKind::kInvalidArgument,
          "feature width " + std::to_string(x.cols) + " does not match model input " +
              std::to_string(m.arch.input_dim));
  for (double v : x.data) {
    require(std::isfinite(v), ErrorKind::kNumeric,
            "non-finite input feature passed to the model");
  }
}

}  // namespace

std::size_t Arch::num_params() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    total += (in_width(l) + 1) * out_width(l);
  }
  return total;
}

void Arch::validate() const {
  require(input_dim >= 1, ErrorKind::kInvalidConfig, "input_dim must be >= 1");
  require(num_classes >= 2, ErrorKind::kInvalidConfig, "num_classes must be >= 2");
  for (std::size_t h : hidden) {
    require(h >= 1, ErrorKind::kInvalidConfig, "hidden layer width must be >= 1");
  }
}

std::size_t Model::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    off += (arch.in_width(l) + 1) * arch.out_width(l);
  }
  return off;
}

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::kInvalidConfig, "epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::kInvalidConfig, "batch_size must be >= 1");
  require(lr_min >= 0.0 && lr_min <= lr_init && std::isfinite(lr_init),
          ErrorKind::kInvalidConfig, "need 0 <= lr_min <= lr_init");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::kInvalidConfig,
          "momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, ErrorKind::kInvalidConfig,
          "weight_decay must be >= 0");
  require(checkpoint_stride >= 1, ErrorKind::kInvalidConfig,
          "checkpoint_stride must be >= 1");
}

Model init_model(const Arch& arch, std::uint64_t seed) {
  arch.validate();
  Model m;
  m.arch = arch;
  m.params.resize(arch.num_params());
  Rng rng(seed);
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch.in_width(l)));
    const std::size_t begin = m.weight_offset(l);
    const std::size_t end = begin + (arch.in_width(l) + 1) * arch.out_width(l);
    for (std::size_t p = begin; p < end; ++p) m.params[p] = rng.uniform(-bound, bound);
  }
  return m;
}

Matrix to_double(const FloatMatrix& m) {
  Matrix out(m.rows, m.cols);
  std::copy(m.data.begin(), m.data.end(), out.data.begin());
  return out;
}

Matrix rows_as_double(const Dataset& ds, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), ds.dim());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = ds.features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::vector<Label> gather(std::span<const Label> labels,
                          std::span<const std::size_t> indices) {
  std::vector<Label> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels[i]);
  return out;
}

Matrix logits(const Model& model, const Matrix& features) {
  check_features(model, features);
  Matrix out(features.rows, model.arch.num_classes);
  Trace t;
  for (std::size_t i = 0; i < features.rows; ++i) {
    forward(model, features.row(i), t);
    std::copy(t.pre.back().begin(), t.pre.back().end(), out.row(i).begin());
  }
  return out;
}

PredictionBatch softmax_predictions(const Matrix& z, std::span<const Label> labels) {
  require(labels.size() == z.rows, ErrorKind::kInvalidArgument,
          "label count does not match logit rows");
  PredictionBatch out;
  out.probs = Matrix(z.rows, z.cols);
  out.predicted.resize(z.rows);
  out.confidence.resize(z.rows);
  out.loss.resize(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) {
    const auto zi = z.row(i);
    auto pi = out.probs.row(i);
    const double mx = *std::max_element(zi.begin(), zi.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < z.cols; ++k) {
      pi[k] = std::exp(zi[k] - mx);
      sum += pi[k];
    }
    for (double& p : pi) p /= sum;
    const std::size_t best = argmax_lowest(zi);
    out.predicted[i] = static_cast<Label>(best);
    out.confidence[i] = pi[best];
    require(labels[i] < z.cols, ErrorKind::kInvalidArgument, "label out of range");
    // log-sum-exp form stays finite when the labelled probability underflows.
    out.loss[i] = (mx + std::log(sum)) - zi[labels[i]];
  }
  return out;
}

PredictionBatch predict_batch(const Model& model, const Matrix& features,
                              std::span<const Label> labels) {
  return softmax_predictions(logits(model, features), labels);
}

std::vector<Label> predict_labels(const Model& model, const Matrix& features) {
  const Matrix z = logits(model, features);
  std::vector<Label> out(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) {
    out[i] = static_cast<Label>(argmax_lowest(z.row(i)));
  }
  return out;
}

double sample_loss_and_grad(const Model& m, std::span<const double> x,
                            Label label, std::span<double> param_grad,
                            std::span<double> input_grad) {
  const Arch& a = m.arch;
  Trace t;
  forward(m, x, t);
  const auto& z = t.pre.back();
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double loss = mx + std::log(sum) - z[label];

  // dL/dz for the output layer.
  std::vector<double> delta = t.probs;
  delta[label] -= 1.0;
  std::vector<double> below;
  const bool want_params = !param_grad.empty();
  for (std::size_t l = a.num_layers(); l-- > 0;) {
    const std::size_t n_in = a.in_width(l);
    const std::size_t n_out = a.out_width(l);
    const double* w = m.params.data() + m.weight_offset(l);
    if (want_params) {
      double* gw = param_grad.data() + m.weight_offset(l);
      double* gb = param_grad.data() + m.bias_offset(l);
      for (std::size_t o = 0; o < n_out; ++o) {
        const double d = delta[o];
        gb[o] += d;
        if (d == 0.0) continue;
        double* gwr = gw + o * n_in;
        if (l == 0) {
          for (std::size_t i = 0; i < n_in; ++i) gwr[i] += d * x[i];
        } else {
          const auto& prev = t.post[l - 1];
          for (std::size_t i = 0; i < n_in; ++i) gwr[i] += d * prev[i];
        }
      }
    }
    if (l == 0 && input_grad.empty()) break;
    below.assign(n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* wr = w + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) below[i] += wr[i] * d;
    }
    if (l == 0) {
      std::copy(below.begin(), below.end(), input_grad.begin());
    } else {
      const auto& prev = t.pre[l - 1];
      for (std::size_t i = 0; i < n_in; ++i) {
        if (prev[i] <= 0.0) below[i] = 0.0;
      }
      delta.swap(below);
    }
  }
  return loss;
}

Matrix input_gradients(const Model& model, const Matrix& features,
                       std::span<const Label> labels) {
  check_features(model, features);
  require(labels.size() == features.rows, ErrorKind::kInvalidArgument,
          "label count does not match feature rows");
  Matrix out(features.rows, features.cols);
  for (std::size_t i = 0; i < features.rows; ++i) {
    sample_loss_and_grad(model, features.row(i), labels[i], {}, out.row(i));
  }
  return out;
}

std::vector<double> input_gradient_norms(const Model& model,
                                         const Matrix& features,
                                         std::span<const Label> labels) {
  const Matrix g = input_gradients(model, features, labels);
  std::vector<double> out(g.rows);
  for (std::size_t i = 0; i < g.rows; ++i) {
    double s = 0.0;
    for (double v : g.row(i)) s += v * v;
    out[i] = std::sqrt(s);
  }
  return out;
}

Matrix penultimate_features(const Model& model, const Matrix& features) {
  require(!model.arch.hidden.empty(), ErrorKind::kUnsupportedArch,
          "penultimate features need at least one hidden layer");
  check_features(model, features);
  const std::size_t last_hidden = model.arch.hidden.size() - 1;
  Matrix out(features.rows, model.arch.hidden.back());
  Trace t;
  for (std::size_t i = 0; i < features.rows; ++i) {
    forward(model, features.row(i), t);
    std::copy(t.post[last_hidden].begin(), t.post[last_hidden].end(),
              out.row(i).begin());
  }
  return out;
}

double evaluate_accuracy(const Model& model, const Matrix& features,
                         std::span<const Label> labels) {
  require(features.rows > 0, ErrorKind::kInvalidArgument,
          "evaluate_accuracy: empty input");
  require(labels.size() == features.rows, ErrorKind::kInvalidArgument,
          "label count does not match feature rows");
  const auto pred = predict_labels(model, features);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double cosine_lr(std::uint32_t epoch, const TrainConfig& cfg) {
  require(epoch <= cfg.epochs, ErrorKind::kInvalidArgument,
          "cosine_lr: epoch " + std::to_string(epoch) + " beyond schedule length " +
              std::to_string(cfg.epochs));
  const double phase = M_PI * static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
  return cfg.lr_min + (cfg.lr_init - cfg.lr_min) * (1.0 + std::cos(phase)) / 2.0;
}

void SgdMomentum::step(std::span<double> params, std::span<const double> grad,
                       double lr) {
  for (std::size_t p = 0; p < params.size(); ++p) {
    velocity_[p] = momentum_ * velocity_[p] + (grad[p] + decay_ * params[p]);
    params[p] -= lr * velocity_[p];
  }
}

const Model& Checkpoints::at(std::uint32_t epoch) const {
  const auto it = models_.find(epoch);
  if (it == models_.end()) {
    fail(ErrorKind::kCheckpointNotFound,
         "no checkpoint stored for epoch " + std::to_string(epoch));
  }
  return it->second;
}

TrainResult train(const Model& initial, const Dataset& ds,
                  const SplitIndices& split, const TrainConfig& cfg,
                  DynamicsLog& recorder) {
  cfg.validate();
  require(!split.train.empty(), ErrorKind::kInvalidArgument,
          "train: empty training set");
  require(recorder.num_samples() == split.train.size(),
          ErrorKind::kInvalidArgument,
          "train: recorder is not sized for the training indices");
  const Matrix x_train = rows_as_double(ds, split.train);
  const auto y_train = gather(ds.noisy_labels, split.train);
  const Matrix x_val = rows_as_double(ds, split.validation);
  const auto y_val = gather(ds.noisy_labels, split.validation);

  TrainResult result;
  result.model = initial;
  Model& model = result.model;
  const std::size_t n = split.train.size();
  const std::size_t num_params = model.params.size();
  SgdMomentum opt(num_params, cfg.momentum, cfg.weight_decay);
  Rng shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::vector<double> grad(num_params);
  const std::uint32_t base_stamp = initial.epoch_stamp;

  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch - 1, cfg);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t r = order[b];
        batch_loss += sample_loss_and_grad(model, x_train.row(r), y_train[r], grad, {});
      }
      if (!std::isfinite(batch_loss)) {
        fail(ErrorKind::kNumeric,
             "training diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (double& g : grad) g *= scale;
      opt.step(model.params, grad, lr);
    }
    for (double p : model.params) {
      if (!std::isfinite(p)) {
        fail(ErrorKind::kNumeric, "training diverged: non-finite parameter at epoch " +
                                      std::to_string(epoch));
      }
    }
    model.epoch_stamp = base_stamp + epoch;

    const auto preds = predict_labels(model, x_train);
    double val_acc = std::numeric_limits<double>::quiet_NaN();
    if (!split.validation.empty()) val_acc = evaluate_accuracy(model, x_val, y_val);
    recorder.append(preds, val_acc);
    if (epoch % cfg.checkpoint_stride == 0 || epoch == cfg.epochs) {
      result.checkpoints.put(epoch, model);
    }
  }
  return result;
}

std::vector<unsigned char> encode_checkpoint(const Model& model) {
  binio::Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kVersion);
  const Arch& a = model.arch;
  w.le<std::uint32_t>(static_cast<std::uint32_t>(a.num_layers()));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(a.input_dim));
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(a.out_width(l)));
  }
  w.le<std::uint32_t>(model.epoch_stamp);
  for (double p : model.params) w.f32(static_cast<float>(p));
  return w.buffer();
}

Model decode_checkpoint(const std::vector<unsigned char>& bytes,
                        const std::string& what) {
  binio::Reader r(bytes, what);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) r.error("bad magic (expected ECCK)", 0);
  const auto version = r.le<std::uint32_t>("version");
  if (version != kVersion) r.error("unsupported version " + std::to_string(version), 4);
  const auto layers = r.le<std::uint32_t>("layer count");
  if (layers < 1 || layers > 64) r.error("implausible layer count", 8);
  Model m;
  m.arch.input_dim = r.le<std::uint32_t>("input dim");
  for (std::uint32_t l = 0; l < layers; ++l) {
    const auto width = r.le<std::uint32_t>("layer width");
    if (l + 1 < layers) {
      m.arch.hidden.push_back(width);
    } else {
      m.arch.num_classes = width;
    }
  }
  m.epoch_stamp = r.le<std::uint32_t>("epoch stamp");
  try {
    m.arch.validate();
  } catch (const Error& e) {
    r.error(std::string("invalid architecture: ") + e.what(), 12);
  }
  const std::size_t count = m.arch.num_params();
  if (count * 4 != r.remaining()) {
    r.error("parameter payload has " + std::to_string(r.remaining()) +
                " bytes, expected " + std::to_string(count * 4),
            r.offset());
  }
  m.params.resize(count);
  for (double& p : m.params) p = r.f32("parameters");
  return m;
}

void store_checkpoint(const Model& model, const std::string& path) {
  binio::write_file(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::string& path) {
  return decode_checkpoint(binio::read_file(path), path);
}

}  // namespace ec
