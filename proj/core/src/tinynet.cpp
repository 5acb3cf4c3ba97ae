#include "efat/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "efat/error.hpp"
#include "efat/random.hpp"

namespace efat {

std::vector<LayerShape> ModelSpec::layer_shapes() const {
  std::vector<LayerShape> shapes;
  int in = input_dim;
  for (int width : hidden) {
    shapes.push_back({in, width});
    in = width;
  }
  shapes.push_back({in, classes});
  for (const auto& s : shapes) s.validate();
  return shapes;
}

TinyModel::TinyModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ValidationError("model needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    l.shape.validate();
    if (l.weights.size() != l.shape.weight_count() ||
        l.bias.size() != static_cast<std::size_t>(l.shape.out_dim)) {
      throw ValidationError("layer " + std::to_string(k) +
                            " parameter count does not match its shape");
    }
    if (k > 0 && layers_[k - 1].shape.out_dim != l.shape.in_dim) {
      throw ValidationError("layer " + std::to_string(k) + " input dim " +
                            std::to_string(l.shape.in_dim) +
                            " does not chain with previous output dim " +
                            std::to_string(layers_[k - 1].shape.out_dim));
    }
  }
}

TinyModel TinyModel::initialize(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (const auto& shape : spec.layer_shapes()) {
    DenseLayer layer{shape, std::vector<double>(shape.weight_count()),
                     std::vector<double>(static_cast<std::size_t>(shape.out_dim), 0.0)};
    const double limit = std::sqrt(6.0 / shape.in_dim);
    for (auto& w : layer.weights) w = rng.uniform(-limit, limit);
    layers.push_back(std::move(layer));
  }
  return TinyModel(std::move(layers));
}

std::vector<LayerShape> TinyModel::layer_shapes() const {
  std::vector<LayerShape> shapes;
  shapes.reserve(layers_.size());
  for (const auto& l : layers_) shapes.push_back(l.shape);
  return shapes;
}

namespace {

void require_mask_matches(const TinyModel& model, const NetworkMask& mask) {
  const auto& layers = model.layers();
  if (mask.size() != layers.size()) {
    throw DimensionMismatch("mask has " + std::to_string(mask.size()) +
                            " layers, model has " + std::to_string(layers.size()));
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (mask[k].shape() != layers[k].shape) {
      throw DimensionMismatch("mask shape of layer " + std::to_string(k) +
                              " does not match the model");
    }
  }
}

// Activations of every layer for one batch: acts[0] is the input, acts[k+1]
// the (post-ReLU, or pre-softmax logits for the last layer) output of layer k.
std::vector<Matrix> forward_all(const TinyModel& model, const Matrix& batch) {
  if (batch.cols != static_cast<std::size_t>(model.input_dim())) {
    throw DimensionMismatch("batch has " + std::to_string(batch.cols) +
                            " features, model expects " +
                            std::to_string(model.input_dim()));
  }
  const auto& layers = model.layers();
  std::vector<Matrix> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(batch);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    const Matrix& in = acts.back();
    const auto out_dim = static_cast<std::size_t>(layer.shape.out_dim);
    const auto in_dim = static_cast<std::size_t>(layer.shape.in_dim);
    Matrix out(in.rows, out_dim);
    const bool hidden = k + 1 < layers.size();
    for (std::size_t s = 0; s < in.rows; ++s) {
      const double* a = in.data.data() + s * in_dim;
      for (std::size_t n = 0; n < out_dim; ++n) {
        const double* w = layer.weights.data() + n * in_dim;
        double z = layer.bias[n];
        for (std::size_t i = 0; i < in_dim; ++i) z += w[i] * a[i];
        out(s, n) = hidden ? std::max(z, 0.0) : z;
      }
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

void softmax_rows(Matrix& logits) {
  for (std::size_t s = 0; s < logits.rows; ++s) {
    double* row = logits.data.data() + s * logits.cols;
    const double peak = *std::max_element(row, row + logits.cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      row[c] = std::exp(row[c] - peak);
      sum += row[c];
    }
    for (std::size_t c = 0; c < logits.cols; ++c) row[c] /= sum;
  }
}

void check_labels(std::span<const int> labels, std::size_t rows, int classes) {
  if (labels.size() != rows) {
    throw DimensionMismatch("label count does not match batch size");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw ValidationError("label out of range");
  }
}

}  // namespace

void TinyModel::apply_mask(const NetworkMask& mask) {
  require_mask_matches(*this, mask);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    auto flags = mask[k].flags();
    auto& w = layers_[k].weights;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (!flags[j]) w[j] = 0.0;
    }
  }
}

double TinyModel::max_masked_magnitude(const NetworkMask& mask) const {
  require_mask_matches(*this, mask);
  double worst = 0.0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    auto flags = mask[k].flags();
    const auto& w = layers_[k].weights;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (!flags[j]) worst = std::max(worst, std::abs(w[j]));
    }
  }
  return worst;
}

void DatasetSpec::validate() const {
  if (n_classes < 2) throw ValidationError("dataset needs at least 2 classes");
  if (n_features < (kind == DatasetKind::Spirals ? 2 : 1)) {
    throw ValidationError("too few features for the dataset kind");
  }
  if (n_samples < 5 * n_classes) {
    throw ValidationError("dataset needs at least 5 samples per class");
  }
  if (!(noise >= 0.0)) throw ValidationError("noise must be non-negative");
}

SyntheticDataset make_dataset(const DatasetSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto n = static_cast<std::size_t>(spec.n_samples);
  const auto d = static_cast<std::size_t>(spec.n_features);
  const auto k = static_cast<std::size_t>(spec.n_classes);

  Matrix x(n, d);
  std::vector<int> y(n);
  std::vector<std::size_t> class_count(k, 0);
  for (std::size_t s = 0; s < n; ++s) ++class_count[s % k];

  if (spec.kind == DatasetKind::Blobs) {
    Matrix centers(k, d);
    for (auto& c : centers.data) c = rng.uniform(-1.0, 1.0);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t label = s % k;
      y[s] = static_cast<int>(label);
      for (std::size_t f = 0; f < d; ++f) {
        x(s, f) = centers(label, f) + spec.noise * rng.normal();
      }
    }
  } else {
    std::vector<std::size_t> seen(k, 0);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t label = s % k;
      y[s] = static_cast<int>(label);
      const double t = (static_cast<double>(seen[label]++) + 0.5) /
                       static_cast<double>(class_count[label]);
      const double theta = 3.0 * std::numbers::pi * t +
                           2.0 * std::numbers::pi * static_cast<double>(label) /
                               static_cast<double>(k);
      x(s, 0) = t * std::cos(theta) + spec.noise * rng.normal();
      x(s, 1) = t * std::sin(theta) + spec.noise * rng.normal();
      for (std::size_t f = 2; f < d; ++f) x(s, f) = spec.noise * rng.normal();
    }
  }

  // Stratified split: 80% of every class goes to train.
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t s = 0; s < n; ++s) by_class[s % k].push_back(s);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (auto& members : by_class) {
    rng.shuffle(members.begin(), members.end());
    const auto n_train = static_cast<std::size_t>(
        std::llround(0.8 * static_cast<double>(members.size())));
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + n_train);
    test_idx.insert(test_idx.end(), members.begin() + n_train, members.end());
  }
  rng.shuffle(train_idx.begin(), train_idx.end());
  rng.shuffle(test_idx.begin(), test_idx.end());

  auto gather = [&](const std::vector<std::size_t>& idx) {
    DataSplit split{Matrix(idx.size(), d), std::vector<int>(idx.size())};
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(idx[r] * d), d,
                  split.features.data.begin() + static_cast<std::ptrdiff_t>(r * d));
      split.labels[r] = y[idx[r]];
    }
    return split;
  };
  return {spec, gather(train_idx), gather(test_idx)};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  if (max_epochs < 0) throw ValidationError("max epochs must be non-negative");
}

Matrix forward(const TinyModel& model, const Matrix& batch) {
  auto acts = forward_all(model, batch);
  Matrix scores = std::move(acts.back());
  softmax_rows(scores);
  return scores;
}

double evaluate(const TinyModel& model, const DataSplit& split) {
  if (split.size() == 0) return 0.0;
  const auto acts = forward_all(model, split.features);
  const Matrix& logits = acts.back();
  std::size_t correct = 0;
  for (std::size_t s = 0; s < logits.rows; ++s) {
    auto row = logits.row(s);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == split.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

double evaluate(const TinyModel& model, const NetworkMask& mask,
                const DataSplit& split) {
  TinyModel masked = model;
  masked.apply_mask(mask);
  return evaluate(masked, split);
}

double loss_and_gradients(const TinyModel& model, const Matrix& batch,
                          std::span<const int> labels,
                          std::vector<LayerGradients>& grads) {
  check_labels(labels, batch.rows, model.classes());
  const auto& layers = model.layers();
  auto acts = forward_all(model, batch);
  Matrix delta = acts.back();
  softmax_rows(delta);

  const double inv_batch = 1.0 / static_cast<double>(batch.rows);
  double total = 0.0;
  for (std::size_t s = 0; s < delta.rows; ++s) {
    const auto y = static_cast<std::size_t>(labels[s]);
    total -= std::log(std::max(delta(s, y), 1e-300));
    delta(s, y) -= 1.0;
  }
  for (auto& v : delta.data) v *= inv_batch;

  grads.resize(layers.size());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    const auto in_dim = static_cast<std::size_t>(layer.shape.in_dim);
    const auto out_dim = static_cast<std::size_t>(layer.shape.out_dim);
    const Matrix& in = acts[k];
    auto& g = grads[k];
    g.weights.assign(layer.weights.size(), 0.0);
    g.bias.assign(out_dim, 0.0);
    for (std::size_t s = 0; s < batch.rows; ++s) {
      const double* a = in.data.data() + s * in_dim;
      for (std::size_t n = 0; n < out_dim; ++n) {
        const double dz = delta(s, n);
        if (dz == 0.0) continue;
        g.bias[n] += dz;
        double* gw = g.weights.data() + n * in_dim;
        for (std::size_t i = 0; i < in_dim; ++i) gw[i] += dz * a[i];
      }
    }
    if (k == 0) break;
    // Propagate through W, then through the ReLU of layer k-1 (its output is
    // acts[k]; zero output means the unit was inactive).
    Matrix prev(batch.rows, in_dim);
    for (std::size_t s = 0; s < batch.rows; ++s) {
      for (std::size_t n = 0; n < out_dim; ++n) {
        const double dz = delta(s, n);
        if (dz == 0.0) continue;
        const double* w = layer.weights.data() + n * in_dim;
        for (std::size_t i = 0; i < in_dim; ++i) prev(s, i) += dz * w[i];
      }
      for (std::size_t i = 0; i < in_dim; ++i) {
        if (in(s, i) <= 0.0) prev(s, i) = 0.0;
      }
    }
    delta = std::move(prev);
  }
  return total * inv_batch;
}

double loss(const TinyModel& model, const Matrix& batch, std::span<const int> labels) {
  check_labels(labels, batch.rows, model.classes());
  Matrix p = forward(model, batch);
  double total = 0.0;
  for (std::size_t s = 0; s < p.rows; ++s) {
    total -= std::log(std::max(p(s, static_cast<std::size_t>(labels[s])), 1e-300));
  }
  return total / static_cast<double>(p.rows);
}

TrainResult train_fat(TinyModel model, const NetworkMask& mask,
                      const SyntheticDataset& data, const TrainConfig& config) {
  config.validate();
  model.apply_mask(mask);

  TrainResult result;
  result.initial_accuracy = evaluate(model, data.test);
  const auto reached = [&](double acc) {
    return config.target_accuracy && acc >= *config.target_accuracy;
  };
  if (reached(result.initial_accuracy)) {
    result.epochs_to_target = 0;
    result.model = std::move(model);
    return result;
  }

  const DataSplit& train = data.train;
  const std::size_t n = train.size();
  const std::size_t d = train.features.cols;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  std::vector<LayerGradients> grads;
  Matrix batch;
  std::vector<int> labels;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t count = std::min(batch_size, n - start);
      batch = Matrix(count, d);
      labels.resize(count);
      for (std::size_t r = 0; r < count; ++r) {
        const std::size_t src = order[start + r];
        std::copy_n(train.features.data.begin() + static_cast<std::ptrdiff_t>(src * d), d,
                    batch.data.begin() + static_cast<std::ptrdiff_t>(r * d));
        labels[r] = train.labels[src];
      }
      loss_and_gradients(model, batch, labels, grads);

      auto& layers = model.mutable_layers();
      for (std::size_t k = 0; k < layers.size(); ++k) {
        auto flags = mask[k].flags();
        auto& w = layers[k].weights;
        for (std::size_t j = 0; j < w.size(); ++j) {
          w[j] = flags[j] ? w[j] - config.learning_rate * grads[k].weights[j] : 0.0;
        }
        auto& b = layers[k].bias;
        for (std::size_t j = 0; j < b.size(); ++j) {
          b[j] -= config.learning_rate * grads[k].bias[j];
        }
      }
    }
    const double acc = evaluate(model, data.test);
    result.epoch_accuracy.push_back(acc);
    if (reached(acc)) {
      result.epochs_to_target = epoch;
      break;
    }
  }
  result.model = std::move(model);
  return result;
}

PretrainResult pretrain(const ModelSpec& spec, const SyntheticDataset& data,
                        const TrainConfig& config) {
  if (spec.input_dim != data.spec.n_features) {
    throw DimensionMismatch("model input dim does not match dataset features");
  }
  if (spec.classes != data.spec.n_classes) {
    throw DimensionMismatch("model class count does not match dataset");
  }
  TinyModel initial = TinyModel::initialize(spec, derive_seed(config.seed, {0x1417}));
  const auto shapes = initial.layer_shapes();
  auto trained = train_fat(std::move(initial), all_kept_mask(shapes), data, config);
  PretrainResult out{std::move(trained.model), 0.0};
  out.baseline_accuracy = evaluate(out.model, data.test);
  return out;
}

}  // namespace efat
