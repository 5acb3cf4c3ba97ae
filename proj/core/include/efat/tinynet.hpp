#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efat/mapping.hpp"

namespace efat {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Fully-connected layer computing f(b + W a). Hidden layers use ReLU, the
// last layer of a model feeds a softmax.
struct DenseLayer {
  LayerShape shape;
  std::vector<double> weights;  // out_dim x in_dim, row-major
  std::vector<double> bias;     // out_dim

  double weight(int neuron, int input) const {
    return weights[static_cast<std::size_t>(neuron) * shape.in_dim + input];
  }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ModelSpec {
  int input_dim = 16;
  std::vector<int> hidden{32, 32};
  int classes = 4;

  std::vector<LayerShape> layer_shapes() const;
};

class TinyModel {
 public:
  TinyModel() = default;
  // Layer dims must chain (out of k == in of k+1).
  explicit TinyModel(std::vector<DenseLayer> layers);

  // He-uniform weights, zero biases.
  static TinyModel initialize(const ModelSpec& spec, std::uint64_t seed);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }
  std::vector<LayerShape> layer_shapes() const;
  int input_dim() const { return layers_.front().shape.in_dim; }
  int classes() const { return layers_.back().shape.out_dim; }

  // Zeroes every weight whose keep flag is false.
  void apply_mask(const NetworkMask& mask);
  // Largest |w| over weights the mask drops; 0 when fully conserved.
  double max_masked_magnitude(const NetworkMask& mask) const;

  friend bool operator==(const TinyModel&, const TinyModel&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

enum class DatasetKind { Blobs, Spirals };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Blobs;
  int n_samples = 1000;
  int n_features = 16;
  int n_classes = 4;
  double noise = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DataSplit {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct SyntheticDataset {
  DatasetSpec spec;
  DataSplit train;
  DataSplit test;
};

// Class-balanced, deterministic under spec.seed, stratified 80/20 split.
SyntheticDataset make_dataset(const DatasetSpec& spec);

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 32;
  int max_epochs = 20;
  std::uint64_t seed = 1;
  // Stop at the first epoch boundary whose test accuracy reaches this value.
  std::optional<double> target_accuracy;

  void validate() const;
};

// Softmax class scores, one row per sample.
Matrix forward(const TinyModel& model, const Matrix& batch);

// Accuracy on `split` after zeroing the weights `mask` drops.
double evaluate(const TinyModel& model, const NetworkMask& mask,
                const DataSplit& split);
double evaluate(const TinyModel& model, const DataSplit& split);

struct LayerGradients {
  std::vector<double> weights;
  std::vector<double> bias;
};

// Mean cross-entropy over the batch; fills one gradient entry per layer.
double loss_and_gradients(const TinyModel& model, const Matrix& batch,
                          std::span<const int> labels,
                          std::vector<LayerGradients>& grads);
double loss(const TinyModel& model, const Matrix& batch, std::span<const int> labels);

struct TrainResult {
  TinyModel model;
  double initial_accuracy = 0.0;
  std::vector<double> epoch_accuracy;  // test accuracy after each epoch
  // Epoch count at which the target was first met (0 = met before training).
  std::optional<int> epochs_to_target;

  int epochs_run() const noexcept { return static_cast<int>(epoch_accuracy.size()); }
  double final_accuracy() const noexcept {
    return epoch_accuracy.empty() ? initial_accuracy : epoch_accuracy.back();
  }
};

// Fault-aware pruning + training: minibatch SGD with dropped weights held at
// exactly zero (zeroed up front, gradients discarded, re-zeroed after every
// step). Throws DimensionMismatch when mask and model shapes differ.
TrainResult train_fat(TinyModel model, const NetworkMask& mask,
                      const SyntheticDataset& data, const TrainConfig& config);

struct PretrainResult {
  TinyModel model;
  double baseline_accuracy = 0.0;
};

PretrainResult pretrain(const ModelSpec& spec, const SyntheticDataset& data,
                        const TrainConfig& config);

}  // namespace efat
