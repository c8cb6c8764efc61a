#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "flowglyph/cnn/model.hpp"
#include "flowglyph/rng.hpp"

namespace flowglyph::cnn {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Mini-batch SGD with momentum on the mean cross-entropy. Owns the model
/// while training; dropout masks and epoch shuffles come from `config.seed`.
class Trainer {
 public:
  Trainer(Model<float> model, TrainConfig config);

  /// One update on `labels.size()` images; returns the batch's mean loss
  /// (computed before the update).
  double train_step(std::span<const float> batch, std::span<const int> labels);

  /// One shuffled pass over the data; returns the mean of the batch losses.
  double train_epoch(std::span<const float> inputs, std::span<const int> labels);

  const Model<float>& model() const { return model_; }
  Model<float> release() && { return std::move(model_); }

 private:
  Model<float> model_;
  TrainConfig config_;
  Parameters<float> velocity_;
  Rng shuffle_rng_;
  Rng dropout_rng_;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Runs `config.epochs` epochs and returns the trained model.
Model<float> fit(Model<float> model, std::span<const float> inputs, std::span<const int> labels,
                 const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace flowglyph::cnn
