#include "flowglyph/cnn/trainer.hpp"

#include <numeric>
#include <string>
#include <vector>

#include "flowglyph/cnn/network.hpp"
#include "flowglyph/error.hpp"

namespace flowglyph::cnn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorKind::InvalidArgument, "momentum must be in [0, 1)");
  if (batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch size must be positive");
  if (epochs == 0) throw Error(ErrorKind::InvalidArgument, "epoch count must be positive");
}

Trainer::Trainer(Model<float> model, TrainConfig config)
    : model_(std::move(model)),
      config_(config),
      velocity_(Parameters<float>::zeros(model_.classes)),
      shuffle_rng_(derive_seed(config.seed, 1)),
      dropout_rng_(derive_seed(config.seed, 2)) {
  config_.validate();
  model_.validate();
}

double Trainer::train_step(std::span<const float> batch, std::span<const int> labels) {
  const std::size_t n = labels.size();
  const auto acts = forward<float>(model_, batch, n, true, &dropout_rng_);
  const double loss = cross_entropy(acts, labels, model_.classes);
  const Parameters<float> grads = backward(model_, acts, labels);

  const auto lr = static_cast<float>(config_.learning_rate);
  const auto mu = static_cast<float>(config_.momentum);
  auto weights = model_.params.tensors();
  auto velocity = velocity_.tensors();
  const auto g = grads.tensors();
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    for (std::size_t i = 0; i < g[t].size(); ++i) {
      velocity[t][i] = mu * velocity[t][i] - lr * g[t][i];
      weights[t][i] += velocity[t][i];
    }
  }
  return loss;
}

double Trainer::train_epoch(std::span<const float> inputs, std::span<const int> labels) {
  const std::size_t count = labels.size();
  if (inputs.size() != count * arch::kInputSize) {
    throw Error(ErrorKind::ShapeMismatch, "inputs do not match the label count");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_rng_.shuffle(std::span<std::size_t>(order));

  std::vector<float> batch;
  std::vector<int> batch_labels;
  double loss_sum = 0.0;
  std::size_t steps = 0;
  for (std::size_t start = 0; start < count; start += config_.batch_size) {
    const std::size_t end = std::min(count, start + config_.batch_size);
    batch.clear();
    batch_labels.clear();
    for (std::size_t j = start; j < end; ++j) {
      const auto src = inputs.subspan(order[j] * arch::kInputSize, arch::kInputSize);
      batch.insert(batch.end(), src.begin(), src.end());
      batch_labels.push_back(labels[order[j]]);
    }
    loss_sum += train_step(batch, batch_labels);
    ++steps;
  }
  return steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps);
}

Model<float> fit(Model<float> model, std::span<const float> inputs, std::span<const int> labels,
                 const TrainConfig& config, const EpochCallback& on_epoch) {
  Trainer trainer(std::move(model), config);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double loss = trainer.train_epoch(inputs, labels);
    if (on_epoch) on_epoch(epoch, loss);
  }
  return std::move(trainer).release();
}

}  // namespace flowglyph::cnn
