#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowglyph/cnn/model.hpp"
#include "flowglyph/rng.hpp"

namespace flowglyph::cnn {

/// Per-sample tensor shape recorded at each stage of a forward pass.
using StageShape = std::vector<std::size_t>;

/// The stage shapes a forward pass must produce for `classes` outputs:
/// 1x28x28, 32x28x28, 32x14x14, 64x14x14, 64x7x7, 3136, 1024, K.
std::vector<StageShape> expected_shape_chain(int classes);

template <typename Real>
struct Activations {
  std::size_t batch = 0;
  std::vector<Real> input;  // N x 1 x 28 x 28
  std::vector<Real> conv1;  // N x 32 x 28 x 28, post-ReLU
  std::vector<Real> pool1;  // N x 32 x 14 x 14
  std::vector<std::uint32_t> pool1_arg;
  std::vector<Real> conv2;  // N x 64 x 14 x 14, post-ReLU
  std::vector<Real> pool2;  // N x 3136
  std::vector<std::uint32_t> pool2_arg;
  std::vector<Real> fc1;            // N x 1024, post-ReLU
  std::vector<Real> dropout_scale;  // empty at inference, else 0 or 1/(1-rate)
  std::vector<Real> fc1_out;        // fc1 after dropout; input of fc2
  std::vector<Real> logits;         // N x K
  std::vector<double> probs;        // N x K, softmax in double
  std::vector<StageShape> shape_chain;
};

/// Inverted-dropout scale factors drawn serially from `rng`.
template <typename Real>
std::vector<Real> dropout_mask(std::size_t count, float rate, Rng& rng);

/// conv1 -> pool1 -> conv2 -> pool2 -> flatten -> fc1(ReLU) -> dropout -> fc2 -> softmax.
/// `input` holds `batch` normalized 28x28 images. Dropout runs only when
/// `train_mode` is set, and then needs `rng`.
template <typename Real>
Activations<Real> forward(const Model<Real>& model, std::span<const Real> input, std::size_t batch,
                          bool train_mode = false, Rng* rng = nullptr);

/// Mean cross-entropy of the softmax outputs against `labels`, in double.
template <typename Real>
double cross_entropy(const Activations<Real>& acts, std::span<const int> labels, int classes);

/// Gradient of the mean cross-entropy with respect to every parameter, reusing
/// the cached activations (argmax routes, ReLU gates, dropout mask).
template <typename Real>
Parameters<Real> backward(const Model<Real>& model, const Activations<Real>& acts, std::span<const int> labels);

struct Prediction {
  int label = 0;
  double probability = 0.0;
};

/// Inference-mode argmax per image; ties go to the lower class index.
std::vector<Prediction> predict(const Model<float>& model, std::span<const float> input, std::size_t batch);

extern template struct Activations<float>;
extern template struct Activations<double>;

}  // namespace flowglyph::cnn
