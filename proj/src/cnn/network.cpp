#include "flowglyph/cnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowglyph/cnn/kernels.hpp"
#include "flowglyph/error.hpp"

namespace flowglyph::cnn {

namespace {

using namespace arch;

ConvDims conv1_dims(std::size_t n) { return {n, 1, kConv1Channels, kInputSide}; }
ConvDims conv2_dims(std::size_t n) { return {n, kConv1Channels, kConv2Channels, kPool1Side}; }
PoolDims pool1_dims(std::size_t n) { return {n, kConv1Channels, kInputSide}; }
PoolDims pool2_dims(std::size_t n) { return {n, kConv2Channels, kPool1Side}; }
DenseDims fc1_dims(std::size_t n) { return {n, kFlat, kHidden}; }
DenseDims fc2_dims(std::size_t n, int classes) { return {n, kHidden, static_cast<std::size_t>(classes)}; }

template <typename Real>
void record_stage(Activations<Real>& acts, const std::vector<StageShape>& expected, const std::vector<Real>& buffer,
                  StageShape shape) {
  std::size_t per_sample = 1;
  for (std::size_t d : shape) per_sample *= d;
  const std::size_t stage = acts.shape_chain.size();
  if (buffer.size() != per_sample * acts.batch || stage >= expected.size() || shape != expected[stage]) {
    throw Error(ErrorKind::ShapeMismatch, "stage " + std::to_string(stage) + " deviates from the architecture (" +
                                              std::to_string(buffer.size()) + " values)");
  }
  acts.shape_chain.push_back(std::move(shape));
}

template <typename Real>
void require_finite(std::span<const Real> values, const char* stage) {
  for (Real v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteActivation, std::string("non-finite value in ") + stage);
  }
}

}  // namespace

std::vector<StageShape> expected_shape_chain(int classes) {
  return {{1, kInputSide, kInputSide},
          {kConv1Channels, kInputSide, kInputSide},
          {kConv1Channels, kPool1Side, kPool1Side},
          {kConv2Channels, kPool1Side, kPool1Side},
          {kConv2Channels, kPool2Side, kPool2Side},
          {kFlat},
          {kHidden},
          {static_cast<std::size_t>(classes)}};
}

template <typename Real>
std::vector<Real> dropout_mask(std::size_t count, float rate, Rng& rng) {
  std::vector<Real> mask(count);
  const Real keep_scale = Real(1) / (Real(1) - static_cast<Real>(rate));
  for (Real& m : mask) m = rng.uniform01() >= static_cast<double>(rate) ? keep_scale : Real(0);
  return mask;
}

template <typename Real>
Activations<Real> forward(const Model<Real>& model, std::span<const Real> input, std::size_t batch, bool train_mode,
                          Rng* rng) {
  if (input.size() != batch * kInputSize) {
    throw Error(ErrorKind::ShapeMismatch, "forward expects " + std::to_string(batch) + " x 784 inputs, got " +
                                              std::to_string(input.size()));
  }
  if (train_mode && model.dropout_rate > 0.0f && rng == nullptr) {
    throw Error(ErrorKind::InvalidArgument, "training-mode forward needs a dropout generator");
  }
  require_finite(input, "input");
  const auto& p = model.params;
  const auto k = static_cast<std::size_t>(model.classes);

  Activations<Real> a;
  a.batch = batch;
  const auto chain = expected_shape_chain(model.classes);
  a.input.assign(input.begin(), input.end());
  record_stage(a, chain, a.input, {1, kInputSide, kInputSide});

  a.conv1.resize(conv1_dims(batch).output_size());
  conv2d_same_relu<Real>(a.input, p.conv1_w, p.conv1_b, a.conv1, conv1_dims(batch));
  record_stage(a, chain, a.conv1, {kConv1Channels, kInputSide, kInputSide});

  a.pool1.resize(pool1_dims(batch).output_size());
  a.pool1_arg.resize(a.pool1.size());
  maxpool2x2<Real>(a.conv1, a.pool1, a.pool1_arg, pool1_dims(batch));
  record_stage(a, chain, a.pool1, {kConv1Channels, kPool1Side, kPool1Side});

  a.conv2.resize(conv2_dims(batch).output_size());
  conv2d_same_relu<Real>(a.pool1, p.conv2_w, p.conv2_b, a.conv2, conv2_dims(batch));
  record_stage(a, chain, a.conv2, {kConv2Channels, kPool1Side, kPool1Side});

  a.pool2.resize(pool2_dims(batch).output_size());
  a.pool2_arg.resize(a.pool2.size());
  maxpool2x2<Real>(a.conv2, a.pool2, a.pool2_arg, pool2_dims(batch));
  record_stage(a, chain, a.pool2, {kConv2Channels, kPool2Side, kPool2Side});
  // Flatten is a reinterpretation of the channel-major pool2 buffer.
  record_stage(a, chain, a.pool2, {kFlat});

  a.fc1.resize(batch * kHidden);
  dense<Real>(a.pool2, p.fc1_w, p.fc1_b, a.fc1, fc1_dims(batch), true);
  record_stage(a, chain, a.fc1, {kHidden});

  a.fc1_out = a.fc1;
  a.logits.resize(batch * k);
  if (train_mode && model.dropout_rate > 0.0f) {
    a.dropout_scale = dropout_mask<Real>(a.fc1.size(), model.dropout_rate, *rng);
    for (std::size_t i = 0; i < a.fc1_out.size(); ++i) a.fc1_out[i] *= a.dropout_scale[i];
  }

  dense<Real>(a.fc1_out, p.fc2_w, p.fc2_b, a.logits, fc2_dims(batch, model.classes), false);
  record_stage(a, chain, a.logits, {k});
  require_finite<Real>(a.logits, "logits");

  a.probs.resize(batch * k);
  for (std::size_t n = 0; n < batch; ++n) {
    const Real* l = a.logits.data() + n * k;
    double* pr = a.probs.data() + n * k;
    const double m = static_cast<double>(*std::max_element(l, l + k));
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += pr[c] = std::exp(static_cast<double>(l[c]) - m);
    for (std::size_t c = 0; c < k; ++c) pr[c] /= sum;
  }
  return a;
}

template <typename Real>
double cross_entropy(const Activations<Real>& acts, std::span<const int> labels, int classes) {
  if (labels.size() != acts.batch) throw Error(ErrorKind::ShapeMismatch, "one label per sample required");
  const auto k = static_cast<std::size_t>(classes);
  double total = 0.0;
  for (std::size_t n = 0; n < acts.batch; ++n) {
    const Real* l = acts.logits.data() + n * k;
    const double m = static_cast<double>(*std::max_element(l, l + k));
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(static_cast<double>(l[c]) - m);
    total += m + std::log(sum) - static_cast<double>(l[labels[n]]);
  }
  return acts.batch == 0 ? 0.0 : total / static_cast<double>(acts.batch);
}

template <typename Real>
Parameters<Real> backward(const Model<Real>& model, const Activations<Real>& a, std::span<const int> labels) {
  const std::size_t batch = a.batch;
  const auto k = static_cast<std::size_t>(model.classes);
  if (labels.size() != batch) throw Error(ErrorKind::ShapeMismatch, "one label per sample required");
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw Error(ErrorKind::ShapeMismatch, "label " + std::to_string(label) + " outside [0, K)");
    }
  }
  const auto& p = model.params;
  Parameters<Real> g = Parameters<Real>::zeros(model.classes);

  // d(mean CE)/d(logits) = (softmax - onehot) / N
  std::vector<Real> grad_logits(batch * k);
  const double inv_n = 1.0 / static_cast<double>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < k; ++c) {
      const double target = static_cast<std::size_t>(labels[n]) == c ? 1.0 : 0.0;
      grad_logits[n * k + c] = static_cast<Real>((a.probs[n * k + c] - target) * inv_n);
    }
  }

  dense_backward_params<Real>(a.fc1_out, grad_logits, g.fc2_w, g.fc2_b, fc2_dims(batch, model.classes));
  std::vector<Real> grad_hidden(batch * kHidden);
  dense_backward_input<Real>(p.fc2_w, grad_logits, grad_hidden, fc2_dims(batch, model.classes));
  for (std::size_t i = 0; i < grad_hidden.size(); ++i) {
    if (!a.dropout_scale.empty()) grad_hidden[i] *= a.dropout_scale[i];
    if (!(a.fc1[i] > Real(0))) grad_hidden[i] = Real(0);
  }

  dense_backward_params<Real>(a.pool2, grad_hidden, g.fc1_w, g.fc1_b, fc1_dims(batch));
  std::vector<Real> grad_pool2(batch * kFlat);
  dense_backward_input<Real>(p.fc1_w, grad_hidden, grad_pool2, fc1_dims(batch));

  std::vector<Real> grad_conv2(a.conv2.size());
  maxpool2x2_backward<Real>(grad_pool2, a.pool2_arg, grad_conv2, pool2_dims(batch));
  std::vector<Real> grad_pool1(a.pool1.size());
  std::vector<Real> scratch(a.conv2.size());
  conv2d_same_relu_backward<Real>(a.pool1, p.conv2_w, a.conv2, grad_conv2, grad_pool1, g.conv2_w, g.conv2_b,
                                  conv2_dims(batch), scratch);

  std::vector<Real> grad_conv1(a.conv1.size());
  maxpool2x2_backward<Real>(grad_pool1, a.pool1_arg, grad_conv1, pool1_dims(batch));
  scratch.assign(a.conv1.size(), Real(0));
  conv2d_same_relu_backward<Real>(a.input, p.conv1_w, a.conv1, grad_conv1, {}, g.conv1_w, g.conv1_b,
                                  conv1_dims(batch), scratch);
  return g;
}

std::vector<Prediction> predict(const Model<float>& model, std::span<const float> input, std::size_t batch) {
  constexpr std::size_t kChunk = 64;
  const auto k = static_cast<std::size_t>(model.classes);
  std::vector<Prediction> out;
  out.reserve(batch);
  for (std::size_t start = 0; start < batch; start += kChunk) {
    const std::size_t n = std::min(kChunk, batch - start);
    const auto acts = forward<float>(model, input.subspan(start * kInputSize, n * kInputSize), n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* pr = acts.probs.data() + i * k;
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (pr[c] > pr[best]) best = c;
      }
      out.push_back(Prediction{static_cast<int>(best), pr[best]});
    }
  }
  return out;
}

template struct Activations<float>;
template struct Activations<double>;
template std::vector<float> dropout_mask<float>(std::size_t, float, Rng&);
template std::vector<double> dropout_mask<double>(std::size_t, float, Rng&);
template Activations<float> forward<float>(const Model<float>&, std::span<const float>, std::size_t, bool, Rng*);
template Activations<double> forward<double>(const Model<double>&, std::span<const double>, std::size_t, bool, Rng*);
template double cross_entropy<float>(const Activations<float>&, std::span<const int>, int);
template double cross_entropy<double>(const Activations<double>&, std::span<const int>, int);
template Parameters<float> backward<float>(const Model<float>&, const Activations<float>&, std::span<const int>);
template Parameters<double> backward<double>(const Model<double>&, const Activations<double>&, std::span<const int>);

}  // namespace flowglyph::cnn
