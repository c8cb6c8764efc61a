#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowglyph::cnn {

namespace arch {
inline constexpr std::size_t kInputSide = 28;
inline constexpr std::size_t kConv1Channels = 32;
inline constexpr std::size_t kPool1Side = 14;
inline constexpr std::size_t kConv2Channels = 64;
inline constexpr std::size_t kPool2Side = 7;
inline constexpr std::size_t kFlat = kConv2Channels * kPool2Side * kPool2Side;  // 3136
inline constexpr std::size_t kHidden = 1024;
inline constexpr std::size_t kInputSize = kInputSide * kInputSide;
inline constexpr int kDefaultClasses = 2;
inline constexpr float kDefaultDropout = 0.5f;
}  // namespace arch

inline constexpr std::size_t kTensorCount = 8;
inline constexpr std::array<std::string_view, kTensorCount> kTensorNames = {
    "conv1_kernels", "conv1_biases", "conv2_kernels", "conv2_biases",
    "fc1_weights",   "fc1_biases",   "fc2_weights",   "fc2_biases"};

/// Learnable tensors in declaration (and file) order. Also used as the
/// gradient and momentum container.
template <typename Real>
struct Parameters {
  std::vector<Real> conv1_w;  // 32 x 1 x 5 x 5
  std::vector<Real> conv1_b;  // 32
  std::vector<Real> conv2_w;  // 64 x 32 x 5 x 5
  std::vector<Real> conv2_b;  // 64
  std::vector<Real> fc1_w;    // 3136 x 1024, row-major
  std::vector<Real> fc1_b;    // 1024
  std::vector<Real> fc2_w;    // 1024 x K, row-major
  std::vector<Real> fc2_b;    // K

  static Parameters zeros(int classes);

  std::array<std::span<Real>, kTensorCount> tensors() {
    return {conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b};
  }
  std::array<std::span<const Real>, kTensorCount> tensors() const {
    return {conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b};
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

template <typename Real>
struct Model {
  int classes = arch::kDefaultClasses;
  float dropout_rate = arch::kDefaultDropout;
  Parameters<Real> params;

  /// Glorot-uniform weights, zero biases, drawn from `seed`.
  static Model initialized(int classes, float dropout_rate, std::uint64_t seed);
  static Model zeros(int classes, float dropout_rate);

  void validate() const;

  friend bool operator==(const Model&, const Model&) = default;
};

template <typename To, typename From>
Model<To> model_cast(const Model<From>& m) {
  Model<To> out{m.classes, m.dropout_rate, Parameters<To>::zeros(m.classes)};
  auto dst = out.params.tensors();
  const auto src = m.params.tensors();
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    for (std::size_t i = 0; i < src[t].size(); ++i) dst[t][i] = static_cast<To>(src[t][i]);
  }
  return out;
}

/// "CNN1" | version u8 | K u16le | dropout f32le | tensors as f32le.
std::vector<std::uint8_t> save_model(const Model<float>& model);
Model<float> load_model(std::span<const std::uint8_t> bytes);
void save_model_file(const std::string& path, const Model<float>& model);
Model<float> load_model_file(const std::string& path);

extern template struct Parameters<float>;
extern template struct Parameters<double>;
extern template struct Model<float>;
extern template struct Model<double>;

}  // namespace flowglyph::cnn
