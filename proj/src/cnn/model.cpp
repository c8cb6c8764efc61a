#include "flowglyph/cnn/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "flowglyph/cnn/kernels.hpp"
#include "flowglyph/error.hpp"
#include "flowglyph/packet_ingest.hpp"
#include "flowglyph/rng.hpp"

namespace flowglyph::cnn {

namespace {

constexpr char kModelMagic[4] = {'C', 'N', 'N', '1'};
constexpr std::uint8_t kModelVersion = 1;
constexpr std::size_t kModelHeaderLen = 4 + 1 + 2 + 4;

void put_f32(std::vector<std::uint8_t>& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                             static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  return std::bit_cast<float>(bits);
}

template <typename Real>
void glorot_fill(std::span<Real> w, double fan_in, double fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / (fan_in + fan_out));
  for (Real& v : w) v = static_cast<Real>(rng.uniform(-s, s));
}

}  // namespace

template <typename Real>
Parameters<Real> Parameters<Real>::zeros(int classes) {
  using namespace arch;
  const auto k = static_cast<std::size_t>(classes);
  Parameters p;
  p.conv1_w.assign(kConv1Channels * kKernelTaps, Real(0));
  p.conv1_b.assign(kConv1Channels, Real(0));
  p.conv2_w.assign(kConv2Channels * kConv1Channels * kKernelTaps, Real(0));
  p.conv2_b.assign(kConv2Channels, Real(0));
  p.fc1_w.assign(kFlat * kHidden, Real(0));
  p.fc1_b.assign(kHidden, Real(0));
  p.fc2_w.assign(kHidden * k, Real(0));
  p.fc2_b.assign(k, Real(0));
  return p;
}

template <typename Real>
Model<Real> Model<Real>::zeros(int classes, float dropout_rate) {
  Model m{classes, dropout_rate, Parameters<Real>::zeros(classes)};
  m.validate();
  return m;
}

template <typename Real>
Model<Real> Model<Real>::initialized(int classes, float dropout_rate, std::uint64_t seed) {
  using namespace arch;
  Model m = zeros(classes, dropout_rate);
  Rng rng(seed);
  glorot_fill<Real>(m.params.conv1_w, 1.0 * kKernelTaps, double(kConv1Channels) * kKernelTaps, rng);
  glorot_fill<Real>(m.params.conv2_w, double(kConv1Channels) * kKernelTaps, double(kConv2Channels) * kKernelTaps, rng);
  glorot_fill<Real>(m.params.fc1_w, double(kFlat), double(kHidden), rng);
  glorot_fill<Real>(m.params.fc2_w, double(kHidden), double(classes), rng);
  return m;
}

template <typename Real>
void Model<Real>::validate() const {
  if (classes < 2 || classes > 65535) {
    throw Error(ErrorKind::InvalidArgument, "class count must be in [2, 65535], got " + std::to_string(classes));
  }
  if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) {
    throw Error(ErrorKind::InvalidArgument, "dropout rate must be in [0, 1)");
  }
  const Parameters<Real> expect = Parameters<Real>::zeros(classes);
  const auto have = params.tensors();
  const auto want = expect.tensors();
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    if (have[t].size() != want[t].size()) {
      throw Error(ErrorKind::ShapeMismatch, std::string(kTensorNames[t]) + " has wrong size");
    }
    if (!std::all_of(have[t].begin(), have[t].end(), [](Real v) { return std::isfinite(v); })) {
      throw Error(ErrorKind::NonFiniteActivation, std::string(kTensorNames[t]) + " holds a non-finite weight");
    }
  }
}

std::vector<std::uint8_t> save_model(const Model<float>& model) {
  model.validate();
  std::vector<std::uint8_t> out(std::begin(kModelMagic), std::end(kModelMagic));
  out.push_back(kModelVersion);
  out.push_back(static_cast<std::uint8_t>(model.classes));
  out.push_back(static_cast<std::uint8_t>(model.classes >> 8));
  put_f32(out, model.dropout_rate);
  for (const auto& t : model.params.tensors()) {
    for (float v : t) put_f32(out, v);
  }
  return out;
}

Model<float> load_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kModelMagic), std::end(kModelMagic), bytes.begin())) {
    throw Error(ErrorKind::BadMagic, "model file does not start with CNN1");
  }
  if (bytes.size() < kModelHeaderLen) throw Error(ErrorKind::SizeMismatch, "model header truncated");
  if (bytes[4] != kModelVersion) throw Error(ErrorKind::BadMagic, "unsupported model version");
  Model<float> m;
  m.classes = bytes[5] | bytes[6] << 8;
  m.dropout_rate = get_f32(bytes.data() + 7);
  if (m.classes < 2) throw Error(ErrorKind::SizeMismatch, "model declares fewer than 2 classes");
  m.params = Parameters<float>::zeros(m.classes);

  std::size_t expected = kModelHeaderLen;
  for (const auto& t : m.params.tensors()) expected += 4 * t.size();
  if (bytes.size() != expected) {
    throw Error(ErrorKind::SizeMismatch,
                "model file has " + std::to_string(bytes.size()) + " bytes, expected " + std::to_string(expected));
  }
  const std::uint8_t* p = bytes.data() + kModelHeaderLen;
  for (auto t : m.params.tensors()) {
    for (float& v : t) {
      v = get_f32(p);
      p += 4;
    }
  }
  m.validate();
  return m;
}

void save_model_file(const std::string& path, const Model<float>& model) {
  write_file_bytes(path, save_model(model));
}

Model<float> load_model_file(const std::string& path) { return load_model(read_file_bytes(path)); }

template struct Parameters<float>;
template struct Parameters<double>;
template struct Model<float>;
template struct Model<double>;

}  // namespace flowglyph::cnn
