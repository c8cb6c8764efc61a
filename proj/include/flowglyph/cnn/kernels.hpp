#pragma once

// Batch kernels for the glyph network. Every parallel loop partitions over
// output elements and each output is reduced by exactly one thread in a fixed
// order, so results are bit-identical for any OMP_NUM_THREADS.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>

#include "flowglyph/error.hpp"

namespace flowglyph::cnn {

inline constexpr int kKernelSide = 5;
inline constexpr int kKernelTaps = kKernelSide * kKernelSide;
inline constexpr int kPad = 2;

struct ConvDims {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t side = 28;

  std::size_t plane() const { return side * side; }
  std::size_t input_size() const { return batch * in_channels * plane(); }
  std::size_t output_size() const { return batch * out_channels * plane(); }
  std::size_t kernel_size() const { return out_channels * in_channels * kKernelTaps; }
};

struct PoolDims {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t side = 28;  // input side, must be even

  std::size_t input_size() const { return batch * channels * side * side; }
  std::size_t output_size() const { return batch * channels * (side / 2) * (side / 2); }
};

struct DenseDims {
  std::size_t batch = 1;
  std::size_t inputs = 1;
  std::size_t outputs = 1;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::ShapeMismatch, what);
}

// Valid output range [lo, hi) for a tap offset of `delta` along one axis.
inline void tap_range(std::ptrdiff_t delta, std::ptrdiff_t side, std::ptrdiff_t& lo, std::ptrdiff_t& hi) {
  lo = std::max<std::ptrdiff_t>(0, -delta);
  hi = std::min<std::ptrdiff_t>(side, side - delta);
}

}  // namespace detail

/// 5x5 stride-1 cross-correlation with zero padding 2, plus bias, then ReLU.
/// Layouts: input N x Cin x S x S, kernels Cout x Cin x 5 x 5, output N x Cout x S x S.
template <typename Real>
void conv2d_same_relu(std::span<const Real> input, std::span<const Real> kernels, std::span<const Real> bias,
                      std::span<Real> output, const ConvDims& d) {
  detail::require(input.size() == d.input_size(), "conv input size");
  detail::require(kernels.size() == d.kernel_size(), "conv kernel size");
  detail::require(bias.size() == d.out_channels, "conv bias size");
  detail::require(output.size() == d.output_size(), "conv output size");
  const auto side = static_cast<std::ptrdiff_t>(d.side);
  const std::size_t plane = d.plane();
  const auto jobs = static_cast<std::ptrdiff_t>(d.batch * d.out_channels);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t n = static_cast<std::size_t>(job) / d.out_channels;
    const std::size_t co = static_cast<std::size_t>(job) % d.out_channels;
    Real* out = output.data() + static_cast<std::size_t>(job) * plane;
    std::fill(out, out + plane, bias[co]);
    for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
      const Real* in = input.data() + (n * d.in_channels + ci) * plane;
      const Real* k = kernels.data() + (co * d.in_channels + ci) * kKernelTaps;
      for (int ky = 0; ky < kKernelSide; ++ky) {
        std::ptrdiff_t y0, y1;
        detail::tap_range(ky - kPad, side, y0, y1);
        for (int kx = 0; kx < kKernelSide; ++kx) {
          const Real w = k[ky * kKernelSide + kx];
          if (w == Real(0)) continue;
          std::ptrdiff_t x0, x1;
          detail::tap_range(kx - kPad, side, x0, x1);
          const std::ptrdiff_t shift = (ky - kPad) * side + (kx - kPad);
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            Real* orow = out + y * side;
            const Real* irow = in + y * side + shift;
            for (std::ptrdiff_t x = x0; x < x1; ++x) orow[x] += w * irow[x];
          }
        }
      }
    }
    for (std::size_t i = 0; i < plane; ++i) out[i] = out[i] > Real(0) ? out[i] : Real(0);
  }
}

/// Gradients of conv2d_same_relu. `grad_output` is d(loss)/d(post-ReLU output);
/// it is gated by `output > 0` here. `grad_input` may be empty to skip it.
template <typename Real>
void conv2d_same_relu_backward(std::span<const Real> input, std::span<const Real> kernels,
                               std::span<const Real> output, std::span<const Real> grad_output,
                               std::span<Real> grad_input, std::span<Real> grad_kernels, std::span<Real> grad_bias,
                               const ConvDims& d, std::span<Real> scratch) {
  detail::require(input.size() == d.input_size() && output.size() == d.output_size(), "conv backward sizes");
  detail::require(grad_output.size() == d.output_size() && scratch.size() == d.output_size(), "conv backward grad sizes");
  detail::require(grad_kernels.size() == d.kernel_size() && grad_bias.size() == d.out_channels, "conv backward param sizes");
  detail::require(grad_input.empty() || grad_input.size() == d.input_size(), "conv backward input size");
  const auto side = static_cast<std::ptrdiff_t>(d.side);
  const std::size_t plane = d.plane();
  const auto total = static_cast<std::ptrdiff_t>(d.output_size());

  Real* gated = scratch.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < total; ++i) gated[i] = output[i] > Real(0) ? grad_output[i] : Real(0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t co_i = 0; co_i < static_cast<std::ptrdiff_t>(d.out_channels); ++co_i) {
    const auto co = static_cast<std::size_t>(co_i);
    Real* gk = grad_kernels.data() + co * d.in_channels * kKernelTaps;
    std::fill(gk, gk + d.in_channels * kKernelTaps, Real(0));
    Real gb = 0;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const Real* g = gated + (n * d.out_channels + co) * plane;
      for (std::size_t i = 0; i < plane; ++i) gb += g[i];
      for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
        const Real* in = input.data() + (n * d.in_channels + ci) * plane;
        for (int ky = 0; ky < kKernelSide; ++ky) {
          std::ptrdiff_t y0, y1;
          detail::tap_range(ky - kPad, side, y0, y1);
          for (int kx = 0; kx < kKernelSide; ++kx) {
            std::ptrdiff_t x0, x1;
            detail::tap_range(kx - kPad, side, x0, x1);
            const std::ptrdiff_t shift = (ky - kPad) * side + (kx - kPad);
            Real acc = 0;
            for (std::ptrdiff_t y = y0; y < y1; ++y) {
              const Real* grow = g + y * side;
              const Real* irow = in + y * side + shift;
              for (std::ptrdiff_t x = x0; x < x1; ++x) acc += grow[x] * irow[x];
            }
            gk[ci * kKernelTaps + static_cast<std::size_t>(ky * kKernelSide + kx)] += acc;
          }
        }
      }
    }
    grad_bias[co] = gb;
  }

  if (grad_input.empty()) return;
  const auto jobs = static_cast<std::ptrdiff_t>(d.batch * d.in_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t n = static_cast<std::size_t>(job) / d.in_channels;
    const std::size_t ci = static_cast<std::size_t>(job) % d.in_channels;
    Real* gi = grad_input.data() + static_cast<std::size_t>(job) * plane;
    std::fill(gi, gi + plane, Real(0));
    for (std::size_t co = 0; co < d.out_channels; ++co) {
      const Real* g = gated + (n * d.out_channels + co) * plane;
      const Real* k = kernels.data() + (co * d.in_channels + ci) * kKernelTaps;
      for (int ky = 0; ky < kKernelSide; ++ky) {
        std::ptrdiff_t y0, y1;
        detail::tap_range(ky - kPad, side, y0, y1);
        for (int kx = 0; kx < kKernelSide; ++kx) {
          const Real w = k[ky * kKernelSide + kx];
          std::ptrdiff_t x0, x1;
          detail::tap_range(kx - kPad, side, x0, x1);
          const std::ptrdiff_t shift = (ky - kPad) * side + (kx - kPad);
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            Real* girow = gi + y * side + shift;
            const Real* grow = g + y * side;
            for (std::ptrdiff_t x = x0; x < x1; ++x) girow[x] += w * grow[x];
          }
        }
      }
    }
  }
}

/// Non-overlapping 2x2 max pooling. `argmax` receives, per output element, the
/// winning index within its input plane (first maximum in row-major order).
template <typename Real>
void maxpool2x2(std::span<const Real> input, std::span<Real> output, std::span<std::uint32_t> argmax,
                const PoolDims& d) {
  if (d.side % 2 != 0) throw Error(ErrorKind::OddDimension, "max pool input side must be even");
  detail::require(input.size() == d.input_size(), "pool input size");
  detail::require(output.size() == d.output_size() && argmax.size() == d.output_size(), "pool output size");
  const std::size_t side = d.side;
  const std::size_t half = side / 2;
  const auto planes = static_cast<std::ptrdiff_t>(d.batch * d.channels);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const Real* in = input.data() + static_cast<std::size_t>(p) * side * side;
    Real* out = output.data() + static_cast<std::size_t>(p) * half * half;
    std::uint32_t* arg = argmax.data() + static_cast<std::size_t>(p) * half * half;
    for (std::size_t y = 0; y < half; ++y) {
      for (std::size_t x = 0; x < half; ++x) {
        std::size_t best = 2 * y * side + 2 * x;
        const std::size_t candidates[3] = {best + 1, best + side, best + side + 1};
        for (std::size_t c : candidates) {
          if (in[c] > in[best]) best = c;
        }
        out[y * half + x] = in[best];
        arg[y * half + x] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

template <typename Real>
void maxpool2x2_backward(std::span<const Real> grad_output, std::span<const std::uint32_t> argmax,
                         std::span<Real> grad_input, const PoolDims& d) {
  detail::require(grad_input.size() == d.input_size(), "pool grad input size");
  detail::require(grad_output.size() == d.output_size() && argmax.size() == d.output_size(), "pool grad output size");
  const std::size_t in_plane = d.side * d.side;
  const std::size_t out_plane = in_plane / 4;
  const auto planes = static_cast<std::ptrdiff_t>(d.batch * d.channels);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    Real* gi = grad_input.data() + static_cast<std::size_t>(p) * in_plane;
    std::fill(gi, gi + in_plane, Real(0));
    const Real* go = grad_output.data() + static_cast<std::size_t>(p) * out_plane;
    const std::uint32_t* arg = argmax.data() + static_cast<std::size_t>(p) * out_plane;
    for (std::size_t i = 0; i < out_plane; ++i) gi[arg[i]] += go[i];
  }
}

inline constexpr std::size_t kDenseBlock = 256;

/// out[n][o] = bias[o] + sum_i in[n][i] * weights[i][o], optional ReLU.
/// Weights are inputs x outputs, row-major.
template <typename Real>
void dense(std::span<const Real> input, std::span<const Real> weights, std::span<const Real> bias,
           std::span<Real> output, const DenseDims& d, bool relu) {
  detail::require(input.size() == d.batch * d.inputs, "dense input size");
  detail::require(weights.size() == d.inputs * d.outputs && bias.size() == d.outputs, "dense parameter size");
  detail::require(output.size() == d.batch * d.outputs, "dense output size");
  const auto blocks = static_cast<std::ptrdiff_t>((d.outputs + kDenseBlock - 1) / kDenseBlock);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::size_t o0 = static_cast<std::size_t>(b) * kDenseBlock;
    const std::size_t o1 = std::min(d.outputs, o0 + kDenseBlock);
    for (std::size_t n = 0; n < d.batch; ++n) {
      std::copy(bias.begin() + static_cast<std::ptrdiff_t>(o0), bias.begin() + static_cast<std::ptrdiff_t>(o1),
                output.begin() + static_cast<std::ptrdiff_t>(n * d.outputs + o0));
    }
    for (std::size_t i = 0; i < d.inputs; ++i) {
      const Real* wrow = weights.data() + i * d.outputs;
      for (std::size_t n = 0; n < d.batch; ++n) {
        const Real xi = input[n * d.inputs + i];
        if (xi == Real(0)) continue;
        Real* out = output.data() + n * d.outputs;
        for (std::size_t o = o0; o < o1; ++o) out[o] += xi * wrow[o];
      }
    }
    if (relu) {
      for (std::size_t n = 0; n < d.batch; ++n) {
        Real* out = output.data() + n * d.outputs;
        for (std::size_t o = o0; o < o1; ++o) out[o] = out[o] > Real(0) ? out[o] : Real(0);
      }
    }
  }
}

template <typename Real>
void dense_backward_params(std::span<const Real> input, std::span<const Real> grad_output,
                           std::span<Real> grad_weights, std::span<Real> grad_bias, const DenseDims& d) {
  detail::require(input.size() == d.batch * d.inputs && grad_output.size() == d.batch * d.outputs,
                  "dense backward sizes");
  detail::require(grad_weights.size() == d.inputs * d.outputs && grad_bias.size() == d.outputs,
                  "dense backward parameter sizes");
  const auto rows = static_cast<std::ptrdiff_t>(d.inputs);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i_s = 0; i_s < rows; ++i_s) {
    const auto i = static_cast<std::size_t>(i_s);
    Real* gw = grad_weights.data() + i * d.outputs;
    std::fill(gw, gw + d.outputs, Real(0));
    for (std::size_t n = 0; n < d.batch; ++n) {
      const Real xi = input[n * d.inputs + i];
      if (xi == Real(0)) continue;
      const Real* g = grad_output.data() + n * d.outputs;
      for (std::size_t o = 0; o < d.outputs; ++o) gw[o] += xi * g[o];
    }
  }
  for (std::size_t o = 0; o < d.outputs; ++o) {
    Real acc = 0;
    for (std::size_t n = 0; n < d.batch; ++n) acc += grad_output[n * d.outputs + o];
    grad_bias[o] = acc;
  }
}

template <typename Real>
void dense_backward_input(std::span<const Real> weights, std::span<const Real> grad_output,
                          std::span<Real> grad_input, const DenseDims& d) {
  detail::require(weights.size() == d.inputs * d.outputs, "dense backward weight size");
  detail::require(grad_output.size() == d.batch * d.outputs && grad_input.size() == d.batch * d.inputs,
                  "dense backward input sizes");
  const auto rows = static_cast<std::ptrdiff_t>(d.inputs);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i_s = 0; i_s < rows; ++i_s) {
    const auto i = static_cast<std::size_t>(i_s);
    const Real* wrow = weights.data() + i * d.outputs;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const Real* g = grad_output.data() + n * d.outputs;
      Real acc = 0;
      for (std::size_t o = 0; o < d.outputs; ++o) acc += wrow[o] * g[o];
      grad_input[n * d.inputs + i] = acc;
    }
  }
}

}  // namespace flowglyph::cnn
