#pragma once

// Straight-loop serial versions of the kernels in kernels.hpp. Kept for
// oracle tests and the benchmark baseline; never used on the training path.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flowglyph/cnn/kernels.hpp"

namespace flowglyph::cnn::reference {

template <typename Real>
std::vector<Real> conv2d_same_relu(std::span<const Real> input, std::span<const Real> kernels,
                                   std::span<const Real> bias, const ConvDims& d) {
  const auto S = static_cast<std::ptrdiff_t>(d.side);
  std::vector<Real> out(d.output_size());
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t co = 0; co < d.out_channels; ++co)
      for (std::ptrdiff_t y = 0; y < S; ++y)
        for (std::ptrdiff_t x = 0; x < S; ++x) {
          Real acc = bias[co];
          for (std::size_t ci = 0; ci < d.in_channels; ++ci)
            for (std::ptrdiff_t ky = 0; ky < kKernelSide; ++ky)
              for (std::ptrdiff_t kx = 0; kx < kKernelSide; ++kx) {
                const std::ptrdiff_t iy = y + ky - kPad;
                const std::ptrdiff_t ix = x + kx - kPad;
                if (iy < 0 || iy >= S || ix < 0 || ix >= S) continue;
                acc += kernels[((co * d.in_channels + ci) * kKernelSide + static_cast<std::size_t>(ky)) * kKernelSide +
                               static_cast<std::size_t>(kx)] *
                       input[((n * d.in_channels + ci) * d.side + static_cast<std::size_t>(iy)) * d.side +
                             static_cast<std::size_t>(ix)];
              }
          out[((n * d.out_channels + co) * d.side + static_cast<std::size_t>(y)) * d.side + static_cast<std::size_t>(x)] =
              acc > Real(0) ? acc : Real(0);
        }
  return out;
}

template <typename Real>
struct ConvGrads {
  std::vector<Real> input, kernels, bias;
};

template <typename Real>
ConvGrads<Real> conv2d_same_relu_backward(std::span<const Real> input, std::span<const Real> kernels,
                                          std::span<const Real> output, std::span<const Real> grad_output,
                                          const ConvDims& d) {
  const auto S = static_cast<std::ptrdiff_t>(d.side);
  ConvGrads<Real> g{std::vector<Real>(d.input_size()), std::vector<Real>(d.kernel_size()),
                    std::vector<Real>(d.out_channels)};
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t co = 0; co < d.out_channels; ++co)
      for (std::ptrdiff_t y = 0; y < S; ++y)
        for (std::ptrdiff_t x = 0; x < S; ++x) {
          const std::size_t o = ((n * d.out_channels + co) * d.side + static_cast<std::size_t>(y)) * d.side +
                                static_cast<std::size_t>(x);
          if (!(output[o] > Real(0))) continue;
          const Real go = grad_output[o];
          g.bias[co] += go;
          for (std::size_t ci = 0; ci < d.in_channels; ++ci)
            for (std::ptrdiff_t ky = 0; ky < kKernelSide; ++ky)
              for (std::ptrdiff_t kx = 0; kx < kKernelSide; ++kx) {
                const std::ptrdiff_t iy = y + ky - kPad;
                const std::ptrdiff_t ix = x + kx - kPad;
                if (iy < 0 || iy >= S || ix < 0 || ix >= S) continue;
                const std::size_t k = ((co * d.in_channels + ci) * kKernelSide + static_cast<std::size_t>(ky)) * kKernelSide +
                                      static_cast<std::size_t>(kx);
                const std::size_t i = ((n * d.in_channels + ci) * d.side + static_cast<std::size_t>(iy)) * d.side +
                                      static_cast<std::size_t>(ix);
                g.kernels[k] += go * input[i];
                g.input[i] += go * kernels[k];
              }
        }
  return g;
}

template <typename Real>
std::vector<Real> maxpool2x2(std::span<const Real> input, const PoolDims& d) {
  const std::size_t half = d.side / 2;
  std::vector<Real> out(d.output_size());
  for (std::size_t p = 0; p < d.batch * d.channels; ++p)
    for (std::size_t y = 0; y < half; ++y)
      for (std::size_t x = 0; x < half; ++x) {
        Real best = input[(p * d.side + 2 * y) * d.side + 2 * x];
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const Real v = input[(p * d.side + 2 * y + dy) * d.side + 2 * x + dx];
            if (v > best) best = v;
          }
        out[(p * half + y) * half + x] = best;
      }
  return out;
}

template <typename Real>
std::vector<Real> dense(std::span<const Real> input, std::span<const Real> weights, std::span<const Real> bias,
                        const DenseDims& d, bool relu) {
  std::vector<Real> out(d.batch * d.outputs);
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t o = 0; o < d.outputs; ++o) {
      Real acc = bias[o];
      for (std::size_t i = 0; i < d.inputs; ++i) acc += input[n * d.inputs + i] * weights[i * d.outputs + o];
      out[n * d.outputs + o] = relu && !(acc > Real(0)) ? Real(0) : acc;
    }
  return out;
}

}  // namespace flowglyph::cnn::reference
