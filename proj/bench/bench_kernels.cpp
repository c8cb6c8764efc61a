// OpenMP kernels versus the serial reference loops, on the layer shapes the
// glyph network actually runs. The trailing argument of the parallel variants
// is the OpenMP thread count.
#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "flowglyph/cnn/kernels.hpp"
#include "flowglyph/cnn/model.hpp"
#include "flowglyph/cnn/network.hpp"
#include "flowglyph/cnn/reference.hpp"
#include "flowglyph/rng.hpp"

namespace cnn = flowglyph::cnn;
using flowglyph::Rng;

namespace {

constexpr std::size_t kBatch = 32;

std::vector<float> random_floats(std::size_t n, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

cnn::ConvDims conv_dims(int layer) {
  return layer == 1 ? cnn::ConvDims{kBatch, 1, 32, 28} : cnn::ConvDims{kBatch, 32, 64, 14};
}

void set_threads(benchmark::State& state, int index) { omp_set_num_threads(static_cast<int>(state.range(index))); }

void BM_ConvParallel(benchmark::State& state) {
  set_threads(state, 1);
  const auto d = conv_dims(static_cast<int>(state.range(0)));
  const auto in = random_floats(d.input_size(), 1), k = random_floats(d.kernel_size(), 2, -0.2f, 0.2f);
  const std::vector<float> b(d.out_channels, 0.01f);
  std::vector<float> out(d.output_size());
  for (auto _ : state) {
    cnn::conv2d_same_relu<float>(in, k, b, out, d);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_ConvReference(benchmark::State& state) {
  const auto d = conv_dims(static_cast<int>(state.range(0)));
  const auto in = random_floats(d.input_size(), 1), k = random_floats(d.kernel_size(), 2, -0.2f, 0.2f);
  const std::vector<float> b(d.out_channels, 0.01f);
  for (auto _ : state) {
    auto out = cnn::reference::conv2d_same_relu<float>(in, k, b, d);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_ConvBackwardParallel(benchmark::State& state) {
  set_threads(state, 1);
  const auto d = conv_dims(static_cast<int>(state.range(0)));
  const auto in = random_floats(d.input_size(), 1), k = random_floats(d.kernel_size(), 2, -0.2f, 0.2f);
  const std::vector<float> b(d.out_channels, 0.01f);
  std::vector<float> out(d.output_size());
  cnn::conv2d_same_relu<float>(in, k, b, out, d);
  const auto go = random_floats(d.output_size(), 3);
  std::vector<float> gi(d.input_size()), gk(d.kernel_size()), gb(d.out_channels), scratch(d.output_size());
  for (auto _ : state) {
    cnn::conv2d_same_relu_backward<float>(in, k, out, go, gi, gk, gb, d, scratch);
    benchmark::DoNotOptimize(gk.data());
  }
}

void BM_ConvBackwardReference(benchmark::State& state) {
  const auto d = conv_dims(static_cast<int>(state.range(0)));
  const auto in = random_floats(d.input_size(), 1), k = random_floats(d.kernel_size(), 2, -0.2f, 0.2f);
  const std::vector<float> b(d.out_channels, 0.01f);
  const auto out = cnn::reference::conv2d_same_relu<float>(in, k, b, d);
  const auto go = random_floats(d.output_size(), 3);
  for (auto _ : state) {
    auto g = cnn::reference::conv2d_same_relu_backward<float>(in, k, out, go, d);
    benchmark::DoNotOptimize(g.kernels.data());
  }
}

void BM_PoolParallel(benchmark::State& state) {
  set_threads(state, 0);
  const cnn::PoolDims d{kBatch, 32, 28};
  const auto in = random_floats(d.input_size(), 4);
  std::vector<float> out(d.output_size());
  std::vector<std::uint32_t> arg(d.output_size());
  for (auto _ : state) {
    cnn::maxpool2x2<float>(in, out, arg, d);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_PoolReference(benchmark::State& state) {
  const cnn::PoolDims d{kBatch, 32, 28};
  const auto in = random_floats(d.input_size(), 4);
  for (auto _ : state) {
    auto out = cnn::reference::maxpool2x2<float>(in, d);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_DenseParallel(benchmark::State& state) {
  set_threads(state, 0);
  const cnn::DenseDims d{kBatch, cnn::arch::kFlat, cnn::arch::kHidden};
  const auto in = random_floats(d.batch * d.inputs, 5, 0.0f, 1.0f);
  const auto w = random_floats(d.inputs * d.outputs, 6, -0.04f, 0.04f);
  const std::vector<float> b(d.outputs, 0.0f);
  std::vector<float> out(d.batch * d.outputs);
  for (auto _ : state) {
    cnn::dense<float>(in, w, b, out, d, true);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_DenseReference(benchmark::State& state) {
  const cnn::DenseDims d{kBatch, cnn::arch::kFlat, cnn::arch::kHidden};
  const auto in = random_floats(d.batch * d.inputs, 5, 0.0f, 1.0f);
  const auto w = random_floats(d.inputs * d.outputs, 6, -0.04f, 0.04f);
  const std::vector<float> b(d.outputs, 0.0f);
  for (auto _ : state) {
    auto out = cnn::reference::dense<float>(in, w, b, d, true);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_ForwardBatch(benchmark::State& state) {
  set_threads(state, 0);
  const auto model = cnn::Model<float>::initialized(2, 0.5f, 7);
  const auto in = random_floats(kBatch * cnn::arch::kInputSize, 8, 0.0f, 1.0f);
  for (auto _ : state) {
    auto acts = cnn::forward<float>(model, in, kBatch);
    benchmark::DoNotOptimize(acts.probs.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kBatch));
}

const int kMaxThreads = omp_get_num_procs();

void layer_and_threads(benchmark::internal::Benchmark* b) {
  for (int layer : {1, 2})
    for (int t = 1; t <= kMaxThreads; t *= 2) b->Args({layer, t});
}

void threads_only(benchmark::internal::Benchmark* b) {
  for (int t = 1; t <= kMaxThreads; t *= 2) b->Arg(t);
}

}  // namespace

BENCHMARK(BM_ConvParallel)->Apply(layer_and_threads)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvReference)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardParallel)->Apply(layer_and_threads)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardReference)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PoolParallel)->Apply(threads_only)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PoolReference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DenseParallel)->Apply(threads_only)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardBatch)->Apply(threads_only)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
