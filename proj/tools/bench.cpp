// Times the OpenMP kernels against their serial references, then a small
// end-to-end training step. Serial and parallel paths are bit-identical by
// construction; this reports the speed difference only.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sld/adam.hpp"
#include "sld/autoencoder.hpp"
#include "sld/kernels.hpp"
#include "sld/rng.hpp"

using namespace sld;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<Real> random_buf(size_t n, Rng& rng) {
  std::vector<Real> v(n);
  for (auto& x : v) x = (Real)rng.normal();
  return v;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp: %d threads\n", omp_get_max_threads());
#else
  std::printf("openmp: unavailable, serial only\n");
#endif

  Rng rng(7, "bench");
  std::printf("%-26s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");

  for (int dim : {64, 128, 256, 512}) {
    auto a = random_buf((size_t)dim * dim, rng);
    auto b = random_buf((size_t)dim * dim, rng);
    std::vector<Real> c((size_t)dim * dim);
    const int reps = dim <= 128 ? 50 : 10;
    const double ts = time_ms([&] { kernels::matmul_serial(a.data(), b.data(), c.data(), dim, dim, dim); }, reps);
    const double tp = time_ms([&] { kernels::matmul_omp(a.data(), b.data(), c.data(), dim, dim, dim); }, reps);
    std::printf("matmul %4dx%-4d            %10.3f %10.3f %7.2fx\n", dim, dim, ts, tp, ts / tp);
  }

  {
    const int r = 4096, c = 256;
    auto x = random_buf((size_t)r * c, rng);
    std::vector<Real> y((size_t)r * c);
    const double ts = time_ms([&] { kernels::softmax_rows_serial(x.data(), nullptr, y.data(), r, c); }, 20);
    const double tp = time_ms([&] { kernels::softmax_rows_omp(x.data(), nullptr, y.data(), r, c); }, 20);
    std::printf("softmax 4096x256           %10.3f %10.3f %7.2fx\n", ts, tp, ts / tp);
  }

  {
    const int r = 4096, c = 256;
    auto x = random_buf((size_t)r * c, rng);
    std::vector<Real> gain(c, 1), bias(c, 0), y((size_t)r * c), mu(r), is(r);
    const double ts = time_ms(
        [&] { kernels::layer_norm_rows_serial(x.data(), gain.data(), bias.data(), y.data(), mu.data(), is.data(), r, c, (Real)1e-5); }, 20);
    const double tp = time_ms(
        [&] { kernels::layer_norm_rows_omp(x.data(), gain.data(), bias.data(), y.data(), mu.data(), is.data(), r, c, (Real)1e-5); }, 20);
    std::printf("layer_norm 4096x256        %10.3f %10.3f %7.2fx\n", ts, tp, ts / tp);
  }

  // One representation-training step on a toy model, dispatched kernels.
  {
    Vocab vocab = Vocab::build_from_counts(
        {{"the", 5}, {"cat", 4}, {"sat", 3}, {"mat", 3}, {"dog", 2}, {"ran", 2}}, 1);
    AutoencoderConfig cfg;
    cfg.vocab_size = vocab.size();
    Autoencoder m = make_autoencoder(cfg, Rng(1, "bench/init"));
    std::vector<std::string> segments = {"the cat sat", "the dog ran", "the cat ran", "the dog sat"};
    AdamState opt;
    ReprLossConfig lc;
    lc.lambda1 = 0;  // no triples in the benchmark corpus
    const double t = time_ms(
        [&] {
          Rng r(9, "bench/epoch");
          train_representation_epoch(m, segments, TripleSource{}, lc, opt, r, vocab, 4);
        },
        5);
    std::printf("train step (4 segments)    %10.3f ms\n", t);
  }
  return 0;
}
