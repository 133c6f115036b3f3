// Compares the OpenMP kernels against their serial references, and measures
// end-to-end encoder throughput at 1..N threads. The parallel kernels must
// also be bit-identical to the serial ones; this binary checks that on every
// benchmarked shape.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qt/encoder.hpp"
#include "qt/mat.hpp"
#include "qt/objective.hpp"

using namespace qt;

namespace {

double time_secs(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / reps;
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void bench_matmul(int n, int reps) {
  Rng rng(1);
  Mat<float> a = init<float>(n, n, InitScheme::kUniform, rng, -1, 1);
  Mat<float> b = init<float>(n, n, InitScheme::kUniform, rng, -1, 1);

  const double serial = time_secs([&] { serial::matmul(a, b); }, reps);
  const double parallel = time_secs([&] { matmul(a, b); }, reps);
  const bool exact = matmul(a, b).data == serial::matmul(a, b).data;

  const double flops = 2.0 * n * n * n;
  std::printf("matmul     %4dx%-4d  serial %8.2f ms (%6.2f GF/s)  omp %8.2f ms (%6.2f GF/s)  "
              "speedup %.2fx  bit-equal %s\n",
              n, n, serial * 1e3, flops / serial * 1e-9, parallel * 1e3, flops / parallel * 1e-9,
              serial / parallel, exact ? "yes" : "NO");
}

void bench_scores(int b, int d, int reps) {
  Rng rng(2);
  Mat<float> f = init<float>(b, d, InitScheme::kUniform, rng, -1, 1);
  Mat<float> g = init<float>(b, d, InitScheme::kUniform, rng, -1, 1);
  const double serial = time_secs([&] { serial::matmul_nt(f, g); }, reps);
  const double parallel = time_secs([&] { matmul_nt(f, g); }, reps);
  const bool exact = matmul_nt(f, g).data == serial::matmul_nt(f, g).data;
  std::printf("score F*G^T %3dx%-4d  serial %8.2f ms              omp %8.2f ms              "
              "speedup %.2fx  bit-equal %s\n",
              b, d, serial * 1e3, parallel * 1e3, serial / parallel, exact ? "yes" : "NO");
}

void bench_gru(int batch, int steps, int dim, int hidden, int reps) {
  Rng rng(3);
  const int vocab = 1000;
  GruParams<float> params = init_gru_params<float>(vocab, dim, hidden, rng);

  std::vector<std::vector<std::int32_t>> sents;
  std::vector<std::int64_t> idx;
  for (int i = 0; i < batch; ++i) {
    std::vector<std::int32_t> s;
    for (int t = 0; t < steps; ++t)
      s.push_back(2 + static_cast<std::int32_t>(rng.next_below(vocab - 2)));
    sents.push_back(std::move(s));
    idx.push_back(i);
  }
  const Minibatch mb = make_minibatch(sents, idx);
  Mat<float> d_out = init<float>(batch, hidden, InitScheme::kUniform, rng, -1, 1);

  auto run = [&] {
    GruCache<float> cache;
    gru_forward(params, mb, Direction::kForward, &cache);
    gru_backward(params, cache, d_out);
  };

  std::printf("gru fwd+bwd B=%d T=%d d=%d H=%d\n", batch, steps, dim, hidden);
  const int hw = max_threads();
  set_threads(1);
  const double t1 = time_secs(run, reps);
  std::printf("  1 thread : %8.2f ms  (%.0f sents/s)\n", t1 * 1e3, batch / t1);
  if (hw > 1) {
    set_threads(hw);
    const double tn = time_secs(run, reps);
    std::printf("  %d threads: %8.2f ms  (%.0f sents/s)  speedup %.2fx\n", hw, tn * 1e3,
                batch / tn, t1 / tn);
  }
  set_threads(hw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel benchmark: serial reference vs OpenMP"};
  int reps = 5;
  int gru_batch = 64, gru_steps = 20, gru_dim = 128, gru_hidden = 128;
  std::vector<int> sizes{128, 256, 512};
  app.add_option("--reps", reps, "Repetitions per measurement");
  app.add_option("--sizes", sizes, "Square matmul sizes")->delimiter(',');
  app.add_option("--gru-batch", gru_batch, "GRU benchmark batch size");
  app.add_option("--gru-steps", gru_steps, "GRU benchmark timesteps");
  app.add_option("--gru-dim", gru_dim, "GRU embedding dim");
  app.add_option("--gru-hidden", gru_hidden, "GRU hidden dim");
  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d\n\n", max_threads());
#else
  std::printf("OpenMP disabled in this build\n\n");
#endif

  for (int n : sizes) bench_matmul(n, reps);
  std::printf("\n");
  bench_scores(400, 1200, reps);
  std::printf("\n");
  bench_gru(gru_batch, gru_steps, gru_dim, gru_hidden, reps);
  return 0;
}
