// Serial vs OpenMP kernel timings. Also confirms both paths agree bit-for-bit.
//
//   bench_kernels [threads] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evpred/kernels.hpp"
#include "evpred/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

std::vector<double> random_vec(std::size_t n, evpred::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <typename F>
double time_ms(F&& f, int repeats) {
  const auto t0 = Clock::now();
  for (int r = 0; r < repeats; ++r) f();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / repeats;
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : 4;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 20;
#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif
  namespace k = evpred::kernels;
  evpred::Rng rng(42);

  std::printf("%-14s %6s %6s %12s %12s %8s %s\n", "kernel", "in", "out", "serial_ms", "omp_ms", "speedup", "identical");
  bool all_identical = true;
  for (std::size_t dim : {64, 300, 1200}) {
    const std::size_t in = dim;
    const std::size_t out = 4 * dim;
    const auto W = random_vec(in * out, rng);
    const auto x = random_vec(in, rng);
    const auto dy = random_vec(out, rng);

    std::vector<double> y_s(out, 0.0), y_p(out, 0.0);
    const double ts = time_ms([&] { k::serial::matvec_acc(x, W, y_s); }, repeats);
    const double tp = time_ms([&] { k::parallel::matvec_acc(x, W, y_p); }, repeats);
    bool same = y_s == y_p;
    all_identical &= same;
    std::printf("%-14s %6zu %6zu %12.4f %12.4f %8.2f %s\n", "matvec_acc", in, out, ts, tp, ts / tp, same ? "yes" : "NO");

    std::vector<double> dx_s(in, 0.0), dx_p(in, 0.0);
    const double ts2 = time_ms([&] { k::serial::matvec_t_acc(W, dy, dx_s); }, repeats);
    const double tp2 = time_ms([&] { k::parallel::matvec_t_acc(W, dy, dx_p); }, repeats);
    same = dx_s == dx_p;
    all_identical &= same;
    std::printf("%-14s %6zu %6zu %12.4f %12.4f %8.2f %s\n", "matvec_t_acc", in, out, ts2, tp2, ts2 / tp2, same ? "yes" : "NO");

    std::vector<double> dW_s(in * out, 0.0), dW_p(in * out, 0.0);
    const double ts3 = time_ms([&] { k::serial::outer_acc(x, dy, dW_s); }, repeats);
    const double tp3 = time_ms([&] { k::parallel::outer_acc(x, dy, dW_p); }, repeats);
    same = dW_s == dW_p;
    all_identical &= same;
    std::printf("%-14s %6zu %6zu %12.4f %12.4f %8.2f %s\n", "outer_acc", in, out, ts3, tp3, ts3 / tp3, same ? "yes" : "NO");

    const std::size_t rows = 64;
    const auto X = random_vec(rows * in, rng);
    const auto b = random_vec(out, rng);
    std::vector<double> Y_s(rows * out), Y_p(rows * out);
    const double ts4 = time_ms([&] { k::serial::affine_rows(X, rows, W, b, Y_s); }, repeats);
    const double tp4 = time_ms([&] { k::parallel::affine_rows(X, rows, W, b, Y_p); }, repeats);
    same = Y_s == Y_p;
    all_identical &= same;
    std::printf("%-14s %6zu %6zu %12.4f %12.4f %8.2f %s\n", "affine_rows64", in, out, ts4, tp4, ts4 / tp4, same ? "yes" : "NO");
  }
  return all_identical ? 0 : 1;
}
