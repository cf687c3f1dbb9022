#include "evpred/kernels.hpp"

#include <algorithm>
#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace evpred::kernels {

namespace serial {

void matvec_acc(std::span<const double> x, std::span<const double> W, std::span<double> y) {
  const std::size_t in = x.size();
  const std::size_t out = y.size();
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* row = W.data() + i * out;
    for (std::size_t j = 0; j < out; ++j) y[j] += xi * row[j];
  }
}

void matvec_t_acc(std::span<const double> W, std::span<const double> dy, std::span<double> dx) {
  const std::size_t in = dx.size();
  const std::size_t out = dy.size();
  for (std::size_t i = 0; i < in; ++i) {
    const double* row = W.data() + i * out;
    double acc = 0.0;
    for (std::size_t j = 0; j < out; ++j) acc += row[j] * dy[j];
    dx[i] += acc;
  }
}

void outer_acc(std::span<const double> x, std::span<const double> dy, std::span<double> dW) {
  const std::size_t in = x.size();
  const std::size_t out = dy.size();
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    double* row = dW.data() + i * out;
    for (std::size_t j = 0; j < out; ++j) row[j] += xi * dy[j];
  }
}

void affine_rows(std::span<const double> X, std::size_t rows, std::span<const double> W,
                 std::span<const double> b, std::span<double> Y) {
  const std::size_t out = b.size();
  const std::size_t in = rows == 0 ? 0 : X.size() / rows;
  for (std::size_t r = 0; r < rows; ++r) {
    auto y = Y.subspan(r * out, out);
    std::copy(b.begin(), b.end(), y.begin());
    matvec_acc(X.subspan(r * in, in), W, y);
  }
}

}  // namespace serial

namespace parallel {

// Column blocks for matvec_acc keep the i-ascending summation order of the
// serial kernel for every y[j].
namespace {
constexpr std::size_t kColumnBlock = 64;
}

void matvec_acc(std::span<const double> x, std::span<const double> W, std::span<double> y) {
  const std::size_t in = x.size();
  const std::size_t out = y.size();
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((out + kColumnBlock - 1) / kColumnBlock);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t j0 = static_cast<std::size_t>(blk) * kColumnBlock;
    const std::size_t j1 = std::min(out, j0 + kColumnBlock);
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = x[i];
      const double* row = W.data() + i * out;
      for (std::size_t j = j0; j < j1; ++j) y[j] += xi * row[j];
    }
  }
}

void matvec_t_acc(std::span<const double> W, std::span<const double> dy, std::span<double> dx) {
  const std::ptrdiff_t in = static_cast<std::ptrdiff_t>(dx.size());
  const std::size_t out = dy.size();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < in; ++i) {
    const double* row = W.data() + static_cast<std::size_t>(i) * out;
    double acc = 0.0;
    for (std::size_t j = 0; j < out; ++j) acc += row[j] * dy[j];
    dx[static_cast<std::size_t>(i)] += acc;
  }
}

void outer_acc(std::span<const double> x, std::span<const double> dy, std::span<double> dW) {
  const std::ptrdiff_t in = static_cast<std::ptrdiff_t>(x.size());
  const std::size_t out = dy.size();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < in; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    double* row = dW.data() + static_cast<std::size_t>(i) * out;
    for (std::size_t j = 0; j < out; ++j) row[j] += xi * dy[j];
  }
}

void affine_rows(std::span<const double> X, std::size_t rows, std::span<const double> W,
                 std::span<const double> b, std::span<double> Y) {
  const std::size_t out = b.size();
  const std::size_t in = rows == 0 ? 0 : X.size() / rows;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    auto y = Y.subspan(static_cast<std::size_t>(r) * out, out);
    std::copy(b.begin(), b.end(), y.begin());
    serial::matvec_acc(X.subspan(static_cast<std::size_t>(r) * in, in), W, y);
  }
}

}  // namespace parallel

namespace {
std::atomic<int> g_threads{1};

bool go_parallel(std::size_t work) {
  return g_threads.load(std::memory_order_relaxed) > 1 && work >= kParallelThreshold;
}
}  // namespace

void set_num_threads(int n) {
  n = std::max(1, n);
  g_threads.store(n);
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int num_threads() { return g_threads.load(); }

void matvec_acc(std::span<const double> x, std::span<const double> W, std::span<double> y) {
  if (go_parallel(W.size())) {
    parallel::matvec_acc(x, W, y);
  } else {
    serial::matvec_acc(x, W, y);
  }
}

void matvec_t_acc(std::span<const double> W, std::span<const double> dy, std::span<double> dx) {
  if (go_parallel(W.size())) {
    parallel::matvec_t_acc(W, dy, dx);
  } else {
    serial::matvec_t_acc(W, dy, dx);
  }
}

void outer_acc(std::span<const double> x, std::span<const double> dy, std::span<double> dW) {
  if (go_parallel(dW.size())) {
    parallel::outer_acc(x, dy, dW);
  } else {
    serial::outer_acc(x, dy, dW);
  }
}

}  // namespace evpred::kernels
