#pragma once

#include <cstddef>
#include <span>

// Dense kernels behind every affine map in the model. Each kernel exists twice:
// `serial` is the reference, `parallel` splits the output index space across
// OpenMP threads. Every output element is accumulated in the same order in both
// versions, so results are bit-identical regardless of thread count.
//
// Layout: W is (in x out) row-major, x is a length-`in` row vector, y = xW.

namespace evpred::kernels {

namespace serial {
/// y[j] += sum_i x[i] * W[i][j]
void matvec_acc(std::span<const double> x, std::span<const double> W, std::span<double> y);
/// dx[i] += sum_j W[i][j] * dy[j]
void matvec_t_acc(std::span<const double> W, std::span<const double> dy, std::span<double> dx);
/// dW[i][j] += x[i] * dy[j]
void outer_acc(std::span<const double> x, std::span<const double> dy, std::span<double> dW);
/// Y (rows x out) = X (rows x in) W + b
void affine_rows(std::span<const double> X, std::size_t rows, std::span<const double> W,
                 std::span<const double> b, std::span<double> Y);
}  // namespace serial

namespace parallel {
void matvec_acc(std::span<const double> x, std::span<const double> W, std::span<double> y);
void matvec_t_acc(std::span<const double> W, std::span<const double> dy, std::span<double> dx);
void outer_acc(std::span<const double> x, std::span<const double> dy, std::span<double> dW);
void affine_rows(std::span<const double> X, std::size_t rows, std::span<const double> W,
                 std::span<const double> b, std::span<double> Y);
}  // namespace parallel

/// Thread count used by the dispatching kernels below; 1 (the default) keeps
/// everything on the serial path.
void set_num_threads(int n);
int num_threads();

/// Work size (multiply-adds) below which dispatch stays serial even with threads.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

void matvec_acc(std::span<const double> x, std::span<const double> W, std::span<double> y);
void matvec_t_acc(std::span<const double> W, std::span<const double> dy, std::span<double> dx);
void outer_acc(std::span<const double> x, std::span<const double> dy, std::span<double> dW);

}  // namespace evpred::kernels
