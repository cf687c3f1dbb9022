#include "evpred/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evpred/errors.hpp"
#include "evpred/kernels.hpp"
#include "evpred/rng.hpp"

namespace evpred {

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (W.rank() != 2 || b.rank() != 1 || (x.rank() != 1 && x.rank() != 2)) {
    throw ShapeError("affine: expected x (in) or (rows,in), W (in,out), b (out)");
  }
  const std::size_t in = x.shape().back();
  const std::size_t rows = x.rank() == 1 ? 1 : x.dim(0);
  if (W.dim(0) != in || W.dim(1) != b.dim(0)) {
    throw ShapeError("affine: x " + shape_string(x.shape()) + " W " + shape_string(W.shape()) +
                     " b " + shape_string(b.shape()));
  }
  std::vector<std::size_t> out_shape = x.shape();
  out_shape.back() = b.dim(0);
  Tensor y(out_shape);
  kernels::serial::affine_rows(x.data(), rows, W.data(), b.data(), y.data());
  return y;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw std::invalid_argument("softmax_cross_entropy: target " + std::to_string(target) +
                                " out of range for " + std::to_string(logits.size()) + " logits");
  }
  for (double v : logits) {
    if (!std::isfinite(v)) throw std::invalid_argument("softmax_cross_entropy: non-finite logit");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  CrossEntropy out{log_z - logits[target], std::vector<double>(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - log_z);
  out.grad[target] -= 1.0;
  return out;
}

Tensor dropout(const Tensor& x, double p, Mode mode, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (mode == Mode::kInfer || p == 0.0) return x;
  Rng rng(seed, 0xD0);
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor y = x;
  for (double& v : y.values()) v = rng.uniform() < p ? 0.0 : v * keep_scale;
  return y;
}

}  // namespace evpred
