#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evpred/tensor.hpp"

namespace evpred {

enum class Mode { kTrain, kInfer };

/// y = xW + b for x of shape (in) or (rows, in), W (in, out), b (out).
Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

struct CrossEntropy {
  double loss;
  std::vector<double> grad;  // softmax(logits) - onehot(target)
};

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t target);

/// Inverted dropout: in train mode each entry is zeroed with probability p and
/// survivors are scaled by 1/(1-p). Infer mode is the identity.
Tensor dropout(const Tensor& x, double p, Mode mode, std::uint64_t seed);

}  // namespace evpred
