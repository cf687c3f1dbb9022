#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "evpred/tensor.hpp"

namespace evpred {

struct GradCheckOptions {
  double step = 1e-4;
  /// Coordinates sampled per tensor; tensors smaller than this are checked in full.
  std::size_t samples_per_tensor = 16;
  std::uint64_t seed = 0;
  /// Denominator floor so that coordinates whose true gradient is ~0 are judged
  /// by absolute error instead of amplifying round-off.
  double denominator_floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
};

/// Loss closure: evaluates the loss at the current parameter values. When
/// `backprop` is true it must also leave dLoss/dparam in every Parameter::grad
/// (grads are zeroed before the call).
using LossClosure = std::function<double(bool backprop)>;

/// Compares analytic gradients to central differences (L(θ+h) - L(θ-h)) / 2h on
/// a seeded sample of coordinates and returns the worst relative error
/// |a - n| / max(|a|, |n|, floor). Parameter values are restored on return.
GradCheckResult gradient_check(const LossClosure& loss, ParameterSet& params,
                               const GradCheckOptions& options = {});

}  // namespace evpred
