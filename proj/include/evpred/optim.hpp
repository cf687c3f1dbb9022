#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "evpred/tensor.hpp"

namespace evpred {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Learning rates the toolkit documents as the tuning grid.
inline constexpr double kLearningRateGrid[] = {0.0001, 0.0005, 0.001, 0.005, 0.01};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;

  AdamState() = default;
  AdamState(const ParameterSet& params, AdamConfig cfg);
};

/// One bias-corrected Adam update from the accumulated gradients, which are
/// cleared afterwards. Throws TrainingDiverged (leaving parameters untouched)
/// if any gradient is NaN or infinite.
void adam_step(ParameterSet& params, AdamState& state);

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

}  // namespace evpred
