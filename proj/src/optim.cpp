#include "evpred/optim.hpp"

#include <cmath>

#include "evpred/errors.hpp"

namespace evpred {

AdamState::AdamState(const ParameterSet& params, AdamConfig cfg) : config(cfg) {
  for (const auto& [name, p] : params) {
    m.emplace(name, Tensor(p.value.shape()));
    v.emplace(name, Tensor(p.value.shape()));
  }
}

void adam_step(ParameterSet& params, AdamState& state) {
  for (const auto& [name, p] : params) {
    if (!p.grad.all_finite()) throw TrainingDiverged("non-finite gradient in " + name);
  }
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (auto& [name, p] : params) {
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Tensor(p.value.shape())).first;
      state.v.emplace(name, Tensor(p.value.shape()));
    }
    auto& m = mit->second.values();
    auto& v = state.v.at(name).values();
    auto& theta = p.value.values();
    auto& g = p.grad.values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
      g[i] = 0.0;
    }
  }
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params) {
    for (double g : p.grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [name, p] : params) {
      for (double& g : p.grad.values()) g *= scale;
    }
  }
  return norm;
}

}  // namespace evpred
