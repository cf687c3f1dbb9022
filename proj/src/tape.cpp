#include "evpred/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evpred/errors.hpp"
#include "evpred/kernels.hpp"

namespace evpred {
namespace {

void require_same_width(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": width " + std::to_string(a) + " vs " +
                     std::to_string(b));
  }
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(std::vector<double> value) {
  Node n{Op::kConstant};
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::lookup(Parameter& table, std::size_t row) {
  if (table.value.rank() != 2 || row >= table.value.dim(0)) {
    throw std::invalid_argument("lookup: row " + std::to_string(row) + " outside table " +
                                shape_string(table.value.shape()));
  }
  const std::size_t dim = table.value.dim(1);
  Node n{Op::kLookup};
  auto src = table.value.data().subspan(row * dim, dim);
  n.value.assign(src.begin(), src.end());
  n.weight = &table;
  n.index = row;
  return push(std::move(n));
}

Var Tape::affine(Var x, Parameter& W, Parameter* b) {
  const auto& xv = value(x);
  if (W.value.rank() != 2 || W.value.dim(0) != xv.size()) {
    throw ShapeError("affine: input width " + std::to_string(xv.size()) + " vs W " +
                     shape_string(W.value.shape()));
  }
  const std::size_t out = W.value.dim(1);
  Node n{Op::kAffine};
  if (b != nullptr) {
    require_same_width(b->value.size(), out, "affine bias");
    n.value.assign(b->value.values().begin(), b->value.values().end());
  } else {
    n.value.assign(out, 0.0);
  }
  kernels::matvec_acc(xv, W.value.data(), n.value);
  n.a = x.id;
  n.weight = &W;
  n.bias = b;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require_same_width(width(a), width(b), "add");
  Node n{Op::kAdd};
  n.value = value(a);
  const auto& bv = value(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += bv[i];
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  require_same_width(width(a), width(b), "mul");
  Node n{Op::kMul};
  n.value = value(a);
  const auto& bv = value(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= bv[i];
  n.a = a.id;
  n.b = b.id;
  return push(std::move(n));
}

Var Tape::sigmoid(Var x) {
  Node n{Op::kSigmoid};
  n.value = value(x);
  for (double& v : n.value) v = 1.0 / (1.0 + std::exp(-v));
  n.a = x.id;
  return push(std::move(n));
}

Var Tape::tanh(Var x) {
  Node n{Op::kTanh};
  n.value = value(x);
  for (double& v : n.value) v = std::tanh(v);
  n.a = x.id;
  return push(std::move(n));
}

Var Tape::one_minus(Var x) {
  Node n{Op::kOneMinus};
  n.value = value(x);
  for (double& v : n.value) v = 1.0 - v;
  n.a = x.id;
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts) {
  Node n{Op::kConcat};
  for (Var p : parts) {
    const auto& pv = value(p);
    n.value.insert(n.value.end(), pv.begin(), pv.end());
    n.args.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat(parts);
}

Var Tape::slice(Var x, std::size_t offset, std::size_t length) {
  const auto& xv = value(x);
  if (offset + length > xv.size()) throw ShapeError("slice: range exceeds input width");
  Node n{Op::kSlice};
  n.value.assign(xv.begin() + static_cast<std::ptrdiff_t>(offset),
                 xv.begin() + static_cast<std::ptrdiff_t>(offset + length));
  n.a = x.id;
  n.index = offset;
  return push(std::move(n));
}

Var Tape::masked(Var x, std::vector<double> mask) {
  require_same_width(width(x), mask.size(), "masked");
  Node n{Op::kMasked};
  n.value = value(x);
  for (std::size_t i = 0; i < mask.size(); ++i) n.value[i] *= mask[i];
  n.a = x.id;
  n.aux = std::move(mask);
  return push(std::move(n));
}

Var Tape::dropout(Var x, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(width(x));
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  return masked(x, std::move(mask));
}

Var Tape::softmax(Var x) {
  const auto& xv = value(x);
  if (xv.empty()) throw ShapeError("softmax: empty input");
  Node n{Op::kSoftmax};
  n.value.resize(xv.size());
  const double mx = *std::max_element(xv.begin(), xv.end());
  double z = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    n.value[i] = std::exp(xv[i] - mx);
    z += n.value[i];
  }
  for (double& v : n.value) v /= z;
  n.a = x.id;
  return push(std::move(n));
}

Var Tape::weighted_sum(Var weights, std::span<const Var> vectors) {
  const auto& w = value(weights);
  require_same_width(w.size(), vectors.size(), "weighted_sum");
  if (vectors.empty()) throw ShapeError("weighted_sum: no vectors");
  Node n{Op::kWeightedSum};
  n.value.assign(width(vectors[0]), 0.0);
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    const auto& vj = value(vectors[j]);
    require_same_width(vj.size(), n.value.size(), "weighted_sum");
    for (std::size_t k = 0; k < vj.size(); ++k) n.value[k] += w[j] * vj[k];
    n.args.push_back(vectors[j].id);
  }
  n.a = weights.id;
  return push(std::move(n));
}

Var Tape::cross_entropy(Var logits, std::size_t target) {
  const auto& lv = value(logits);
  if (target >= lv.size()) {
    throw std::invalid_argument("cross_entropy: target " + std::to_string(target) +
                                " out of range");
  }
  Node n{Op::kCrossEntropy};
  const double mx = *std::max_element(lv.begin(), lv.end());
  double z = 0.0;
  for (double v : lv) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  n.aux.resize(lv.size());
  for (std::size_t i = 0; i < lv.size(); ++i) n.aux[i] = std::exp(lv[i] - log_z);
  n.value = {log_z - lv[target]};
  n.a = logits.id;
  n.index = target;
  return push(std::move(n));
}

Var Tape::mean(std::span<const Var> scalars) {
  if (scalars.empty()) throw std::invalid_argument("mean: no terms");
  Node n{Op::kMean};
  double s = 0.0;
  for (Var v : scalars) {
    s += scalar(v);
    n.args.push_back(v.id);
  }
  n.value = {s / static_cast<double>(scalars.size())};
  return push(std::move(n));
}

void Tape::backward(Var root, double seed) {
  for (auto& n : nodes_) n.grad.assign(n.value.size(), 0.0);
  nodes_[root.id].grad.assign(nodes_[root.id].value.size(), seed);
  for (std::size_t i = root.id + 1; i-- > 0;) backprop_node(nodes_[i]);
}

void Tape::backprop_node(Node& n) {
  const auto& g = n.grad;
  switch (n.op) {
    case Op::kConstant:
      break;
    case Op::kLookup: {
      const std::size_t dim = g.size();
      auto row = n.weight->grad.data().subspan(n.index * dim, dim);
      for (std::size_t k = 0; k < dim; ++k) row[k] += g[k];
      break;
    }
    case Op::kAffine: {
      auto& x = nodes_[n.a];
      kernels::matvec_t_acc(n.weight->value.data(), g, x.grad);
      kernels::outer_acc(x.value, g, n.weight->grad.data());
      if (n.bias != nullptr) {
        auto& bg = n.bias->grad.values();
        for (std::size_t k = 0; k < g.size(); ++k) bg[k] += g[k];
      }
      break;
    }
    case Op::kAdd: {
      auto& ga = nodes_[n.a].grad;
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      auto& gb = nodes_[n.b].grad;
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k];
      break;
    }
    case Op::kMul: {
      auto& A = nodes_[n.a];
      auto& B = nodes_[n.b];
      for (std::size_t k = 0; k < g.size(); ++k) {
        A.grad[k] += g[k] * B.value[k];
        B.grad[k] += g[k] * A.value[k];
      }
      break;
    }
    case Op::kSigmoid: {
      auto& ga = nodes_[n.a].grad;
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * n.value[k] * (1.0 - n.value[k]);
      break;
    }
    case Op::kTanh: {
      auto& ga = nodes_[n.a].grad;
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * (1.0 - n.value[k] * n.value[k]);
      break;
    }
    case Op::kOneMinus: {
      auto& ga = nodes_[n.a].grad;
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] -= g[k];
      break;
    }
    case Op::kConcat: {
      std::size_t off = 0;
      for (auto id : n.args) {
        auto& part = nodes_[id].grad;
        for (std::size_t k = 0; k < part.size(); ++k) part[k] += g[off + k];
        off += part.size();
      }
      break;
    }
    case Op::kSlice: {
      auto& ga = nodes_[n.a].grad;
      for (std::size_t k = 0; k < g.size(); ++k) ga[n.index + k] += g[k];
      break;
    }
    case Op::kMasked: {
      auto& ga = nodes_[n.a].grad;
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * n.aux[k];
      break;
    }
    case Op::kSoftmax: {
      double dot = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) dot += g[k] * n.value[k];
      auto& ga = nodes_[n.a].grad;
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += n.value[k] * (g[k] - dot);
      break;
    }
    case Op::kWeightedSum: {
      auto& W = nodes_[n.a];
      for (std::size_t j = 0; j < n.args.size(); ++j) {
        auto& v = nodes_[n.args[j]];
        double dw = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
          dw += g[k] * v.value[k];
          v.grad[k] += W.value[j] * g[k];
        }
        W.grad[j] += dw;
      }
      break;
    }
    case Op::kCrossEntropy: {
      auto& ga = nodes_[n.a].grad;
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[0] * n.aux[k];
      ga[n.index] -= g[0];
      break;
    }
    case Op::kMean: {
      const double share = g[0] / static_cast<double>(n.args.size());
      for (auto id : n.args) nodes_[id].grad[0] += share;
      break;
    }
  }
}

}  // namespace evpred
