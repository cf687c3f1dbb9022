#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evpred/rng.hpp"
#include "evpred/tensor.hpp"

namespace evpred {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = kNone;
  static constexpr std::uint32_t kNone = 0xFFFFFFFFu;
  bool valid() const noexcept { return id != kNone; }
};

/// Reverse-mode record of one forward pass over the fixed model graph.
///
/// Every op appends a node holding its value; backward() walks the nodes in
/// reverse and pushes gradients into the inputs and into the `grad` fields of
/// any Parameters the op read. A tape belongs to one forward pass and one thread.
class Tape {
 public:
  Tape() { nodes_.reserve(1024); }

  Var constant(std::vector<double> value);
  /// Row `row` of an (rows, dim) embedding parameter.
  Var lookup(Parameter& table, std::size_t row);
  /// xW (+ b). W is (in, out).
  Var affine(Var x, Parameter& W, Parameter* b = nullptr);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var one_minus(Var x);
  Var concat(std::span<const Var> parts);
  Var concat(Var a, Var b);
  Var slice(Var x, std::size_t offset, std::size_t length);
  /// Elementwise product with a fixed mask (dropout).
  Var masked(Var x, std::vector<double> mask);
  /// Inverted dropout drawing its mask from `rng`; identity when p == 0.
  Var dropout(Var x, double p, Rng& rng);
  Var softmax(Var x);
  /// sum_j weights[j] * vectors[j]
  Var weighted_sum(Var weights, std::span<const Var> vectors);
  /// Scalar -log softmax(logits)[target].
  Var cross_entropy(Var logits, std::size_t target);
  /// Scalar mean of scalar nodes.
  Var mean(std::span<const Var> scalars);

  const std::vector<double>& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value.at(0); }
  std::size_t width(Var v) const { return nodes_[v.id].value.size(); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(root) = seed and propagates to every node and parameter.
  void backward(Var root, double seed = 1.0);
  /// Gradient of a node after backward().
  const std::vector<double>& grad(Var v) const { return nodes_[v.id].grad; }

 private:
  enum class Op : std::uint8_t {
    kConstant, kLookup, kAffine, kAdd, kMul, kSigmoid, kTanh, kOneMinus,
    kConcat, kSlice, kMasked, kSoftmax, kWeightedSum, kCrossEntropy, kMean
  };

  struct Node {
    Op op;
    std::vector<double> value;
    std::vector<double> grad;
    std::uint32_t a = Var::kNone;
    std::uint32_t b = Var::kNone;
    std::vector<std::uint32_t> args;
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;
    std::size_t index = 0;
    std::vector<double> aux;
  };

  Var push(Node node);
  void backprop_node(Node& n);

  std::vector<Node> nodes_;
};

}  // namespace evpred
