#include "evpred/recurrent.hpp"

#include <cmath>
#include <stdexcept>

#include "evpred/errors.hpp"

namespace evpred {
namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

void check_input(Tape& tape, Var x, CellState state, const CellParams& p) {
  if (tape.width(x) != p.input_dim) {
    throw ShapeError("cell input width " + std::to_string(tape.width(x)) + ", expected " +
                     std::to_string(p.input_dim));
  }
  if (tape.width(state.h) != p.hidden) throw ShapeError("cell hidden state width mismatch");
  if (p.kind == CellKind::kLstm && (!state.c.valid() || tape.width(state.c) != p.hidden)) {
    throw ShapeError("LSTM cell state width mismatch");
  }
}

}  // namespace

std::string to_string(CellKind kind) { return kind == CellKind::kLstm ? "lstm" : "gru"; }

CellKind parse_cell_kind(const std::string& s) {
  if (s == "lstm") return CellKind::kLstm;
  if (s == "gru") return CellKind::kGru;
  throw ConfigError("unknown cell kind '" + s + "' (expected lstm or gru)");
}

CellParams CellParams::create(ParameterSet& params, const std::string& prefix, CellKind kind,
                              std::size_t input_dim, std::size_t hidden, Rng& rng) {
  const std::size_t H = hidden;
  if (kind == CellKind::kLstm) {
    params.add(prefix + ".Wx", glorot(input_dim, 4 * H, rng));
    params.add(prefix + ".Wh", glorot(H, 4 * H, rng));
    Tensor b({4 * H});
    for (std::size_t k = H; k < 2 * H; ++k) b[k] = 1.0;
    params.add(prefix + ".b", std::move(b));
  } else {
    params.add(prefix + ".Wx", glorot(input_dim, 3 * H, rng));
    params.add(prefix + ".Wh", glorot(H, 2 * H, rng));
    params.add(prefix + ".Uh", glorot(H, H, rng));
    params.add(prefix + ".b", Tensor({3 * H}));
  }
  return bind(params, prefix, kind, input_dim, hidden);
}

CellParams CellParams::bind(ParameterSet& params, const std::string& prefix, CellKind kind,
                            std::size_t input_dim, std::size_t hidden) {
  CellParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.hidden = hidden;
  const std::size_t G = p.num_gates();
  p.input_weights = &params.get(prefix + ".Wx");
  p.bias = &params.get(prefix + ".b");
  p.recurrent_weights = &params.get(prefix + ".Wh");
  const std::size_t rec_cols = kind == CellKind::kLstm ? 4 * hidden : 2 * hidden;
  auto expect = [&](const Parameter* t, std::vector<std::size_t> shape, const std::string& name) {
    if (t->value.shape() != shape) {
      throw ShapeError(prefix + "." + name + " has shape " + shape_string(t->value.shape()) +
                       ", expected " + shape_string(shape));
    }
  };
  expect(p.input_weights, {input_dim, G * hidden}, "Wx");
  expect(p.recurrent_weights, {hidden, rec_cols}, "Wh");
  expect(p.bias, {G * hidden}, "b");
  if (kind == CellKind::kGru) {
    p.candidate_weights = &params.get(prefix + ".Uh");
    expect(p.candidate_weights, {hidden, hidden}, "Uh");
  }
  return p;
}

CellState zero_state(Tape& tape, const CellParams& p) {
  CellState s;
  s.h = tape.constant(std::vector<double>(p.hidden, 0.0));
  if (p.kind == CellKind::kLstm) s.c = tape.constant(std::vector<double>(p.hidden, 0.0));
  return s;
}

CellState lstm_step(Tape& tape, Var x, CellState state, const CellParams& p) {
  if (p.kind != CellKind::kLstm) throw std::invalid_argument("lstm_step on non-LSTM parameters");
  check_input(tape, x, state, p);
  const std::size_t H = p.hidden;
  const Var pre = tape.add(tape.affine(x, *p.input_weights, p.bias),
                           tape.affine(state.h, *p.recurrent_weights));
  const Var gates = tape.sigmoid(tape.slice(pre, 0, 3 * H));
  const Var input_gate = tape.slice(gates, 0, H);
  const Var forget_gate = tape.slice(gates, H, H);
  const Var output_gate = tape.slice(gates, 2 * H, H);
  const Var candidate = tape.tanh(tape.slice(pre, 3 * H, H));
  CellState next;
  next.c = tape.add(tape.mul(forget_gate, state.c), tape.mul(input_gate, candidate));
  next.h = tape.mul(output_gate, tape.tanh(next.c));
  return next;
}

CellState gru_step(Tape& tape, Var x, CellState state, const CellParams& p) {
  if (p.kind != CellKind::kGru) throw std::invalid_argument("gru_step on non-GRU parameters");
  check_input(tape, x, state, p);
  const std::size_t H = p.hidden;
  const Var xg = tape.affine(x, *p.input_weights, p.bias);
  const Var zr = tape.sigmoid(tape.add(tape.slice(xg, 0, 2 * H),
                                       tape.affine(state.h, *p.recurrent_weights)));
  const Var update = tape.slice(zr, 0, H);
  const Var reset = tape.slice(zr, H, H);
  const Var candidate = tape.tanh(tape.add(
      tape.slice(xg, 2 * H, H), tape.affine(tape.mul(reset, state.h), *p.candidate_weights)));
  CellState next;
  next.h = tape.add(tape.mul(tape.one_minus(update), state.h), tape.mul(update, candidate));
  return next;
}

CellState cell_step(Tape& tape, Var x, CellState state, const CellParams& p) {
  return p.kind == CellKind::kLstm ? lstm_step(tape, x, state, p) : gru_step(tape, x, state, p);
}

std::vector<Var> run_layer(Tape& tape, std::span<const Var> inputs, const CellParams& p,
                           Direction direction) {
  if (inputs.empty()) throw std::invalid_argument("run_layer: empty input sequence");
  const std::size_t m = inputs.size();
  std::vector<Var> out(m);
  CellState state = zero_state(tape, p);
  for (std::size_t step = 0; step < m; ++step) {
    const std::size_t pos = direction == Direction::kForward ? step : m - 1 - step;
    state = cell_step(tape, inputs[pos], state, p);
    out[pos] = state.h;
  }
  return out;
}

std::size_t EncoderParams::state_width() const {
  if (forward.empty()) return 0;
  return forward.back().hidden * (bidirectional() ? 2 : 1);
}

EncoderStates encode_bidirectional(Tape& tape, const IdSeq& ids, const EncoderParams& layers,
                                   Parameter& embeddings, const DropoutContext& dropout) {
  if (ids.empty()) throw std::invalid_argument("encode_bidirectional: empty source");
  if (layers.forward.empty()) throw std::invalid_argument("encode_bidirectional: no layers");
  if (layers.bidirectional() && layers.backward.size() != layers.forward.size()) {
    throw ConfigError("encoder forward/backward layer counts differ");
  }
  const std::size_t m = ids.size();
  std::vector<Var> inputs(m);
  for (std::size_t j = 0; j < m; ++j) inputs[j] = tape.lookup(embeddings, ids[j]);

  EncoderStates enc;
  for (std::size_t layer = 0; layer < layers.num_layers(); ++layer) {
    for (auto& v : inputs) v = dropout.apply(tape, v);
    const auto fwd = run_layer(tape, inputs, layers.forward[layer], Direction::kForward);
    if (!layers.bidirectional()) {
      inputs = fwd;
      enc.layer_summaries.push_back(fwd.back());
      continue;
    }
    const auto bwd = run_layer(tape, inputs, layers.backward[layer], Direction::kBackward);
    for (std::size_t j = 0; j < m; ++j) inputs[j] = tape.concat(fwd[j], bwd[j]);
    enc.layer_summaries.push_back(tape.concat(fwd.back(), bwd.front()));
  }
  enc.states = std::move(inputs);
  return enc;
}

}  // namespace evpred
