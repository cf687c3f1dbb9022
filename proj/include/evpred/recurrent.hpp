#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evpred/corpus.hpp"
#include "evpred/rng.hpp"
#include "evpred/tape.hpp"
#include "evpred/tensor.hpp"

namespace evpred {

enum class CellKind { kLstm, kGru };

std::string to_string(CellKind kind);
CellKind parse_cell_kind(const std::string& s);

/// Gate weights of one LSTM or GRU cell, pointing into a ParameterSet.
///
/// LSTM: input_weights (in, 4H) and recurrent_weights (H, 4H), gate blocks
/// ordered [input, forget, output, candidate]; bias (4H).
/// GRU: input_weights (in, 3H) with blocks [update, reset, candidate];
/// recurrent_weights (H, 2H) for [update, reset]; candidate_weights (H, H)
/// applied to reset ⊙ h; bias (3H).
struct CellParams {
  CellKind kind = CellKind::kLstm;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  Parameter* input_weights = nullptr;
  Parameter* recurrent_weights = nullptr;
  Parameter* candidate_weights = nullptr;
  Parameter* bias = nullptr;

  std::size_t num_gates() const { return kind == CellKind::kLstm ? 4 : 3; }

  /// Registers `<prefix>.Wx`, `<prefix>.Wh`, `<prefix>.b` (and `<prefix>.Uh` for
  /// GRU) with Glorot-uniform weights, zero biases and LSTM forget bias +1.
  static CellParams create(ParameterSet& params, const std::string& prefix, CellKind kind,
                           std::size_t input_dim, std::size_t hidden, Rng& rng);
  /// Rebinds to tensors already present in `params` (after a checkpoint load).
  static CellParams bind(ParameterSet& params, const std::string& prefix, CellKind kind,
                         std::size_t input_dim, std::size_t hidden);
};

/// h, and c for LSTM (invalid Var for GRU).
struct CellState {
  Var h;
  Var c;
};

CellState zero_state(Tape& tape, const CellParams& p);

CellState lstm_step(Tape& tape, Var x, CellState state, const CellParams& p);
CellState gru_step(Tape& tape, Var x, CellState state, const CellParams& p);
CellState cell_step(Tape& tape, Var x, CellState state, const CellParams& p);

enum class Direction { kForward, kBackward };

/// Runs one cell over the sequence from a zero state. The backward direction
/// consumes the reversed sequence and returns its outputs in source order.
std::vector<Var> run_layer(Tape& tape, std::span<const Var> inputs, const CellParams& p,
                           Direction direction);

/// Optional non-recurrent dropout applied to each layer input.
struct DropoutContext {
  double p = 0.0;
  Rng* rng = nullptr;

  Var apply(Tape& tape, Var x) const { return (rng == nullptr || p == 0.0) ? x : tape.dropout(x, p, *rng); }
};

/// Per-layer cells of the encoder. `backward` is empty for a unidirectional encoder.
struct EncoderParams {
  std::vector<CellParams> forward;
  std::vector<CellParams> backward;

  bool bidirectional() const { return !backward.empty(); }
  std::size_t num_layers() const { return forward.size(); }
  /// Width of each encoder state: 2H bidirectional, H otherwise.
  std::size_t state_width() const;
};

/// Top-layer per-position states s^e_1..s^e_m plus one summary per layer:
/// [forward state at m ‖ backward state at 1] (forward state at m if unidirectional).
struct EncoderStates {
  std::vector<Var> states;
  std::vector<Var> layer_summaries;

  Var summary() const { return layer_summaries.back(); }
};

EncoderStates encode_bidirectional(Tape& tape, const IdSeq& ids, const EncoderParams& layers,
                                   Parameter& embeddings, const DropoutContext& dropout = {});

}  // namespace evpred
