#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evpred/corpus.hpp"
#include "evpred/ops.hpp"
#include "evpred/optim.hpp"
#include "evpred/recurrent.hpp"
#include "evpred/tape.hpp"
#include "evpred/tensor.hpp"

namespace evpred {

struct ModelConfig {
  CellKind cell = CellKind::kLstm;
  std::size_t layers = 1;
  bool attention = false;
  bool bidirectional = true;
  std::size_t hidden = 300;
  std::size_t embed_dim = 300;
  std::size_t vocab_size = 0;  // shared by source and target sides
  double dropout = 0.5;
  std::size_t max_decode_len = 30;

  /// Throws ConfigError on non-positive sizes or a dropout outside [0, 1).
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Additive attention output for one decoder step.
struct Attention {
  Var context;
  Var weights;
};

/// Source-side projections W_enc · s^e_j, computed once per source sentence.
struct AttentionKeys {
  std::vector<Var> keys;
};

struct DecoderStep {
  std::vector<CellState> states;  // one per decoder layer
  std::optional<Attention> attention;
  Var logits;
};

struct EncodedPair {
  IdSeq source;
  IdSeq target;  // without EOS; EOS is appended by the loss
};

using ParameterSnapshot = std::map<std::string, Tensor>;

/// Encoder–decoder estimating Pr(y_1..y_n | x_1..x_m).
///
/// Parameter names:
///   embed.src, embed.tgt                         (V, D)
///   enc.fwd.L<l>.*, enc.bwd.L<l>.*               encoder cells
///   dec.L<l>.*                                   decoder cells
///   bridge.L<l>.W (E, H), bridge.L<l>.b (H)      E = encoder state width
///   att.W_enc (E, H), att.W_dec (H, H), att.v (H, 1)
///   out.W (H [+E], V), out.b (V)
class Seq2SeqModel {
 public:
  Seq2SeqModel(const ModelConfig& config, std::uint64_t seed);
  Seq2SeqModel(const Seq2SeqModel& other);
  Seq2SeqModel& operator=(const Seq2SeqModel& other);
  Seq2SeqModel(Seq2SeqModel&&) = delete;

  const ModelConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  ParameterSnapshot snapshot() const;
  void restore(const ParameterSnapshot& snap);

  /// Overwrites the embedding tables (e.g. with pretrained vectors).
  void set_embeddings(const Tensor& table);

  const EncoderParams& encoder() const { return encoder_; }
  const std::vector<CellParams>& decoder() const { return decoder_; }
  Parameter& source_embeddings() { return *src_embed_; }
  Parameter& target_embeddings() { return *tgt_embed_; }
  Parameter& bridge_weight(std::size_t layer) { return *bridge_W_.at(layer); }
  Parameter& bridge_bias(std::size_t layer) { return *bridge_b_.at(layer); }
  Parameter& attention_encoder_weight() { return *att_enc_; }
  Parameter& attention_decoder_weight() { return *att_dec_; }
  Parameter& attention_vector() { return *att_v_; }
  Parameter& output_weight() { return *out_W_; }
  Parameter& output_bias() { return *out_b_; }

 private:
  void bind();

  ModelConfig config_;
  ParameterSet params_;
  EncoderParams encoder_;
  std::vector<CellParams> decoder_;
  Parameter* src_embed_ = nullptr;
  Parameter* tgt_embed_ = nullptr;
  std::vector<Parameter*> bridge_W_;
  std::vector<Parameter*> bridge_b_;
  Parameter* att_enc_ = nullptr;
  Parameter* att_dec_ = nullptr;
  Parameter* att_v_ = nullptr;
  Parameter* out_W_ = nullptr;
  Parameter* out_b_ = nullptr;
};

EncoderStates run_encoder(Tape& tape, const IdSeq& source, Seq2SeqModel& model,
                          const DropoutContext& dropout = {});

/// Decoder layer l starts from h = tanh(bridge_l(summary of encoder layer l)); LSTM c starts at 0.
std::vector<CellState> init_decoder(Tape& tape, const EncoderStates& enc, Seq2SeqModel& model);

AttentionKeys attention_keys(Tape& tape, const EncoderStates& enc, Seq2SeqModel& model);

/// e_j = v · tanh(W_enc s^e_j + W_dec s_d); weights = softmax(e); context = Σ_j weights_j s^e_j.
Attention attention_context(Tape& tape, Var decoder_hidden, const EncoderStates& enc,
                            const AttentionKeys& keys, Seq2SeqModel& model);
Attention attention_context(Tape& tape, Var decoder_hidden, const EncoderStates& enc,
                            Seq2SeqModel& model);

/// Feeds y_{i-1} through the decoder stack and projects to target-vocabulary logits
/// (from s^d_i, or from [s^d_i ‖ c_i] with attention).
DecoderStep decode_step(Tape& tape, std::size_t prev_id, const std::vector<CellState>& states,
                        const EncoderStates& enc, const AttentionKeys& keys, Seq2SeqModel& model,
                        const DropoutContext& dropout = {});

/// Teacher-forced loss of one pair: mean cross-entropy over the target positions
/// followed by EOS.
Var pair_loss(Tape& tape, const EncodedPair& pair, Seq2SeqModel& model,
              const DropoutContext& dropout = {});

/// Loss of each pair evaluated without dropout (no gradients).
std::vector<double> pair_losses(Seq2SeqModel& model, std::span<const EncodedPair> batch);

struct BatchOptions {
  Mode mode = Mode::kTrain;
  std::uint64_t seed = 0;  // dropout stream root
  double clip_norm = 0.0;  // 0 disables clipping
};

/// Accumulates the gradient of the batch mean loss into model.params() without
/// updating. Returns the mean loss.
double accumulate_batch_gradient(Seq2SeqModel& model, std::span<const EncodedPair> batch,
                                 const BatchOptions& options);

/// One teacher-forced Adam step on the batch; returns the pre-update mean loss.
double train_batch(Seq2SeqModel& model, std::span<const EncodedPair> batch, AdamState& adam,
                   const BatchOptions& options = {});

/// Argmax decoding (ties to the lowest id) until EOS or max_len tokens; EOS is
/// not emitted. max_len = 0 uses the model's max_decode_len.
IdSeq greedy_decode(Seq2SeqModel& model, const IdSeq& source, std::size_t max_len = 0);

/// Decodes every source; with threads > 1 sentences are decoded concurrently.
std::vector<IdSeq> greedy_decode_all(Seq2SeqModel& model, std::span<const IdSeq> sources,
                                     int threads = 1);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_bleu = 0.0;
};

struct TrainSchedule {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 0.001;
  std::uint64_t seed = 1;
  double clip_norm = 0.0;
  /// Called after every epoch; `improved` is true when this epoch is the new best.
  std::function<void(const EpochRecord&, bool improved, const Seq2SeqModel&)> on_epoch;
};

struct DevSet {
  std::vector<IdSeq> sources;
  std::vector<TokenSeq> references;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev_bleu = 0.0;
};

/// Index of the best dev BLEU; ties go to the earlier epoch. 1-based.
std::size_t best_epoch(std::span<const double> dev_bleu);

/// Trains for schedule.epochs epochs, scoring dev with greedy decoding and corpus
/// BLEU after each, and leaves the model holding the best epoch's parameters.
TrainResult train_loop(Seq2SeqModel& model, std::span<const EncodedPair> train, const DevSet& dev,
                       const Vocabulary& vocab, const TrainSchedule& schedule);

std::vector<EncodedPair> encode_corpus(const PairCorpus& corpus, const Vocabulary& vocab);
DevSet make_dev_set(const PairCorpus& corpus, const Vocabulary& vocab);

// Checkpoint file: "EVPRED1\n", key=value header lines (config, vocab hash,
// tensor manifest `tensor <name> float64 <rank> <dims...>`), "end_header\n",
// then every tensor's payload as little-endian float64 in manifest order.
inline constexpr std::string_view kCheckpointMagic = "EVPRED1";

struct Checkpoint {
  ModelConfig config;
  std::uint64_t vocab_hash = 0;
  std::size_t epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model,
                     std::uint64_t vocab_hash, std::size_t epoch = 0);
/// Throws FormatError on a malformed file and IntegrityError when the manifest
/// does not match the architecture its header describes.
std::unique_ptr<Seq2SeqModel> load_checkpoint(const std::filesystem::path& path, Checkpoint* meta = nullptr);

}  // namespace evpred
