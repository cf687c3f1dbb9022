#include "evpred/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evpred/errors.hpp"
#include "evpred/eval.hpp"

namespace evpred {
namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

std::string layer_name(const std::string& base, std::size_t layer) {
  return base + ".L" + std::to_string(layer);
}

std::size_t encoder_width(const ModelConfig& c) { return c.hidden * (c.bidirectional ? 2 : 1); }

std::size_t output_input_width(const ModelConfig& c) {
  return c.hidden + (c.attention ? encoder_width(c) : 0);
}

}  // namespace

void ModelConfig::validate() const {
  if (hidden == 0 || embed_dim == 0) throw ConfigError("hidden and embedding sizes must be positive");
  if (layers == 0) throw ConfigError("at least one layer is required");
  if (vocab_size <= Vocabulary::kNumSpecials) throw ConfigError("vocabulary has no regular tokens");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (max_decode_len == 0) throw ConfigError("max_decode_len must be positive");
}

Seq2SeqModel::Seq2SeqModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const auto& c = config_;
  const std::size_t E = encoder_width(c);
  const std::size_t H = c.hidden;
  Rng rng(seed, 0x1417);

  params_.add("embed.src", Tensor({c.vocab_size, c.embed_dim}));
  params_.add("embed.tgt", Tensor({c.vocab_size, c.embed_dim}));
  for (auto* name : {"embed.src", "embed.tgt"}) {
    for (double& v : params_.get(name).value.values()) {
      v = rng.uniform(-kEmbeddingInitRange, kEmbeddingInitRange);
    }
  }

  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t in = l == 0 ? c.embed_dim : E;
    CellParams::create(params_, layer_name("enc.fwd", l), c.cell, in, H, rng);
    if (c.bidirectional) CellParams::create(params_, layer_name("enc.bwd", l), c.cell, in, H, rng);
  }
  for (std::size_t l = 0; l < c.layers; ++l) {
    CellParams::create(params_, layer_name("dec", l), c.cell, l == 0 ? c.embed_dim : H, H, rng);
    params_.add(layer_name("bridge", l) + ".W", glorot(E, H, rng));
    params_.add(layer_name("bridge", l) + ".b", Tensor({H}));
  }
  if (c.attention) {
    params_.add("att.W_enc", glorot(E, H, rng));
    params_.add("att.W_dec", glorot(H, H, rng));
    params_.add("att.v", glorot(H, 1, rng));
  }
  params_.add("out.W", glorot(output_input_width(c), c.vocab_size, rng));
  params_.add("out.b", Tensor({c.vocab_size}));
  bind();
}

Seq2SeqModel::Seq2SeqModel(const Seq2SeqModel& other) : config_(other.config_), params_(other.params_) {
  bind();
}

Seq2SeqModel& Seq2SeqModel::operator=(const Seq2SeqModel& other) {
  if (this != &other) {
    config_ = other.config_;
    params_ = other.params_;
    bind();
  }
  return *this;
}

void Seq2SeqModel::bind() {
  const auto& c = config_;
  const std::size_t E = encoder_width(c);
  const std::size_t H = c.hidden;
  encoder_ = {};
  decoder_.clear();
  bridge_W_.clear();
  bridge_b_.clear();
  src_embed_ = &params_.get("embed.src");
  tgt_embed_ = &params_.get("embed.tgt");
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t in = l == 0 ? c.embed_dim : E;
    encoder_.forward.push_back(CellParams::bind(params_, layer_name("enc.fwd", l), c.cell, in, H));
    if (c.bidirectional) {
      encoder_.backward.push_back(CellParams::bind(params_, layer_name("enc.bwd", l), c.cell, in, H));
    }
    decoder_.push_back(CellParams::bind(params_, layer_name("dec", l), c.cell, l == 0 ? c.embed_dim : H, H));
    bridge_W_.push_back(&params_.get(layer_name("bridge", l) + ".W"));
    bridge_b_.push_back(&params_.get(layer_name("bridge", l) + ".b"));
  }
  if (c.attention) {
    att_enc_ = &params_.get("att.W_enc");
    att_dec_ = &params_.get("att.W_dec");
    att_v_ = &params_.get("att.v");
  } else {
    att_enc_ = att_dec_ = att_v_ = nullptr;
  }
  out_W_ = &params_.get("out.W");
  out_b_ = &params_.get("out.b");
}

ParameterSnapshot Seq2SeqModel::snapshot() const {
  ParameterSnapshot snap;
  for (const auto& [name, p] : params_) snap.emplace(name, p.value);
  return snap;
}

void Seq2SeqModel::restore(const ParameterSnapshot& snap) {
  for (auto& [name, p] : params_) {
    const Tensor& t = snap.at(name);
    if (t.shape() != p.value.shape()) throw ShapeError("snapshot shape mismatch for " + name);
    p.value = t;
  }
}

void Seq2SeqModel::set_embeddings(const Tensor& table) {
  if (table.shape() != src_embed_->value.shape()) {
    throw ShapeError("embedding table " + shape_string(table.shape()) + " vs model " +
                     shape_string(src_embed_->value.shape()));
  }
  src_embed_->value = table;
  tgt_embed_->value = table;
}

// ---------------------------------------------------------------------------
// Forward pieces

EncoderStates run_encoder(Tape& tape, const IdSeq& source, Seq2SeqModel& model,
                          const DropoutContext& dropout) {
  for (auto id : source) {
    if (id >= model.config().vocab_size) throw std::invalid_argument("source id out of vocabulary range");
  }
  return encode_bidirectional(tape, source, model.encoder(), model.source_embeddings(), dropout);
}

std::vector<CellState> init_decoder(Tape& tape, const EncoderStates& enc, Seq2SeqModel& model) {
  const std::size_t layers = model.config().layers;
  if (enc.layer_summaries.size() != layers) {
    throw ConfigError("encoder produced " + std::to_string(enc.layer_summaries.size()) +
                      " layer summaries for a " + std::to_string(layers) + "-layer decoder");
  }
  std::vector<CellState> states(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    states[l].h = tape.tanh(tape.affine(enc.layer_summaries[l], model.bridge_weight(l), &model.bridge_bias(l)));
    if (model.config().cell == CellKind::kLstm) {
      states[l].c = tape.constant(std::vector<double>(model.config().hidden, 0.0));
    }
  }
  return states;
}

AttentionKeys attention_keys(Tape& tape, const EncoderStates& enc, Seq2SeqModel& model) {
  AttentionKeys k;
  if (!model.config().attention) return k;
  k.keys.reserve(enc.states.size());
  for (Var s : enc.states) k.keys.push_back(tape.affine(s, model.attention_encoder_weight()));
  return k;
}

Attention attention_context(Tape& tape, Var decoder_hidden, const EncoderStates& enc,
                            const AttentionKeys& keys, Seq2SeqModel& model) {
  if (!model.config().attention) throw std::logic_error("attention_context on a non-attention model");
  if (keys.keys.size() != enc.states.size()) throw ShapeError("attention keys do not match encoder states");
  const Var query = tape.affine(decoder_hidden, model.attention_decoder_weight());
  std::vector<Var> scores;
  scores.reserve(keys.keys.size());
  for (Var key : keys.keys) {
    scores.push_back(tape.affine(tape.tanh(tape.add(key, query)), model.attention_vector()));
  }
  Attention a;
  a.weights = tape.softmax(tape.concat(scores));
  a.context = tape.weighted_sum(a.weights, enc.states);
  return a;
}

Attention attention_context(Tape& tape, Var decoder_hidden, const EncoderStates& enc,
                            Seq2SeqModel& model) {
  return attention_context(tape, decoder_hidden, enc, attention_keys(tape, enc, model), model);
}

DecoderStep decode_step(Tape& tape, std::size_t prev_id, const std::vector<CellState>& states,
                        const EncoderStates& enc, const AttentionKeys& keys, Seq2SeqModel& model,
                        const DropoutContext& dropout) {
  const auto& c = model.config();
  if (prev_id >= c.vocab_size) {
    throw std::invalid_argument("decoder input id " + std::to_string(prev_id) + " outside vocabulary");
  }
  if (states.size() != c.layers) throw ConfigError("decoder state count does not match layer count");
  DecoderStep step;
  step.states.resize(c.layers);
  Var x = tape.lookup(model.target_embeddings(), prev_id);
  for (std::size_t l = 0; l < c.layers; ++l) {
    x = dropout.apply(tape, x);
    step.states[l] = cell_step(tape, x, states[l], model.decoder()[l]);
    x = step.states[l].h;
  }
  Var features = x;
  if (c.attention) {
    step.attention = attention_context(tape, x, enc, keys, model);
    features = tape.concat(x, step.attention->context);
  }
  features = dropout.apply(tape, features);
  step.logits = tape.affine(features, model.output_weight(), &model.output_bias());
  return step;
}

Var pair_loss(Tape& tape, const EncodedPair& pair, Seq2SeqModel& model, const DropoutContext& dropout) {
  if (pair.source.empty()) throw std::invalid_argument("pair_loss: empty source");
  const EncoderStates enc = run_encoder(tape, pair.source, model, dropout);
  const AttentionKeys keys = attention_keys(tape, enc, model);
  std::vector<CellState> states = init_decoder(tape, enc, model);

  std::vector<Var> terms;
  terms.reserve(pair.target.size() + 1);
  std::size_t prev = Vocabulary::kBos;
  for (std::size_t i = 0; i <= pair.target.size(); ++i) {
    const std::size_t gold = i < pair.target.size() ? pair.target[i] : Vocabulary::kEos;
    DecoderStep step = decode_step(tape, prev, states, enc, keys, model, dropout);
    terms.push_back(tape.cross_entropy(step.logits, gold));
    states = std::move(step.states);
    prev = gold;
  }
  return tape.mean(terms);
}

std::vector<double> pair_losses(Seq2SeqModel& model, std::span<const EncodedPair> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& pair : batch) {
    Tape tape;
    out.push_back(tape.scalar(pair_loss(tape, pair, model)));
  }
  return out;
}

double accumulate_batch_gradient(Seq2SeqModel& model, std::span<const EncodedPair> batch,
                                 const BatchOptions& options) {
  if (batch.empty()) throw std::invalid_argument("train_batch: empty batch");
  const double p = options.mode == Mode::kTrain ? model.config().dropout : 0.0;
  const double weight = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    Rng rng(options.seed, k);
    const DropoutContext dropout{p, p > 0.0 ? &rng : nullptr};
    Tape tape;
    const Var loss = pair_loss(tape, batch[k], model, dropout);
    const double value = tape.scalar(loss);
    if (!std::isfinite(value)) throw TrainingDiverged("non-finite training loss");
    total += value;
    tape.backward(loss, weight);
  }
  return total * weight;
}

double train_batch(Seq2SeqModel& model, std::span<const EncodedPair> batch, AdamState& adam,
                   const BatchOptions& options) {
  model.params().zero_grad();
  const double loss = accumulate_batch_gradient(model, batch, options);
  if (options.clip_norm > 0.0) clip_grad_norm(model.params(), options.clip_norm);
  adam_step(model.params(), adam);
  return loss;
}

IdSeq greedy_decode(Seq2SeqModel& model, const IdSeq& source, std::size_t max_len) {
  if (source.empty()) throw std::invalid_argument("greedy_decode: empty source");
  if (max_len == 0) max_len = model.config().max_decode_len;
  Tape tape;
  const EncoderStates enc = run_encoder(tape, source, model);
  const AttentionKeys keys = attention_keys(tape, enc, model);
  std::vector<CellState> states = init_decoder(tape, enc, model);
  IdSeq out;
  std::size_t prev = Vocabulary::kBos;
  while (out.size() < max_len) {
    DecoderStep step = decode_step(tape, prev, states, enc, keys, model);
    const auto& logits = tape.value(step.logits);
    std::size_t best = 0;
    for (std::size_t v = 1; v < logits.size(); ++v) {
      if (logits[v] > logits[best]) best = v;
    }
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
    states = std::move(step.states);
    prev = best;
  }
  return out;
}

std::vector<IdSeq> greedy_decode_all(Seq2SeqModel& model, std::span<const IdSeq> sources, int threads) {
  std::vector<IdSeq> out(sources.size());
  const auto n = static_cast<std::ptrdiff_t>(sources.size());
  // Decoding only reads parameters; each sentence owns its tape.
#pragma omp parallel for num_threads(std::max(1, threads)) schedule(dynamic) if (threads > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = greedy_decode(model, sources[static_cast<std::size_t>(i)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

std::size_t best_epoch(std::span<const double> dev_bleu) {
  if (dev_bleu.empty()) return 0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < dev_bleu.size(); ++i) {
    if (dev_bleu[i] > dev_bleu[best]) best = i;
  }
  return best + 1;
}

std::vector<EncodedPair> encode_corpus(const PairCorpus& corpus, const Vocabulary& vocab) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.pairs) out.push_back({encode(p.source, vocab), encode(p.target, vocab)});
  return out;
}

DevSet make_dev_set(const PairCorpus& corpus, const Vocabulary& vocab) {
  DevSet dev;
  for (const auto& p : corpus.pairs) {
    dev.sources.push_back(encode(p.source, vocab));
    dev.references.push_back(p.target);
  }
  return dev;
}

TrainResult train_loop(Seq2SeqModel& model, std::span<const EncodedPair> train, const DevSet& dev,
                       const Vocabulary& vocab, const TrainSchedule& schedule) {
  if (train.empty()) throw std::invalid_argument("train_loop: empty training set");
  if (schedule.batch_size == 0) throw std::invalid_argument("train_loop: batch size must be positive");
  AdamState adam(model.params(), AdamConfig{.lr = schedule.lr});
  TrainResult result;
  ParameterSnapshot best_params = model.snapshot();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EncodedPair> batch;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= schedule.epochs; ++epoch) {
    Rng shuffle_rng(schedule.seed, 0x5100 + epoch);
    shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      for (std::size_t k = start; k < end; ++k) batch.push_back(train[order[k]]);
      BatchOptions opts{Mode::kTrain, Rng::mix(schedule.seed ^ Rng::mix(++step)), schedule.clip_norm};
      loss_sum += train_batch(model, batch, adam, opts);
      ++batches;
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), 0.0};
    if (!dev.sources.empty()) {
      std::vector<TokenSeq> hyps;
      hyps.reserve(dev.sources.size());
      for (const auto& src : dev.sources) hyps.push_back(decode(greedy_decode(model, src), vocab));
      rec.dev_bleu = bleu_corpus(hyps, dev.references).bleu;
    }
    const bool improved = result.history.empty() || rec.dev_bleu > result.best_dev_bleu;
    result.history.push_back(rec);
    if (improved) {
      result.best_epoch = epoch;
      result.best_dev_bleu = rec.dev_bleu;
      best_params = model.snapshot();
    }
    if (schedule.on_epoch) schedule.on_epoch(rec, improved, model);
  }
  model.restore(best_params);
  return result;
}

}  // namespace evpred
