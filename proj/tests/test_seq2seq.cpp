#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evpred/errors.hpp"
#include "evpred/gradcheck.hpp"
#include "evpred/seq2seq.hpp"

using namespace evpred;

namespace {

ModelConfig small_config(CellKind cell = CellKind::kLstm, std::size_t layers = 1, bool attention = false) {
  ModelConfig c;
  c.cell = cell;
  c.layers = layers;
  c.attention = attention;
  c.hidden = 6;
  c.embed_dim = 5;
  c.vocab_size = 20;
  c.dropout = 0.0;
  c.max_decode_len = 12;
  return c;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void zero_all(Seq2SeqModel& m) {
  for (auto& [name, p] : m.params()) p.value.fill(0.0);
}

// Output layer that always prefers `winner` regardless of the hidden state.
void force_output(Seq2SeqModel& m, std::size_t winner) {
  m.output_weight().value.fill(0.0);
  m.output_bias().value.fill(0.0);
  m.output_bias().value[winner] = 10.0;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("config validation") {
    auto c = small_config();
    c.hidden = 0;
    CHECK_THROWS_AS(Seq2SeqModel(c, 1), ConfigError);
    c = small_config();
    c.dropout = 1.0;
    CHECK_THROWS_AS(Seq2SeqModel(c, 1), ConfigError);
    c = small_config();
    c.vocab_size = 4;
    CHECK_THROWS_AS(Seq2SeqModel(c, 1), ConfigError);
  }

  TEST_CASE("defaults follow the published setup") {
    const ModelConfig c;
    CHECK(c.hidden == 300);
    CHECK(c.embed_dim == 300);
    CHECK(c.dropout == 0.5);
    CHECK(c.max_decode_len == 30);
  }

  TEST_CASE("parameter layout") {
    Seq2SeqModel m(small_config(CellKind::kGru, 2, true), 3);
    const auto& ps = m.params();
    for (const char* name : {"embed.src", "embed.tgt", "bridge.L0.W", "bridge.L1.b", "att.W_enc", "att.W_dec", "att.v",
                             "out.W", "out.b"})
      CHECK_MESSAGE(ps.contains(name), name);
    CHECK(m.output_weight().value.shape() == std::vector<std::size_t>{6 + 12, 20});
    CHECK(m.bridge_weight(0).value.shape() == std::vector<std::size_t>{12, 6});
    Seq2SeqModel plain(small_config(), 3);
    CHECK(plain.output_weight().value.shape() == std::vector<std::size_t>{6, 20});
    CHECK_FALSE(plain.params().contains("att.v"));
  }

  TEST_CASE("copies own their parameters") {
    Seq2SeqModel a(small_config(CellKind::kLstm, 2, true), 3);
    Seq2SeqModel b(a);
    b.output_bias().value[0] = 42.0;
    CHECK(a.output_bias().value[0] != 42.0);
    CHECK(&b.output_bias() == &b.params().get("out.b"));
    CHECK(b.decoder()[0].input_weights == &b.params().get("dec.L0.Wx"));
    Seq2SeqModel c(small_config(), 9);
    c = a;
    CHECK(c.snapshot() == a.snapshot());
    CHECK(&c.attention_vector() == &c.params().get("att.v"));
  }

  TEST_CASE("same seed, same initial parameters") {
    CHECK(Seq2SeqModel(small_config(), 5).snapshot() == Seq2SeqModel(small_config(), 5).snapshot());
    CHECK_FALSE(Seq2SeqModel(small_config(), 5).snapshot() == Seq2SeqModel(small_config(), 6).snapshot());
  }
}

TEST_SUITE("decoder init") {
  TEST_CASE("zero encoder summary gives a zero decoder state") {
    Seq2SeqModel m(small_config(CellKind::kLstm, 2), 1);
    for (auto& [name, p] : m.params())
      if (name.rfind("enc.", 0) == 0 || name == "embed.src") p.value.fill(0.0);
    Tape t;
    const auto enc = run_encoder(t, {4, 5, 6}, m);
    for (double v : t.value(enc.summary())) CHECK(v == 0.0);
    const auto states = init_decoder(t, enc, m);
    REQUIRE(states.size() == 2);
    for (const auto& s : states) {
      CHECK(t.width(s.h) == 6);
      for (double v : t.value(s.h)) CHECK(v == 0.0);
      for (double v : t.value(s.c)) CHECK(v == 0.0);
    }
  }

  TEST_CASE("random summary: tanh of the bridge affine map, per layer") {
    Seq2SeqModel m(small_config(CellKind::kGru, 2), 2);
    Rng rng(3);
    for (std::size_t l = 0; l < 2; ++l)
      for (double& v : m.bridge_bias(l).value.values()) v = rng.uniform(-0.5, 0.5);
    Tape t;
    const auto enc = run_encoder(t, {4, 9, 6, 7}, m);
    const auto states = init_decoder(t, enc, m);
    for (std::size_t l = 0; l < 2; ++l) {
      const auto& s = t.value(enc.layer_summaries[l]);
      const Tensor& W = m.bridge_weight(l).value;
      const Tensor& b = m.bridge_bias(l).value;
      for (std::size_t j = 0; j < 6; ++j) {
        double a = b[j];
        for (std::size_t i = 0; i < s.size(); ++i) a += s[i] * W.at(i, j);
        CHECK(std::abs(t.value(states[l].h)[j] - std::tanh(a)) < 1e-12);
      }
      CHECK_FALSE(states[l].c.valid());
    }
  }

  TEST_CASE("encoder/decoder layer mismatch is a config error") {
    Seq2SeqModel one(small_config(CellKind::kLstm, 1), 1);
    Seq2SeqModel two(small_config(CellKind::kLstm, 2), 1);
    Tape t;
    const auto enc = run_encoder(t, {4, 5}, one);
    CHECK_THROWS_AS(init_decoder(t, enc, two), ConfigError);
  }
}

TEST_SUITE("attention") {
  TEST_CASE("a single source position gets all the weight") {
    Seq2SeqModel m(small_config(CellKind::kLstm, 1, true), 4);
    Tape t;
    const auto enc = run_encoder(t, {7}, m);
    Rng rng(1);
    const auto att = attention_context(t, t.constant(random_vector(6, rng)), enc, m);
    CHECK(t.value(att.weights) == std::vector<double>{1.0});
    CHECK(t.value(att.context) == t.value(enc.states[0]));
  }

  TEST_CASE("identical encoder states get uniform weights") {
    Seq2SeqModel m(small_config(CellKind::kGru, 1, true), 4);
    Rng rng(2);
    Tape t;
    EncoderStates enc;
    const Var s = t.constant(random_vector(12, rng));
    enc.states = {s, s, s, s, s};
    enc.layer_summaries = {s};
    const auto att = attention_context(t, t.constant(random_vector(6, rng)), enc, m);
    for (double w : t.value(att.weights)) CHECK(w == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("random m = 4: weights equal softmax of recomputed scores") {
    Seq2SeqModel m(small_config(CellKind::kLstm, 2, true), 5);
    Rng rng(3);
    Tape t;
    const auto enc = run_encoder(t, {4, 8, 15, 16}, m);
    const auto hd = random_vector(6, rng);
    const auto att = attention_context(t, t.constant(hd), enc, m);
    const Tensor& We = m.attention_encoder_weight().value;
    const Tensor& Wd = m.attention_decoder_weight().value;
    const Tensor& v = m.attention_vector().value;
    std::vector<double> scores;
    for (Var sv : enc.states) {
      const auto& s = t.value(sv);
      double e = 0.0;
      for (std::size_t k = 0; k < 6; ++k) {
        double a = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) a += s[i] * We.at(i, k);
        for (std::size_t i = 0; i < 6; ++i) a += hd[i] * Wd.at(i, k);
        e += v[k] * std::tanh(a);
      }
      scores.push_back(e);
    }
    double mx = scores[0], z = 0.0;
    for (double e : scores) mx = std::max(mx, e);
    for (double e : scores) z += std::exp(e - mx);
    const auto& w = t.value(att.weights);
    double total = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(w[j] - std::exp(scores[j] - mx) / z) < 1e-12);
      CHECK(w[j] >= 0.0);
      total += w[j];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    std::vector<double> ctx(12, 0.0);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < 12; ++i) ctx[i] += w[j] * t.value(enc.states[j])[i];
    CHECK(max_abs_diff(ctx, t.value(att.context)) < 1e-12);
  }
}

TEST_SUITE("decode step") {
  TEST_CASE("logits span the target vocabulary with and without attention") {
    for (bool att : {false, true}) {
      Seq2SeqModel m(small_config(CellKind::kLstm, 2, att), 6);
      Tape t;
      const auto enc = run_encoder(t, {5, 6}, m);
      const auto keys = attention_keys(t, enc, m);
      const auto step = decode_step(t, Vocabulary::kBos, init_decoder(t, enc, m), enc, keys, m);
      CHECK(t.width(step.logits) == 20);
      CHECK(step.attention.has_value() == att);
      CHECK(step.states.size() == 2);
    }
  }

  TEST_CASE("unknown previous id is rejected") {
    Seq2SeqModel m(small_config(), 6);
    Tape t;
    const auto enc = run_encoder(t, {5, 6}, m);
    CHECK_THROWS_AS(decode_step(t, 20, init_decoder(t, enc, m), enc, {}, m), std::invalid_argument);
  }

  TEST_CASE("without attention, logits see the encoder only through its summary") {
    Seq2SeqModel plain(small_config(CellKind::kGru, 1, false), 7);
    Seq2SeqModel att(small_config(CellKind::kGru, 1, true), 7);
    for (Seq2SeqModel* m : {&plain, &att}) {
      Tape t;
      const auto enc = run_encoder(t, {5, 6, 7, 8}, *m);
      EncoderStates perturbed = enc;
      auto first = t.value(enc.states[0]);
      for (double& v : first) v += 0.5;
      perturbed.states[0] = t.constant(first);
      const auto init = init_decoder(t, enc, *m);
      const auto a = decode_step(t, Vocabulary::kBos, init, enc, attention_keys(t, enc, *m), *m);
      const auto b = decode_step(t, Vocabulary::kBos, init, perturbed, attention_keys(t, perturbed, *m), *m);
      if (m == &plain)
        CHECK(t.value(a.logits) == t.value(b.logits));
      else
        CHECK(max_abs_diff(t.value(a.logits), t.value(b.logits)) > 1e-6);
    }
  }

  TEST_CASE("teacher-forced loss of a 2-token target is the mean of 3 cross-entropies") {
    for (bool attn : {false, true}) {
      Seq2SeqModel m(small_config(CellKind::kLstm, 2, attn), 8);
      const EncodedPair pair{{5, 9, 11}, {7, 12}};
      Tape t;
      const double loss = t.scalar(pair_loss(t, pair, m));

      Tape u;
      const auto enc = run_encoder(u, pair.source, m);
      const auto keys = attention_keys(u, enc, m);
      auto states = init_decoder(u, enc, m);
      const std::size_t inputs[] = {Vocabulary::kBos, 7, 12};
      const std::size_t targets[] = {7, 12, Vocabulary::kEos};
      double sum = 0.0;
      for (int i = 0; i < 3; ++i) {
        const auto step = decode_step(u, inputs[i], states, enc, keys, m);
        sum += softmax_cross_entropy(u.value(step.logits), targets[i]).loss;
        states = step.states;
      }
      CHECK(std::abs(loss - sum / 3.0) < 1e-12);
    }
  }
}

TEST_SUITE("training") {
  std::vector<EncodedPair> random_pairs(std::size_t n, Rng& rng) {
    std::vector<EncodedPair> out;
    for (std::size_t k = 0; k < n; ++k) {
      EncodedPair p;
      for (std::size_t i = 0, len = 1 + rng.below(7); i < len; ++i) p.source.push_back(4 + rng.below(16));
      for (std::size_t i = 0, len = 1 + rng.below(7); i < len; ++i) p.target.push_back(4 + rng.below(16));
      out.push_back(p);
    }
    return out;
  }

  TEST_CASE("batch loss equals the mean of per-pair losses; each pair is unaffected by its batch mates") {
    Seq2SeqModel m(small_config(CellKind::kGru, 2, true), 9);
    Rng rng(10);
    const auto batch = random_pairs(6, rng);
    const auto each = pair_losses(m, batch);
    double mean = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const std::span<const EncodedPair> one(&batch[k], 1);
      CHECK(std::abs(pair_losses(m, one)[0] - each[k]) < 1e-6);
      mean += each[k] / static_cast<double>(batch.size());
    }
    m.params().zero_grad();
    const double batched = accumulate_batch_gradient(m, batch, {.mode = Mode::kInfer});
    CHECK(std::abs(batched - mean) < 1e-6);

    // The batch gradient is the mean of the single-pair gradients.
    const Tensor batch_grad = m.params().get("out.W").grad;
    Tensor summed(batch_grad.shape());
    for (const auto& pair : batch) {
      m.params().zero_grad();
      accumulate_batch_gradient(m, std::span<const EncodedPair>(&pair, 1), {.mode = Mode::kInfer});
      const Tensor& g = m.params().get("out.W").grad;
      for (std::size_t i = 0; i < g.size(); ++i) summed[i] += g[i] / static_cast<double>(batch.size());
    }
    CHECK(max_abs_diff(batch_grad.values(), summed.values()) < 1e-12);
  }

  TEST_CASE("lr = 0 leaves parameters unchanged and reports a finite loss") {
    Seq2SeqModel m(small_config(), 11);
    const auto before = m.snapshot();
    AdamState adam(m.params(), AdamConfig{.lr = 0.0});
    Rng rng(12);
    const auto batch = random_pairs(3, rng);
    const double loss = train_batch(m, batch, adam);
    CHECK(std::isfinite(loss));
    CHECK(m.snapshot() == before);
  }

  TEST_CASE("untrained model on V = 20 costs about ln 20 per position") {
    Seq2SeqModel m(small_config(), 13);
    const EncodedPair pair{{5, 6, 7}, {8, 9}};
    AdamState adam(m.params(), AdamConfig{});
    const double loss = train_batch(m, std::span<const EncodedPair>(&pair, 1), adam);
    CHECK(std::abs(loss - std::log(20.0)) < 0.25);
  }

  TEST_CASE("overfitting one pair drives the loss down and greedy decoding reproduces it") {
    for (bool attn : {false, true}) {
      auto c = small_config(CellKind::kLstm, 1, attn);
      c.hidden = 16;
      c.embed_dim = 8;
      Seq2SeqModel m(c, 14);
      const EncodedPair pair{{5, 6, 7, 8}, {9, 10, 11}};
      AdamState adam(m.params(), AdamConfig{.lr = 0.01});
      double loss = 0.0;
      for (int epoch = 0; epoch < 200; ++epoch) loss = train_batch(m, std::span<const EncodedPair>(&pair, 1), adam);
      CHECK(loss < 0.1);
      CHECK(greedy_decode(m, pair.source) == pair.target);
    }
  }

  TEST_CASE("gradients of a 2-layer BiLSTM attention model and a 1-layer GRU pass the finite-difference check") {
    for (auto [cell, layers, attn] : {std::tuple{CellKind::kLstm, std::size_t{2}, true},
                                      std::tuple{CellKind::kGru, std::size_t{1}, false}}) {
      auto c = small_config(cell, layers, attn);
      c.hidden = 8;
      c.embed_dim = 8;
      Seq2SeqModel m(c, 15);
      Rng rng(16);
      auto batch = random_pairs(2, rng);
      for (auto& p : batch) {
        p.source.resize(std::min<std::size_t>(p.source.size(), 5));
        p.target.resize(std::min<std::size_t>(p.target.size(), 5));
      }
      const LossClosure loss = [&](bool backprop) {
        if (!backprop) {
          const auto each = pair_losses(m, batch);
          return (each[0] + each[1]) / 2.0;
        }
        return accumulate_batch_gradient(m, batch, {.mode = Mode::kInfer});
      };
      CHECK(gradient_check(loss, m.params()).max_relative_error < 1e-4);
    }
  }

  TEST_CASE("best epoch: ties go to the earlier epoch") {
    const double history[] = {2.0, 3.1, 3.1, 2.8};
    CHECK(best_epoch(history) == 2);
    const double single[] = {0.0};
    CHECK(best_epoch(single) == 1);
  }

  TEST_CASE("one-epoch loop: best is epoch 1 and the history has one row") {
    Seq2SeqModel m(small_config(), 17);
    Rng rng(18);
    const auto train = random_pairs(4, rng);
    const auto vocab = Vocabulary::from_tokens({"<pad>", "<unk>", "<s>", "</s>", "a", "b", "c", "d", "e", "f", "g",
                                                "h", "i", "j", "k", "l", "m", "n", "o", "p"});
    DevSet dev;
    for (const auto& p : train) {
      dev.sources.push_back(p.source);
      dev.references.push_back(decode(p.target, vocab));
    }
    const auto result = train_loop(m, train, dev, vocab, TrainSchedule{.epochs = 1, .batch_size = 2});
    CHECK(result.history.size() == 1);
    CHECK(result.best_epoch == 1);
  }
}

TEST_SUITE("greedy decode") {
  TEST_CASE("a model that always prefers EOS emits nothing") {
    Seq2SeqModel m(small_config(), 19);
    force_output(m, Vocabulary::kEos);
    CHECK(greedy_decode(m, {5, 6}).empty());
  }

  TEST_CASE("a model that never emits EOS stops at max_len") {
    Seq2SeqModel m(small_config(CellKind::kGru, 1, true), 19);
    force_output(m, 9);
    CHECK(greedy_decode(m, {5, 6}, 5) == IdSeq(5, 9));
    CHECK(greedy_decode(m, {5, 6}).size() == 12);
  }

  TEST_CASE("ties go to the lowest id") {
    Seq2SeqModel m(small_config(), 19);
    force_output(m, 9);
    m.output_bias().value[7] = 10.0;
    CHECK(greedy_decode(m, {5}, 3) == IdSeq{7, 7, 7});
  }

  TEST_CASE("empty source is rejected") {
    Seq2SeqModel m(small_config(), 19);
    CHECK_THROWS_AS(greedy_decode(m, {}), std::invalid_argument);
  }

  TEST_CASE("deterministic, and threaded decoding matches serial") {
    Seq2SeqModel m(small_config(CellKind::kLstm, 2, true), 20);
    Rng rng(21);
    std::vector<IdSeq> sources;
    for (int k = 0; k < 16; ++k) {
      IdSeq s(1 + rng.below(8));
      for (auto& id : s) id = 4 + rng.below(16);
      sources.push_back(s);
    }
    const auto serial = greedy_decode_all(m, sources, 1);
    CHECK(greedy_decode_all(m, sources, 4) == serial);
    CHECK(greedy_decode(m, sources[3]) == serial[3]);
    CHECK(greedy_decode(m, sources[3]) == greedy_decode(m, sources[3]));
  }
}

TEST_SUITE("checkpoint") {
  std::filesystem::path temp_path(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

  TEST_CASE("round trip restores config, vocab hash and every tensor bit for bit") {
    Seq2SeqModel m(small_config(CellKind::kGru, 2, true), 22);
    const auto path = temp_path("evpred_ckpt_roundtrip.ckpt");
    save_checkpoint(path, m, 0xABCDEF0123456789ull, 7);
    Checkpoint meta;
    const auto back = load_checkpoint(path, &meta);
    CHECK(meta.config == m.config());
    CHECK(meta.vocab_hash == 0xABCDEF0123456789ull);
    CHECK(meta.epoch == 7);
    CHECK(back->snapshot() == m.snapshot());
    CHECK(greedy_decode(*back, {5, 6, 7}) == greedy_decode(m, {5, 6, 7}));
    std::filesystem::remove(path);
  }

  std::string read_all(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  void write_all(const std::filesystem::path& p, const std::string& data) {
    std::ofstream(p, std::ios::binary) << data;
  }

  TEST_CASE("a manifest that disagrees with the header is an integrity error") {
    Seq2SeqModel m(small_config(), 23);
    const auto path = temp_path("evpred_ckpt_manifest.ckpt");
    save_checkpoint(path, m, 1);
    std::string data = read_all(path);
    const auto pos = data.find("tensor out.b float64 1 20");
    REQUIRE(pos != std::string::npos);
    data.replace(pos, 25, "tensor out.b float64 1 19");
    write_all(path, data);
    CHECK_THROWS_AS(load_checkpoint(path), IntegrityError);
    std::filesystem::remove(path);
  }

  TEST_CASE("bad magic and truncation are format errors") {
    Seq2SeqModel m(small_config(), 23);
    const auto path = temp_path("evpred_ckpt_bad.ckpt");
    save_checkpoint(path, m, 1);
    const std::string data = read_all(path);
    write_all(path, data.substr(0, data.size() - 8));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    write_all(path, "EVPRED0" + data.substr(7));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    std::filesystem::remove(path);
  }
}
