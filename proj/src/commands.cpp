#include "evpred/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "evpred/errors.hpp"
#include "evpred/eval.hpp"
#include "evpred/gradcheck.hpp"
#include "evpred/kernels.hpp"

namespace evpred {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  return out;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines,
                 const std::vector<std::size_t>& which) {
  auto out = open_out(path);
  for (auto i : which) out << lines[i] << '\n';
}

std::vector<TokenSeq> tokenize_lines(const std::vector<std::string>& lines) {
  std::vector<TokenSeq> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.push_back(tokenize(lines[i]));
    } catch (const FormatError& e) {
      throw FormatError(e.what(), i + 1);
    }
  }
  return out;
}

}  // namespace

SplitCounts cmd_split(const SplitOptions& options) {
  const auto lines = read_lines(options.input);
  {
    // Validates every line (TAB present, both sides non-empty).
    std::ifstream in(options.input, std::ios::binary);
    (void)read_pair_corpus(in);
  }
  const SplitIndices idx = options.mode == SplitMode::kDescript
                               ? split_descript_indices(lines.size())
                               : split_random_indices(lines.size(), options.fractions, options.seed);
  fs::create_directories(options.out_dir);
  const std::string stem = options.input.stem().string();
  write_lines(options.out_dir / (stem + ".train.tsv"), lines, idx.train);
  write_lines(options.out_dir / (stem + ".dev.tsv"), lines, idx.dev);
  write_lines(options.out_dir / (stem + ".test.tsv"), lines, idx.test);
  SplitCounts counts{idx.train.size(), idx.dev.size(), idx.test.size()};
  auto out = open_out(options.out_dir / (stem + ".counts"));
  out << "total=" << lines.size() << "\ntrain=" << counts.train << "\ndev=" << counts.dev
      << "\ntest=" << counts.test << '\n';
  return counts;
}

TrainOutcome cmd_train(const RunConfig& config, std::ostream& log) {
  if (config.train_path.empty()) throw std::invalid_argument("train: no training corpus given");
  kernels::set_num_threads(config.threads);
  const PairCorpus train = read_pair_corpus(fs::path(config.train_path));
  const PairCorpus dev = config.dev_path.empty() ? PairCorpus{} : read_pair_corpus(fs::path(config.dev_path));
  const Vocabulary vocab = Vocabulary::build(train, config.vocab_size);

  ModelConfig mc = config.model;
  mc.vocab_size = vocab.size();
  Seq2SeqModel model(mc, config.seed);
  if (!config.embeddings_path.empty()) {
    const auto emb = load_embeddings(fs::path(config.embeddings_path), vocab, mc.embed_dim, config.seed);
    model.set_embeddings(emb.table);
    log << "embeddings: " << emb.covered << " of " << vocab.size() << " rows from "
        << config.embeddings_path << '\n';
  }

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  vocab.save(out_dir / "vocab.txt");
  {
    RunConfig resolved = config;
    auto out = open_out(out_dir / "config.txt");
    out << serialize(resolved);
  }

  TrainOutcome outcome;
  outcome.checkpoint = out_dir / "model.ckpt";
  outcome.history = out_dir / "history.tsv";
  auto history = open_out(outcome.history);
  history << "epoch\ttrain_loss\tdev_bleu\n";
  history.flush();

  TrainSchedule schedule;
  schedule.epochs = config.epochs;
  schedule.batch_size = config.batch_size;
  schedule.lr = config.lr;
  schedule.seed = config.seed;
  schedule.clip_norm = config.clip_norm;
  const auto vocab_hash = vocab.hash();
  schedule.on_epoch = [&](const EpochRecord& rec, bool improved, const Seq2SeqModel& m) {
    history << rec.epoch << '\t' << format_double(rec.train_loss) << '\t' << format_double(rec.dev_bleu) << '\n';
    history.flush();
    if (improved) save_checkpoint(outcome.checkpoint, m, vocab_hash, rec.epoch);
    log << "epoch " << rec.epoch << " loss " << rec.train_loss << " dev_bleu " << rec.dev_bleu
        << (improved ? " *" : "") << '\n';
  };

  try {
    outcome.result = train_loop(model, encode_corpus(train, vocab), make_dev_set(dev, vocab), vocab, schedule);
  } catch (const TrainingDiverged& e) {
    outcome.diverged = true;
    outcome.message = e.what();
  }
  return outcome;
}

std::size_t cmd_predict(const PredictOptions& options) {
  Checkpoint meta;
  auto model = load_checkpoint(options.checkpoint, &meta);
  const fs::path vocab_path =
      options.vocab.empty() ? options.checkpoint.parent_path() / "vocab.txt" : options.vocab;
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  if (vocab.hash() != meta.vocab_hash || vocab.size() != meta.config.vocab_size) {
    throw IntegrityError("vocabulary " + vocab_path.string() + " does not match checkpoint " +
                         options.checkpoint.string());
  }

  const auto lines = read_lines(options.input);
  std::vector<IdSeq> sources;
  sources.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string src = lines[i].substr(0, lines[i].find('\t'));
    try {
      sources.push_back(encode(tokenize(src), vocab));
    } catch (const FormatError& e) {
      throw FormatError(e.what(), i + 1);
    }
  }

  std::vector<IdSeq> nonempty;
  for (const auto& s : sources) {
    if (!s.empty()) nonempty.push_back(s);
  }
  const auto decoded = greedy_decode_all(*model, nonempty, options.threads);

  auto out = open_out(options.output);
  std::size_t k = 0;
  for (const auto& s : sources) {
    if (!s.empty()) out << detokenize(decode(decoded[k++], vocab));
    out << '\n';
  }
  return sources.size();
}

MetricsReport cmd_evaluate(const EvaluateOptions& options, std::ostream& report) {
  std::vector<TokenSeq> predictions = tokenize_lines(read_lines(options.predictions));
  std::vector<TokenSeq> references;
  std::vector<TokenSeq> sources;
  if (!options.pairs.empty()) {
    const PairCorpus pairs = read_pair_corpus(options.pairs);
    for (const auto& p : pairs.pairs) {
      sources.push_back(p.source);
      references.push_back(p.target);
    }
  } else {
    if (options.references.empty()) throw std::invalid_argument("evaluate: --references or --pairs is required");
    references = tokenize_lines(read_lines(options.references));
    sources = options.sources.empty() ? std::vector<TokenSeq>(references.size())
                                      : tokenize_lines(read_lines(options.sources));
  }
  if (predictions.size() != references.size() || sources.size() != references.size()) {
    throw std::invalid_argument("evaluate: misaligned inputs (" + std::to_string(predictions.size()) +
                                " predictions, " + std::to_string(references.size()) + " references, " +
                                std::to_string(sources.size()) + " sources)");
  }

  MetricsReport m;
  m.bleu = bleu_corpus(predictions, references, kBleuMaxOrder, options.threads);
  if (!options.pairs.empty() || !options.sources.empty()) {
    m.buckets = bleu_by_length_bucket(sources, predictions, references);
  }
  if (!options.inventory.empty()) {
    const auto inventory = ParaphraseInventory::read(options.inventory);
    m.accuracy = paraphrase_accuracy(sources, predictions, references, inventory);
    const fs::path near = options.near_misses.empty()
                              ? fs::path(options.predictions.string() + ".near_misses.tsv")
                              : options.near_misses;
    auto out = open_out(near);
    write_near_misses(out, m.accuracy->near_misses);
  }
  write_metrics(report, m);
  return m;
}

std::string variant_name(CellKind cell, std::size_t layers, bool attention) {
  return to_string(cell) + "-" + std::to_string(layers) + "-" + (attention ? "att" : "nonatt");
}

std::vector<GradcheckLine> cmd_gradcheck(const GradcheckOptions& options, std::ostream& out) {
  constexpr std::size_t kHidden = 8;
  constexpr std::size_t kVocab = 20;
  constexpr std::size_t kMaxLen = 5;
  std::vector<GradcheckLine> lines;
  for (CellKind cell : {CellKind::kLstm, CellKind::kGru}) {
    for (std::size_t layers : {std::size_t{1}, std::size_t{2}}) {
      for (bool attention : {false, true}) {
        const std::string name = variant_name(cell, layers, attention);
        if (!options.variant.empty() && options.variant != name) continue;
        ModelConfig mc;
        mc.cell = cell;
        mc.layers = layers;
        mc.attention = attention;
        mc.hidden = kHidden;
        mc.embed_dim = kHidden;
        mc.vocab_size = kVocab;
        mc.max_decode_len = kMaxLen;
        Seq2SeqModel model(mc, options.seed);

        const std::size_t variant_index =
            (cell == CellKind::kGru ? 4 : 0) + (layers - 1) * 2 + (attention ? 1 : 0);
        Rng rng(options.seed, 0x6C00 + variant_index);
        std::vector<EncodedPair> batch(2);
        for (auto& p : batch) {
          p.source.resize(1 + rng.below(kMaxLen));
          p.target.resize(1 + rng.below(kMaxLen));
          for (auto& id : p.source) id = Vocabulary::kNumSpecials + rng.below(kVocab - Vocabulary::kNumSpecials);
          for (auto& id : p.target) id = Vocabulary::kNumSpecials + rng.below(kVocab - Vocabulary::kNumSpecials);
        }
        const LossClosure loss = [&](bool backprop) {
          if (!backprop) {
            const auto per_pair = pair_losses(model, batch);
            return (per_pair[0] + per_pair[1]) / 2.0;
          }
          const double l = accumulate_batch_gradient(model, batch, BatchOptions{Mode::kInfer, 0, 0.0});
          if (options.corrupt) {
            for (double& g : model.output_bias().grad.values()) g *= 1.01;
          }
          return l;
        };
        GradCheckOptions gc;
        gc.seed = options.seed;
        const auto r = gradient_check(loss, model.params(), gc);
        GradcheckLine line{name, r.max_relative_error, r.worst_parameter, r.max_relative_error < options.threshold};
        out << name << " max_rel_error=" << format_double(r.max_relative_error) << " worst=" << r.worst_parameter
            << " coords=" << r.coordinates_checked << ' ' << (line.passed ? "PASS" : "FAIL") << '\n';
        lines.push_back(std::move(line));
      }
    }
  }
  if (lines.empty()) throw std::invalid_argument("gradcheck: unknown variant '" + options.variant + "'");
  return lines;
}

SynthOutputs cmd_synth(const SyntheticSpec& spec, const fs::path& out_dir) {
  const SyntheticCorpus synth = generate_synthetic(spec);
  fs::create_directories(out_dir);
  SynthOutputs outputs{out_dir / "corpus.tsv", out_dir / "inventory.tsv"};
  {
    auto out = open_out(outputs.corpus);
    write_pair_corpus(out, synth.corpus);
  }
  {
    auto out = open_out(outputs.inventory);
    synth.inventory.write(out);
  }
  return outputs;
}

}  // namespace evpred
