// evpred: command-line front end (split, train, predict, evaluate, gradcheck, synth).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "evpred/commands.hpp"
#include "evpred/errors.hpp"

namespace {

using namespace evpred;

// Model/training flags that mirror RunConfig keys. Stored as strings so that
// only flags actually given override the config file.
struct TrainFlags {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_override(CLI::App* app, TrainFlags& flags, const std::string& flag, const std::string& key,
                  const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); }, help);
}

int run(int argc, char** argv) {
  CLI::App app{"Sequence-to-sequence event prediction toolkit"};
  app.require_subcommand(1);

  // split
  SplitOptions split_opts;
  std::string split_mode = "descript";
  std::vector<double> fractions;
  auto* split = app.add_subcommand("split", "Split a pair corpus into train/dev/test files");
  split->add_option("--input", split_opts.input, "Pair corpus (source<TAB>target)")->required();
  split->add_option("--out-dir", split_opts.out_dir, "Output directory")->required();
  split->add_option("--mode", split_mode, "descript | random")->check(CLI::IsMember({"descript", "random"}));
  split->add_option("--fractions", fractions, "Train,dev,test fractions for random mode")->delimiter(',')->expected(3);
  split->add_option("--seed", split_opts.seed, "Shuffle seed for random mode");

  // train
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "Train a model and keep the best dev-BLEU checkpoint");
  train->add_option("--config", train_flags.config_file, "key=value run configuration");
  add_override(train, train_flags, "--train", "train", "Training pair corpus");
  add_override(train, train_flags, "--dev", "dev", "Development pair corpus");
  add_override(train, train_flags, "--out", "output_dir", "Output directory");
  add_override(train, train_flags, "--cell", "cell", "lstm | gru");
  add_override(train, train_flags, "--layers", "layers", "Encoder/decoder depth");
  add_override(train, train_flags, "--attention", "attention", "on | off");
  add_override(train, train_flags, "--bidirectional", "bidirectional", "on | off");
  add_override(train, train_flags, "--hidden", "hidden", "Hidden units (default 300)");
  add_override(train, train_flags, "--embed-dim", "embed_dim", "Embedding dimension (default 300)");
  add_override(train, train_flags, "--dropout", "dropout", "Dropout probability (default 0.5)");
  add_override(train, train_flags, "--batch", "batch_size", "Mini-batch size (default 64)");
  add_override(train, train_flags, "--lr", "lr", "Adam learning rate");
  add_override(train, train_flags, "--epochs", "epochs", "Training epochs (default 100)");
  add_override(train, train_flags, "--seed", "seed", "Random seed");
  add_override(train, train_flags, "--vocab-size", "vocab_size", "Vocabulary cap");
  add_override(train, train_flags, "--embeddings", "embeddings", "Pretrained embeddings (text format)");
  add_override(train, train_flags, "--max-decode-len", "max_decode_len", "Greedy decoding length cap");
  add_override(train, train_flags, "--clip-norm", "clip_norm", "Global gradient norm clip (0 = off)");
  add_override(train, train_flags, "--threads", "threads", "Kernel threads (1 = deterministic serial)");

  // predict
  PredictOptions predict_opts;
  auto* predict = app.add_subcommand("predict", "Greedy-decode one prediction per input line");
  predict->add_option("--checkpoint", predict_opts.checkpoint)->required();
  predict->add_option("--vocab", predict_opts.vocab, "Defaults to vocab.txt beside the checkpoint");
  predict->add_option("--input", predict_opts.input, "Source lines or pair corpus")->required();
  predict->add_option("--output", predict_opts.output)->required();
  predict->add_option("--threads", predict_opts.threads, "Sentences decoded concurrently");

  // evaluate
  EvaluateOptions eval_opts;
  std::string report_path;
  auto* evaluate = app.add_subcommand("evaluate", "Corpus BLEU, length buckets, paraphrase accuracy");
  evaluate->add_option("--predictions", eval_opts.predictions)->required();
  evaluate->add_option("--references", eval_opts.references, "One reference sentence per line");
  evaluate->add_option("--sources", eval_opts.sources, "One source sentence per line");
  evaluate->add_option("--pairs", eval_opts.pairs, "Pair corpus supplying sources and references");
  evaluate->add_option("--inventory", eval_opts.inventory, "Gold paraphrase inventory");
  evaluate->add_option("--near-misses", eval_opts.near_misses, "Near-miss export path");
  evaluate->add_option("--report", report_path, "Write the report here instead of stdout");
  evaluate->add_option("--threads", eval_opts.threads, "Shards for n-gram tallies");

  // gradcheck
  GradcheckOptions gc_opts;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all model variants");
  gradcheck->add_option("--variant", gc_opts.variant, "e.g. lstm-2-att, gru-1-nonatt");
  gradcheck->add_option("--seed", gc_opts.seed);
  gradcheck->add_flag("--corrupt-gradient", gc_opts.corrupt, "Self-test: perturb one analytic gradient");

  // synth
  SyntheticSpec synth_spec;
  std::string synth_dir;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scripted-event corpus and inventory");
  synth->add_option("--out-dir", synth_dir)->required();
  synth->add_option("--scenarios", synth_spec.num_scenarios);
  synth->add_option("--events", synth_spec.events_per_scenario);
  synth->add_option("--paraphrases", synth_spec.paraphrases_per_event);
  synth->add_option("--chains", synth_spec.chains_per_scenario, "Chains per scenario (0 = one per style and flavor)");
  synth->add_option("--vocab-pool", synth_spec.vocab_pool);
  synth->add_flag("--ambiguous", synth_spec.ambiguous, "Two context-selected successors per event");
  synth->add_option("--seed", synth_spec.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*split) {
    split_opts.mode = split_mode == "random" ? SplitMode::kRandom : SplitMode::kDescript;
    if (!fractions.empty()) split_opts.fractions = {fractions[0], fractions[1], fractions[2]};
    const auto c = cmd_split(split_opts);
    std::cout << "train=" << c.train << " dev=" << c.dev << " test=" << c.test << '\n';
    return kExitOk;
  }
  if (*train) {
    RunConfig config;
    if (!train_flags.config_file.empty()) config = load_run_config(train_flags.config_file);
    for (const auto& [key, value] : train_flags.overrides) set_config_value(config, key, value);
    const auto outcome = cmd_train(config, std::cerr);
    if (outcome.diverged) {
      std::cerr << "training diverged: " << outcome.message << "; last good checkpoint kept at "
                << outcome.checkpoint << '\n';
      return kExitFailure;
    }
    std::cout << "best_epoch=" << outcome.result.best_epoch
              << " best_dev_bleu=" << outcome.result.best_dev_bleu << '\n';
    return kExitOk;
  }
  if (*predict) {
    cmd_predict(predict_opts);
    return kExitOk;
  }
  if (*evaluate) {
    if (report_path.empty()) {
      cmd_evaluate(eval_opts, std::cout);
    } else {
      std::ostringstream report;
      cmd_evaluate(eval_opts, report);
      std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
      if (!out) throw std::invalid_argument("cannot write " + report_path);
      out << report.str();
    }
    return kExitOk;
  }
  if (*gradcheck) {
    const auto lines = cmd_gradcheck(gc_opts, std::cout);
    for (const auto& l : lines) {
      if (!l.passed) return kExitFailure;
    }
    return kExitOk;
  }
  if (*synth) {
    const auto out = cmd_synth(synth_spec, synth_dir);
    std::cout << out.corpus.string() << '\n' << out.inventory.string() << '\n';
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const evpred::IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << '\n';
    return evpred::kExitIntegrity;
  } catch (const evpred::TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return evpred::kExitFailure;
  } catch (const evpred::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return evpred::kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return evpred::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
