#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evpred/config.hpp"
#include "evpred/synth.hpp"

namespace evpred {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;      // format or argument error
inline constexpr int kExitIntegrity = 3;  // checkpoint/vocabulary/inventory integrity
inline constexpr int kExitFailure = 4;    // divergence or failed check

enum class SplitMode { kDescript, kRandom };

struct SplitOptions {
  std::filesystem::path input;
  std::filesystem::path out_dir;
  SplitMode mode = SplitMode::kDescript;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::uint64_t seed = 1;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};

/// Writes <stem>.train.tsv, <stem>.dev.tsv, <stem>.test.tsv and <stem>.counts
/// into out_dir. Lines are copied verbatim after validation.
SplitCounts cmd_split(const SplitOptions& options);

struct TrainOutcome {
  TrainResult result;
  std::filesystem::path checkpoint;
  std::filesystem::path history;
  bool diverged = false;
  std::string message;
};

/// Trains per `config`, writing into config.output_dir: vocab.txt, config.txt
/// (resolved), history.tsv (epoch, train loss, dev BLEU; appended every epoch)
/// and model.ckpt (rewritten whenever dev BLEU improves).
TrainOutcome cmd_train(const RunConfig& config, std::ostream& log);

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path vocab;  // default: vocab.txt next to the checkpoint
  std::filesystem::path input;  // pair corpus or plain source lines
  std::filesystem::path output;
  int threads = 1;
};

/// One space-joined prediction per input line. Throws IntegrityError when the
/// vocabulary hash differs from the checkpoint's.
std::size_t cmd_predict(const PredictOptions& options);

struct EvaluateOptions {
  std::filesystem::path predictions;
  std::filesystem::path references;
  std::filesystem::path sources;
  std::filesystem::path pairs;  // alternative to references+sources
  std::filesystem::path inventory;
  std::filesystem::path near_misses;  // default: <predictions>.near_misses.tsv
  int threads = 1;
};

MetricsReport cmd_evaluate(const EvaluateOptions& options, std::ostream& report);

struct GradcheckOptions {
  std::string variant;  // e.g. "lstm-2-att"; empty runs all eight
  bool corrupt = false; // perturbs one analytic gradient (harness self-test)
  std::uint64_t seed = 7;
  double threshold = 1e-4;
};

struct GradcheckLine {
  std::string variant;
  double max_relative_error = 0.0;
  std::string worst_parameter;
  bool passed = false;
};

std::string variant_name(CellKind cell, std::size_t layers, bool attention);

/// Central-difference check of every architecture variant at H=8, V=20 on a
/// two-pair batch with sources and targets of length <= 5.
std::vector<GradcheckLine> cmd_gradcheck(const GradcheckOptions& options, std::ostream& out);

struct SynthOutputs {
  std::filesystem::path corpus;
  std::filesystem::path inventory;
};

SynthOutputs cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace evpred
