#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "evpred/seq2seq.hpp"

namespace evpred {

/// Everything needed to reproduce a training run. Serialized as flat
/// `key=value` lines in a fixed key order; `#` starts a comment line.
struct RunConfig {
  std::string train_path;
  std::string dev_path;
  std::string output_dir = "run";
  std::string embeddings_path;  // empty: random initialization

  ModelConfig model;
  double lr = 0.001;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::uint64_t seed = 1;
  std::size_t vocab_size = Vocabulary::kWikiHowMaxSize;
  double clip_norm = 0.0;
  int threads = 1;

  bool operator==(const RunConfig&) const = default;
};

std::string serialize(const RunConfig& config);
/// Applies every key in `text` on top of `base`. Unknown keys and bad values
/// throw ConfigError.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets one key; shared by the config parser and the CLI flag overrides.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

}  // namespace evpred
