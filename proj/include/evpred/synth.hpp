#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evpred/corpus.hpp"
#include "evpred/eval.hpp"

namespace evpred {

/// Scripted event chains with deterministic successors.
///
/// Each scenario owns `events_per_scenario` events arranged in one cycle (its
/// successor permutation). An event is a fixed run of core words; its
/// `paraphrases_per_event` surface variants append one style word shared by all
/// events. A chain keeps one style and walks the cycle, so a pair's target is
/// fully determined by its source, and held-out pairs are predictable from the
/// event and style seen separately in training. With `ambiguous` set, each
/// scenario has two successor permutations selected by a flavor word that
/// prefixes every sentence of the chain.
struct SyntheticSpec {
  std::size_t num_scenarios = 5;
  std::size_t events_per_scenario = 10;
  std::size_t paraphrases_per_event = 3;
  /// 0: one chain per (style, flavor), so no pair occurs twice. Larger values
  /// repeat chains from later start positions.
  std::size_t chains_per_scenario = 0;
  std::size_t vocab_pool = 80;
  /// Sentence length including the style word, excluding any flavor word.
  std::size_t min_words = 2;
  std::size_t max_words = 4;
  bool ambiguous = false;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t num_chains() const;
};

struct SyntheticPairInfo {
  std::size_t scenario;
  std::size_t flavor;
  std::size_t source_event;
  std::size_t target_event;
};

struct SyntheticCorpus {
  PairCorpus corpus;
  ParaphraseInventory inventory;
  /// successors[scenario][flavor][event]
  std::vector<std::vector<std::vector<std::size_t>>> successors;
  std::vector<SyntheticPairInfo> info;  // parallel to corpus.pairs
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

std::string scenario_name(std::size_t scenario);
std::string event_set_id(std::size_t event);

}  // namespace evpred
