#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evpred/corpus.hpp"

namespace evpred {

inline constexpr std::size_t kBleuMaxOrder = 4;

/// Sufficient statistics for corpus BLEU. Tallies from disjoint shards merge by
/// addition, in any order.
struct BleuTally {
  std::array<std::uint64_t, kBleuMaxOrder> matches{};
  std::array<std::uint64_t, kBleuMaxOrder> totals{};
  std::uint64_t candidate_length = 0;
  std::uint64_t reference_length = 0;

  void add(const TokenSeq& candidate, const TokenSeq& reference);
  BleuTally& operator+=(const BleuTally& other);
};

struct BleuReport {
  double bleu = 0.0;
  std::vector<double> precisions;  // p_1..p_N
  double brevity_penalty = 1.0;
  std::uint64_t candidate_length = 0;
  std::uint64_t reference_length = 0;
};

/// BLEU with uniform weights up to `max_order`, without smoothing: any zero
/// precision makes the score 0.
BleuReport bleu_from_tally(const BleuTally& tally, std::size_t max_order = kBleuMaxOrder);

/// Corpus BLEU: clipped n-gram matches and lengths are summed over the corpus
/// before forming ratios. Throws std::invalid_argument on a length mismatch.
BleuReport bleu_corpus(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references,
                       std::size_t max_order = kBleuMaxOrder, int threads = 1);

/// Add-one smoothed sentence BLEU, for diagnostics only.
double sentence_bleu_smoothed(const TokenSeq& candidate, const TokenSeq& reference);

enum class LengthBucket { kUpTo5 = 0, kUpTo10 = 1, kOver10 = 2 };
inline constexpr std::size_t kNumLengthBuckets = 3;

/// Disjoint source-length buckets [1,5], [6,10], [11,∞).
LengthBucket length_bucket(std::size_t source_length);
std::string bucket_name(LengthBucket b);

struct BucketReport {
  std::size_t pairs = 0;
  BleuReport bleu;
};

/// Corpus BLEU per source-length bucket; empty buckets are absent from the map.
std::map<LengthBucket, BucketReport> bleu_by_length_bucket(std::span<const TokenSeq> sources,
                                                          std::span<const TokenSeq> candidates,
                                                          std::span<const TokenSeq> references);

/// scenario -> sets of normalized (tokenized) event descriptions.
class ParaphraseInventory {
 public:
  struct Set {
    std::string scenario;
    std::string id;
    std::vector<TokenSeq> members;
  };

  /// Adds `sentence` to set (scenario, set_id). Throws IntegrityError if the
  /// normalized sentence already belongs to a different set of that scenario.
  void add(const std::string& scenario, const std::string& set_id, const TokenSeq& sentence);

  /// `scenario<TAB>set_id<TAB>sentence` lines.
  static ParaphraseInventory read(std::istream& in);
  static ParaphraseInventory read(const std::filesystem::path& path);
  void write(std::ostream& out) const;

  /// The set containing `sentence`; throws IntegrityError when the sentence is
  /// in sets of two different scenarios.
  const Set* find(const TokenSeq& sentence) const;

  const std::vector<Set>& sets() const noexcept { return sets_; }
  std::size_t num_sets() const noexcept { return sets_.size(); }
  std::size_t num_sets(const std::string& scenario) const;
  std::vector<std::string> scenarios() const;
  bool empty() const noexcept { return sets_.empty(); }

 private:
  std::vector<Set> sets_;
  std::map<std::pair<std::string, std::string>, std::size_t> set_index_;
  // sentence -> indices of sets containing it (one per scenario at most)
  std::map<TokenSeq, std::vector<std::size_t>> member_index_;
};

struct NearMiss {
  TokenSeq source;
  TokenSeq target;
  TokenSeq predicted;
};

struct AccuracyReport {
  std::size_t evaluated_pairs = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<NearMiss> near_misses;
};

/// A prediction is correct when it is token-identical to some member of the
/// gold set containing its target. Pairs whose target is in no set are skipped.
AccuracyReport paraphrase_accuracy(std::span<const TokenSeq> sources,
                                   std::span<const TokenSeq> predictions,
                                   std::span<const TokenSeq> targets,
                                   const ParaphraseInventory& inventory);

/// Pairs whose target belongs to some gold set, in corpus order.
PairCorpus select_gold_subset(const PairCorpus& pairs, const ParaphraseInventory& inventory);

void write_near_misses(std::ostream& out, std::span<const NearMiss> misses);

struct MetricsReport {
  BleuReport bleu;
  std::map<LengthBucket, BucketReport> buckets;
  std::optional<AccuracyReport> accuracy;
};

/// Key=value report with a fixed key order.
void write_metrics(std::ostream& out, const MetricsReport& report);
std::string format_double(double v);

}  // namespace evpred
