#include "evpred/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "evpred/errors.hpp"

namespace evpred {
namespace {

using NgramCounts = std::map<std::span<const std::string>, std::uint64_t,
                             decltype([](std::span<const std::string> a, std::span<const std::string> b) {
                               return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
                             })>;

NgramCounts count_ngrams(const TokenSeq& seq, std::size_t n) {
  NgramCounts counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[std::span<const std::string>(seq).subspan(i, n)];
  return counts;
}

}  // namespace

void BleuTally::add(const TokenSeq& candidate, const TokenSeq& reference) {
  candidate_length += candidate.size();
  reference_length += reference.size();
  for (std::size_t n = 1; n <= kBleuMaxOrder; ++n) {
    if (candidate.size() < n) continue;
    totals[n - 1] += candidate.size() - n + 1;
    const auto ref_counts = count_ngrams(reference, n);
    for (const auto& [gram, count] : count_ngrams(candidate, n)) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
    }
  }
}

BleuTally& BleuTally::operator+=(const BleuTally& other) {
  for (std::size_t n = 0; n < kBleuMaxOrder; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  candidate_length += other.candidate_length;
  reference_length += other.reference_length;
  return *this;
}

BleuReport bleu_from_tally(const BleuTally& tally, std::size_t max_order) {
  if (max_order == 0 || max_order > kBleuMaxOrder) throw std::invalid_argument("BLEU order must be 1..4");
  BleuReport r;
  r.candidate_length = tally.candidate_length;
  r.reference_length = tally.reference_length;
  bool any_zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_order; ++n) {
    const double p = tally.totals[n] == 0
                         ? 0.0
                         : static_cast<double>(tally.matches[n]) / static_cast<double>(tally.totals[n]);
    r.precisions.push_back(p);
    if (p == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(p) / static_cast<double>(max_order);
    }
  }
  const auto c = static_cast<double>(tally.candidate_length);
  const auto ref = static_cast<double>(tally.reference_length);
  if (tally.candidate_length > tally.reference_length) {
    r.brevity_penalty = 1.0;
  } else {
    r.brevity_penalty = c == 0.0 ? 0.0 : std::exp(1.0 - ref / c);
  }
  r.bleu = any_zero ? 0.0 : r.brevity_penalty * std::exp(log_sum);
  return r;
}

BleuReport bleu_corpus(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references,
                       std::size_t max_order, int threads) {
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("bleu_corpus: " + std::to_string(candidates.size()) +
                                " candidates vs " + std::to_string(references.size()) + " references");
  }
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
  BleuTally total;
  if (threads <= 1 || n < 64) {
    for (std::ptrdiff_t i = 0; i < n; ++i) total.add(candidates[i], references[i]);
    return bleu_from_tally(total, max_order);
  }
  // Shard tallies are integer counts, so merge order cannot change the result.
  std::vector<BleuTally> shards(static_cast<std::size_t>(threads));
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t s = 0; s < threads; ++s) {
    for (std::ptrdiff_t i = s; i < n; i += threads) {
      shards[static_cast<std::size_t>(s)].add(candidates[i], references[i]);
    }
  }
  for (const auto& s : shards) total += s;
  return bleu_from_tally(total, max_order);
}

double sentence_bleu_smoothed(const TokenSeq& candidate, const TokenSeq& reference) {
  BleuTally t;
  t.add(candidate, reference);
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kBleuMaxOrder; ++n) {
    const double num = static_cast<double>(t.matches[n]) + (n == 0 ? 0.0 : 1.0);
    const double den = static_cast<double>(t.totals[n]) + (n == 0 ? 0.0 : 1.0);
    if (num == 0.0) return 0.0;
    log_sum += std::log(num / den) / static_cast<double>(kBleuMaxOrder);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

LengthBucket length_bucket(std::size_t source_length) {
  if (source_length <= 5) return LengthBucket::kUpTo5;
  if (source_length <= 10) return LengthBucket::kUpTo10;
  return LengthBucket::kOver10;
}

std::string bucket_name(LengthBucket b) {
  switch (b) {
    case LengthBucket::kUpTo5:
      return "len_1_5";
    case LengthBucket::kUpTo10:
      return "len_6_10";
    case LengthBucket::kOver10:
      return "len_11_plus";
  }
  return "unknown";
}

std::map<LengthBucket, BucketReport> bleu_by_length_bucket(std::span<const TokenSeq> sources,
                                                          std::span<const TokenSeq> candidates,
                                                          std::span<const TokenSeq> references) {
  if (sources.size() != candidates.size() || candidates.size() != references.size()) {
    throw std::invalid_argument("bleu_by_length_bucket: misaligned inputs");
  }
  std::map<LengthBucket, BleuTally> tallies;
  std::map<LengthBucket, std::size_t> counts;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto b = length_bucket(sources[i].size());
    tallies[b].add(candidates[i], references[i]);
    ++counts[b];
  }
  std::map<LengthBucket, BucketReport> out;
  for (const auto& [b, tally] : tallies) out[b] = BucketReport{counts[b], bleu_from_tally(tally)};
  return out;
}

// ---------------------------------------------------------------------------
// Paraphrase inventory

void ParaphraseInventory::add(const std::string& scenario, const std::string& set_id,
                              const TokenSeq& sentence) {
  if (sentence.empty()) throw FormatError("empty paraphrase sentence");
  auto [sit, inserted] = set_index_.try_emplace({scenario, set_id}, sets_.size());
  if (inserted) sets_.push_back(Set{scenario, set_id, {}});
  const std::size_t index = sit->second;

  auto& owners = member_index_[sentence];
  for (std::size_t other : owners) {
    if (other == index) return;  // repeated line
    if (sets_[other].scenario == scenario) {
      throw IntegrityError("sentence '" + detokenize(sentence) + "' is in sets '" + sets_[other].id +
                           "' and '" + set_id + "' of scenario '" + scenario + "'");
    }
  }
  owners.push_back(index);
  sets_[index].members.push_back(sentence);
}

ParaphraseInventory ParaphraseInventory::read(std::istream& in) {
  ParaphraseInventory inv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw FormatError("expected scenario<TAB>set_id<TAB>sentence", line_no);
    try {
      inv.add(line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), tokenize(line.substr(t2 + 1)));
    } catch (const FormatError& e) {
      throw FormatError(e.what(), line_no);
    } catch (const IntegrityError& e) {
      throw IntegrityError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return inv;
}

ParaphraseInventory ParaphraseInventory::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  return read(in);
}

void ParaphraseInventory::write(std::ostream& out) const {
  for (const auto& s : sets_) {
    for (const auto& m : s.members) out << s.scenario << '\t' << s.id << '\t' << detokenize(m) << '\n';
  }
}

const ParaphraseInventory::Set* ParaphraseInventory::find(const TokenSeq& sentence) const {
  auto it = member_index_.find(sentence);
  if (it == member_index_.end()) return nullptr;
  if (it->second.size() > 1) {
    throw IntegrityError("sentence '" + detokenize(sentence) + "' belongs to more than one gold set");
  }
  return &sets_[it->second.front()];
}

std::size_t ParaphraseInventory::num_sets(const std::string& scenario) const {
  return static_cast<std::size_t>(
      std::count_if(sets_.begin(), sets_.end(), [&](const Set& s) { return s.scenario == scenario; }));
}

std::vector<std::string> ParaphraseInventory::scenarios() const {
  std::vector<std::string> out;
  for (const auto& s : sets_) {
    if (std::find(out.begin(), out.end(), s.scenario) == out.end()) out.push_back(s.scenario);
  }
  return out;
}

AccuracyReport paraphrase_accuracy(std::span<const TokenSeq> sources,
                                   std::span<const TokenSeq> predictions,
                                   std::span<const TokenSeq> targets,
                                   const ParaphraseInventory& inventory) {
  if (sources.size() != predictions.size() || predictions.size() != targets.size()) {
    throw std::invalid_argument("paraphrase_accuracy: misaligned inputs");
  }
  AccuracyReport r;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto* set = inventory.find(targets[i]);
    if (set == nullptr) continue;
    ++r.evaluated_pairs;
    const bool hit = std::find(set->members.begin(), set->members.end(), predictions[i]) != set->members.end();
    if (hit) {
      ++r.correct;
    } else {
      r.near_misses.push_back(NearMiss{sources[i], targets[i], predictions[i]});
    }
  }
  r.accuracy = r.evaluated_pairs == 0 ? 0.0
                                      : static_cast<double>(r.correct) / static_cast<double>(r.evaluated_pairs);
  return r;
}

PairCorpus select_gold_subset(const PairCorpus& pairs, const ParaphraseInventory& inventory) {
  PairCorpus out;
  out.name = pairs.name + ".gold";
  for (const auto& p : pairs.pairs) {
    if (inventory.find(p.target) != nullptr) out.pairs.push_back(p);
  }
  return out;
}

void write_near_misses(std::ostream& out, std::span<const NearMiss> misses) {
  for (const auto& m : misses) {
    out << detokenize(m.source) << '\t' << detokenize(m.target) << '\t' << detokenize(m.predicted) << '\n';
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_metrics(std::ostream& out, const MetricsReport& report) {
  const auto& b = report.bleu;
  out << "bleu=" << format_double(b.bleu) << '\n';
  for (std::size_t n = 0; n < b.precisions.size(); ++n) {
    out << "p" << n + 1 << '=' << format_double(b.precisions[n]) << '\n';
  }
  out << "brevity_penalty=" << format_double(b.brevity_penalty) << '\n';
  out << "candidate_length=" << b.candidate_length << '\n';
  out << "reference_length=" << b.reference_length << '\n';
  for (std::size_t k = 0; k < kNumLengthBuckets; ++k) {
    const auto bucket = static_cast<LengthBucket>(k);
    auto it = report.buckets.find(bucket);
    if (it == report.buckets.end()) continue;
    out << "bucket." << bucket_name(bucket) << ".pairs=" << it->second.pairs << '\n';
    out << "bucket." << bucket_name(bucket) << ".bleu=" << format_double(it->second.bleu.bleu) << '\n';
  }
  if (report.accuracy) {
    out << "evaluated_pairs=" << report.accuracy->evaluated_pairs << '\n';
    out << "correct=" << report.accuracy->correct << '\n';
    out << "accuracy=" << format_double(report.accuracy->accuracy) << '\n';
    out << "near_misses=" << report.accuracy->near_misses.size() << '\n';
  }
}

}  // namespace evpred
