#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "evpred/tensor.hpp"

namespace evpred {

using TokenSeq = std::vector<std::string>;
using IdSeq = std::vector<std::size_t>;

/// NFC-normalizes, lowercases and splits on Unicode whitespace. Never yields
/// empty tokens. Throws FormatError on invalid UTF-8.
TokenSeq tokenize(std::string_view text);

/// Space-joins tokens.
std::string detokenize(const TokenSeq& tokens);

struct SentencePair {
  TokenSeq source;
  TokenSeq target;
  bool operator==(const SentencePair&) const = default;
};

/// Pairs in load order; the DeScript split depends on that order.
struct PairCorpus {
  std::string name;
  std::vector<SentencePair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
};

/// `source<TAB>target` per line. Both sides must tokenize to at least one token.
PairCorpus read_pair_corpus(std::istream& in, std::string name = {});
PairCorpus read_pair_corpus(const std::filesystem::path& path);
void write_pair_corpus(std::ostream& out, const PairCorpus& corpus);
void write_pair_corpus(const std::filesystem::path& path, const PairCorpus& corpus);

/// One sentence per line, tokenized; blank lines become empty sequences.
std::vector<TokenSeq> read_sentences(const std::filesystem::path& path);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kNumSpecials = 4;
  static constexpr std::array<std::string_view, kNumSpecials> kSpecialTokens = {
      "<pad>", "<unk>", "<s>", "</s>"};

  /// Vocabulary sizes used for the two reference corpora.
  static constexpr std::size_t kWikiHowMaxSize = 30000;
  static constexpr std::size_t kDescriptMaxSize = 5000;

  Vocabulary();

  /// The max_size most frequent tokens over both sides of the corpus; ties go
  /// to the token seen first.
  static Vocabulary build(const PairCorpus& corpus, std::size_t max_size);
  /// Reads the one-token-per-line format written by save().
  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  void save(const std::filesystem::path& path) const;
  void save(std::ostream& out) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  /// UNK for unknown tokens.
  std::size_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// FNV-1a over the serialized vocabulary; checkpoints record it.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void append(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

IdSeq encode(const TokenSeq& tokens, const Vocabulary& vocab);
TokenSeq decode(const IdSeq& ids, const Vocabulary& vocab);

struct CorpusSplit {
  PairCorpus train;
  PairCorpus dev;
  PairCorpus test;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
};

SplitIndices split_descript_indices(std::size_t n);
SplitIndices split_random_indices(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed);

/// Within each consecutive block of ten pairs, the 5th goes to dev, the 10th to
/// test and the other eight to train. A trailing partial block follows the same
/// positional rule.
CorpusSplit split_descript(const PairCorpus& corpus);

/// Seeded shuffle split. Sizes are round(f * N) for train and dev, remainder to
/// test; each part keeps corpus order.
CorpusSplit split_random(const PairCorpus& corpus, std::array<double, 3> fractions,
                         std::uint64_t seed);

/// |V| x dim table. Rows of tokens found in the file are copied; every other row
/// (specials included) is drawn from U(-0.1, 0.1).
struct EmbeddingMatrix {
  Tensor table;
  std::size_t covered = 0;
};

inline constexpr double kEmbeddingInitRange = 0.1;

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

/// Text format: header `V D`, then `word v1 ... vD` per line.
EmbeddingMatrix load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim,
                                std::uint64_t seed);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                std::size_t dim, std::uint64_t seed);

}  // namespace evpred
