#include "evpred/corpus.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "evpred/errors.hpp"
#include "evpred/rng.hpp"

namespace evpred {
namespace {

icu::UnicodeString nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString out = norm->normalize(s, status);
  if (U_FAILURE(status)) throw FormatError("text normalization failed");
  return out;
}

bool valid_utf8(std::string_view text) {
  // ICU silently substitutes U+FFFD, so reject malformed input up front.
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > text.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) >> 6) != 0x2) return false;
    }
    i += len;
  }
  return true;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  if (!valid_utf8(text)) throw FormatError("invalid UTF-8 input");
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u = nfc(u);
  u.toLower(icu::Locale::getRoot());
  u = nfc(u);

  TokenSeq tokens;
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string s;
    current.toUTF8String(s);
    tokens.push_back(std::move(s));
    current.remove();
  };
  for (int32_t i = 0; i < u.length();) {
    const UChar32 cp = u.char32At(i);
    if (u_isUWhiteSpace(cp)) {
      flush();
    } else {
      current.append(cp);
    }
    i += U16_LENGTH(cp);
  }
  flush();
  return tokens;
}

std::string detokenize(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

PairCorpus read_pair_corpus(std::istream& in, std::string name) {
  PairCorpus corpus;
  corpus.name = std::move(name);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("missing TAB between source and target", line_no);
    SentencePair pair;
    try {
      pair.source = tokenize(std::string_view(line).substr(0, tab));
      pair.target = tokenize(std::string_view(line).substr(tab + 1));
    } catch (const FormatError& e) {
      throw FormatError(e.what(), line_no);
    }
    if (pair.source.empty()) throw FormatError("empty source sentence", line_no);
    if (pair.target.empty()) throw FormatError("empty target sentence", line_no);
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

PairCorpus read_pair_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_pair_corpus(in, path.stem().string());
}

void write_pair_corpus(std::ostream& out, const PairCorpus& corpus) {
  for (const auto& p : corpus.pairs) out << detokenize(p.source) << '\t' << detokenize(p.target) << '\n';
}

void write_pair_corpus(const std::filesystem::path& path, const PairCorpus& corpus) {
  auto out = open_output(path);
  write_pair_corpus(out, corpus);
}

std::vector<TokenSeq> read_sentences(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<TokenSeq> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    try {
      out.push_back(tokenize(line));
    } catch (const FormatError& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (auto s : kSpecialTokens) append(std::string(s));
}

void Vocabulary::append(const std::string& token) {
  ids_.emplace(token, tokens_.size());
  tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const PairCorpus& corpus, std::size_t max_size) {
  if (max_size == 0) throw std::invalid_argument("vocabulary max_size must be positive");
  if (corpus.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");

  struct Entry {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Entry> counts;
  std::vector<std::string> order;
  Vocabulary vocab;
  auto tally = [&](const TokenSeq& seq) {
    for (const auto& t : seq) {
      if (vocab.contains(t)) continue;  // literal special surface forms
      auto [it, inserted] = counts.try_emplace(t, Entry{0, order.size()});
      if (inserted) order.push_back(t);
      ++it->second.count;
    }
  };
  for (const auto& p : corpus.pairs) {
    tally(p.source);
    tally(p.target);
  }
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    return counts[a].count > counts[b].count;
  });
  if (order.size() > max_size) order.resize(max_size);
  for (const auto& t : order) vocab.append(t);
  return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kNumSpecials) throw FormatError("vocabulary is missing special tokens");
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (tokens[i] != kSpecialTokens[i]) {
      throw FormatError("vocabulary special token mismatch", i + 1);
    }
  }
  Vocabulary vocab;
  for (std::size_t i = kNumSpecials; i < tokens.size(); ++i) {
    if (tokens[i].empty() || vocab.contains(tokens[i])) {
      throw FormatError("empty or duplicate vocabulary entry", i + 1);
    }
    vocab.append(tokens[i]);
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  auto out = open_output(path);
  save(out);
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto feed = [&](unsigned char c) {
    h ^= c;
    h *= 0x100000001B3ULL;
  };
  for (const auto& t : tokens_) {
    for (char c : t) feed(static_cast<unsigned char>(c));
    feed('\n');
  }
  return h;
}

IdSeq encode(const TokenSeq& tokens, const Vocabulary& vocab) {
  IdSeq ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

TokenSeq decode(const IdSeq& ids, const Vocabulary& vocab) {
  TokenSeq out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(vocab.token(id));
  return out;
}

// ---------------------------------------------------------------------------
// Splits

SplitIndices split_descript_indices(std::size_t n) {
  SplitIndices s;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = i % 10 + 1;
    if (pos == 5) {
      s.dev.push_back(i);
    } else if (pos == 10) {
      s.test.push_back(i);
    } else {
      s.train.push_back(i);
    }
  }
  return s;
}

SplitIndices split_random_indices(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("split fractions must lie in [0, 1]");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");

  const auto rounded = [n](double f) { return static_cast<std::size_t>(std::llround(f * static_cast<double>(n))); };
  const std::size_t n_train = std::min(n, rounded(fractions[0]));
  const std::size_t n_dev = std::min(n - n_train, rounded(fractions[1]));

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, 0x5B);
  shuffle(idx.begin(), idx.end(), rng);

  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.dev.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
               idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), idx.end());
  for (auto* part : {&s.train, &s.dev, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

namespace {

CorpusSplit gather(const PairCorpus& corpus, const SplitIndices& idx) {
  CorpusSplit s;
  s.train.name = corpus.name + ".train";
  s.dev.name = corpus.name + ".dev";
  s.test.name = corpus.name + ".test";
  for (auto i : idx.train) s.train.pairs.push_back(corpus.pairs[i]);
  for (auto i : idx.dev) s.dev.pairs.push_back(corpus.pairs[i]);
  for (auto i : idx.test) s.test.pairs.push_back(corpus.pairs[i]);
  return s;
}

}  // namespace

CorpusSplit split_descript(const PairCorpus& corpus) {
  return gather(corpus, split_descript_indices(corpus.size()));
}

CorpusSplit split_random(const PairCorpus& corpus, std::array<double, 3> fractions,
                         std::uint64_t seed) {
  return gather(corpus, split_random_indices(corpus.size(), fractions, seed));
}

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  EmbeddingMatrix m{Tensor({vocab.size(), dim}), 0};
  Rng rng(seed, 0xE3);
  for (double& v : m.table.values()) v = rng.uniform(-kEmbeddingInitRange, kEmbeddingInitRange);
  return m;
}

EmbeddingMatrix load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim,
                                std::uint64_t seed) {
  EmbeddingMatrix m = random_embeddings(vocab, dim, seed);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty embedding file", 1);
  strip_cr(line);
  std::size_t declared_rows = 0;
  std::size_t declared_dim = 0;
  {
    std::istringstream header(line);
    std::string extra;
    if (!(header >> declared_rows >> declared_dim) || (header >> extra)) {
      throw FormatError("embedding header must be `V D`", 1);
    }
  }
  if (declared_dim != dim) {
    throw FormatError("embedding dimension " + std::to_string(declared_dim) +
                          " does not match configured " + std::to_string(dim),
                      1);
  }

  std::vector<bool> filled(vocab.size(), false);
  std::size_t line_no = 1;
  std::size_t rows = 0;
  std::vector<double> vec(dim);
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    std::string_view rest(line);
    auto next_field = [&]() -> std::string_view {
      while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
      const auto end = rest.find(' ');
      std::string_view field = rest.substr(0, end);
      rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
      return field;
    };
    const std::string_view word = next_field();
    for (std::size_t k = 0; k < dim; ++k) {
      const std::string_view f = next_field();
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw FormatError("expected " + std::to_string(dim) + " finite values after the word", line_no);
      }
      vec[k] = v;
    }
    if (!next_field().empty()) throw FormatError("too many values on embedding line", line_no);
    ++rows;

    TokenSeq normalized;
    try {
      normalized = tokenize(word);
    } catch (const FormatError& e) {
      throw FormatError(e.what(), line_no);
    }
    if (normalized.size() != 1 || !vocab.contains(normalized[0])) continue;
    const std::size_t id = vocab.id(normalized[0]);
    if (id < Vocabulary::kNumSpecials || filled[id]) continue;
    filled[id] = true;
    ++m.covered;
    std::copy(vec.begin(), vec.end(), m.table.data().begin() + static_cast<std::ptrdiff_t>(id * dim));
  }
  if (rows != declared_rows) {
    throw FormatError("header declares " + std::to_string(declared_rows) + " rows, file has " +
                          std::to_string(rows),
                      line_no);
  }
  return m;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                std::size_t dim, std::uint64_t seed) {
  auto in = open_input(path);
  return load_embeddings(in, vocab, dim, seed);
}

}  // namespace evpred
