#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "evpred/errors.hpp"
#include "evpred/eval.hpp"
#include "evpred/rng.hpp"
#include "oracles.hpp"

using namespace evpred;

namespace {

TokenSeq random_sentence(Rng& rng, std::size_t vocab, std::size_t min_len, std::size_t max_len) {
  TokenSeq s(min_len + rng.below(max_len - min_len + 1));
  for (auto& t : s) t = "w" + std::to_string(rng.below(vocab));
  return s;
}

TokenSeq words(const std::string& text) { return tokenize(text); }

}  // namespace

TEST_SUITE("bleu") {
  TEST_CASE("identical corpora score 1") {
    const std::vector<TokenSeq> x = {words("put the pan in the oven"), words("wait for the cake to bake")};
    const auto r = bleu_corpus(x, x);
    CHECK(r.bleu == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.brevity_penalty == 1.0);
  }

  TEST_CASE("hand case: bigram BLEU of 'the cat' against 'the cat is here' is 1/e") {
    const std::vector<TokenSeq> c = {words("the cat")};
    const std::vector<TokenSeq> r = {words("the cat is here")};
    const auto rep = bleu_corpus(c, r, 2);
    CHECK(rep.precisions[0] == 1.0);
    CHECK(rep.precisions[1] == 1.0);
    CHECK(std::abs(rep.bleu - std::exp(-1.0)) < 1e-9);
  }

  TEST_CASE("no 4-gram match anywhere scores 0") {
    const std::vector<TokenSeq> c = {words("a b c x d"), words("e f g")};
    const std::vector<TokenSeq> r = {words("a b c d e"), words("e f g")};
    const auto rep = bleu_corpus(c, r);
    CHECK(rep.precisions[3] == 0.0);
    CHECK(rep.bleu == 0.0);
  }

  TEST_CASE("matches the brute-force oracle on 50 random corpora") {
    Rng rng(2024);
    int short_bp = 0, full_bp = 0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<TokenSeq> c, r;
      const std::size_t n = 1 + rng.below(20);
      for (std::size_t k = 0; k < n; ++k) {
        TokenSeq ref = random_sentence(rng, 10, 1, 12);
        TokenSeq cand;
        if (rng.below(2) == 0) {
          cand = ref;
          for (auto& t : cand)
            if (rng.uniform() < 0.2) t = "w" + std::to_string(rng.below(10));
          if (rng.below(3) == 0 && cand.size() > 1) cand.pop_back();
        } else {
          cand = random_sentence(rng, 10, 1, 12);
        }
        c.push_back(cand);
        r.push_back(ref);
      }
      const auto rep = bleu_corpus(c, r);
      const double want = oracle::bleu(c, r, 4);
      CHECK(std::abs(rep.bleu - want) < 1e-9);
      CHECK(rep.bleu >= 0.0);
      CHECK(rep.bleu <= 1.0);
      short_bp += rep.brevity_penalty < 1.0;
      full_bp += rep.brevity_penalty == 1.0;
      if (rep.candidate_length >= rep.reference_length) CHECK(rep.brevity_penalty == 1.0);
    }
    CHECK(short_bp > 0);
    CHECK(full_bp > 0);
    // Force the zero-precision branch as well.
    std::vector<TokenSeq> c = {words("w1 w2 w3")}, r = {words("w4 w5 w6")};
    CHECK(bleu_corpus(c, r).bleu == oracle::bleu(c, r, 4));
    CHECK(oracle::bleu(c, r, 4) == 0.0);
  }

  TEST_CASE("replacing a candidate with its reference never lowers the score") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<TokenSeq> c, r;
      for (std::size_t k = 0, n = 2 + rng.below(10); k < n; ++k) {
        r.push_back(random_sentence(rng, 6, 4, 10));
        c.push_back(random_sentence(rng, 6, 1, 10));
      }
      const double before = bleu_corpus(c, r).bleu;
      const std::size_t k = rng.below(c.size());
      c[k] = r[k];
      CHECK(bleu_corpus(c, r).bleu >= before - 1e-15);
    }
  }

  TEST_CASE("sharded tallies merge to the serial result") {
    Rng rng(8);
    std::vector<TokenSeq> c, r;
    for (int k = 0; k < 200; ++k) {
      r.push_back(random_sentence(rng, 8, 1, 12));
      c.push_back(rng.below(2) ? r.back() : random_sentence(rng, 8, 1, 12));
    }
    const auto serial = bleu_corpus(c, r, 4, 1);
    const auto sharded = bleu_corpus(c, r, 4, 4);
    CHECK(serial.bleu == sharded.bleu);
    CHECK(serial.precisions == sharded.precisions);
  }

  TEST_CASE("empty candidate adds nothing to the candidate length") {
    const std::vector<TokenSeq> c = {TokenSeq{}, words("a b c d")};
    const std::vector<TokenSeq> r = {words("x y"), words("a b c d")};
    CHECK(bleu_corpus(c, r).candidate_length == 4);
  }

  TEST_CASE("length mismatch is rejected") {
    const std::vector<TokenSeq> c = {words("a")};
    const std::vector<TokenSeq> r = {words("a"), words("b")};
    CHECK_THROWS_AS(bleu_corpus(c, r), std::invalid_argument);
  }

  TEST_CASE("smoothed sentence BLEU is positive where corpus BLEU is 0") {
    CHECK(sentence_bleu_smoothed(words("a b"), words("a c")) > 0.0);
    CHECK(sentence_bleu_smoothed(words("a b c d"), words("a b c d")) == doctest::Approx(1.0));
  }
}

TEST_SUITE("length buckets") {
  TEST_CASE("5, 10 and 11 land in the first, middle and last bucket") {
    CHECK(length_bucket(5) == LengthBucket::kUpTo5);
    CHECK(length_bucket(10) == LengthBucket::kUpTo10);
    CHECK(length_bucket(11) == LengthBucket::kOver10);
    CHECK(length_bucket(1) == LengthBucket::kUpTo5);
    CHECK(length_bucket(6) == LengthBucket::kUpTo10);
    CHECK(bucket_name(LengthBucket::kUpTo5) == "len_1_5");
    CHECK(bucket_name(LengthBucket::kOver10) == "len_11_plus");
  }

  TEST_CASE("bucket counts partition the corpus") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<TokenSeq> s, c, r;
      const std::size_t n = rng.below(40);
      for (std::size_t k = 0; k < n; ++k) {
        s.push_back(random_sentence(rng, 10, 1, 16));
        r.push_back(random_sentence(rng, 10, 1, 8));
        c.push_back(random_sentence(rng, 10, 1, 8));
      }
      const auto buckets = bleu_by_length_bucket(s, c, r);
      std::size_t sum = 0;
      for (const auto& [b, rep] : buckets) {
        CHECK(rep.pairs > 0);
        sum += rep.pairs;
      }
      CHECK(sum == n);
    }
  }

  TEST_CASE("one occupied bucket reproduces the overall score") {
    const std::vector<TokenSeq> s = {words("a b"), words("c d e")};
    const std::vector<TokenSeq> c = {words("put pan in oven"), words("wait for it now")};
    const std::vector<TokenSeq> r = {words("put pan in the oven"), words("wait for it now")};
    const auto buckets = bleu_by_length_bucket(s, c, r);
    REQUIRE(buckets.size() == 1);
    CHECK(buckets.at(LengthBucket::kUpTo5).bleu.bleu == bleu_corpus(c, r).bleu);
  }
}

TEST_SUITE("paraphrase accuracy") {
  ParaphraseInventory oven_inventory() {
    ParaphraseInventory inv;
    for (const char* s : {"remove cake", "remove from oven", "take cake out of oven"})
      inv.add("baking a cake", "taking out oven", words(s));
    for (const char* s : {"put cake in oven", "place pan in oven"}) inv.add("baking a cake", "putting in oven", words(s));
    return inv;
  }

  TEST_CASE("a different member of the target's set counts as correct") {
    const auto inv = oven_inventory();
    const std::vector<TokenSeq> src = {words("wait")}, pred = {words("Remove from oven")}, tgt = {words("remove cake")};
    const auto rep = paraphrase_accuracy(src, pred, tgt, inv);
    CHECK(rep.evaluated_pairs == 1);
    CHECK(rep.correct == 1);
    CHECK(rep.near_misses.empty());
  }

  TEST_CASE("verbatim prediction is correct; wrong set and uncovered targets behave") {
    const auto inv = oven_inventory();
    const std::vector<TokenSeq> src = {words("a"), words("b"), words("c")};
    const std::vector<TokenSeq> pred = {words("place pan in oven"), words("put cake in oven"), words("x")};
    const std::vector<TokenSeq> tgt = {words("place pan in oven"), words("remove cake"), words("eat cake")};
    const auto rep = paraphrase_accuracy(src, pred, tgt, inv);
    CHECK(rep.evaluated_pairs == 2);
    CHECK(rep.correct == 1);
    CHECK(rep.accuracy == 0.5);
    REQUIRE(rep.near_misses.size() == 1);
    CHECK(rep.near_misses[0].predicted == words("put cake in oven"));
  }

  TEST_CASE("equals brute-force membership counting on 100 random inventories") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      ParaphraseInventory inv;
      std::vector<std::vector<TokenSeq>> sets;
      std::vector<TokenSeq> used;
      const std::size_t scenarios = 1 + rng.below(3);
      for (std::size_t sc = 0; sc < scenarios; ++sc) {
        for (std::size_t k = 0, n = 1 + rng.below(6); k < n; ++k) {
          sets.emplace_back();
          for (std::size_t m = 0, members = 1 + rng.below(4); m < members; ++m) {
            TokenSeq s = random_sentence(rng, 6, 1, 3);
            if (std::find(used.begin(), used.end(), s) != used.end()) continue;
            used.push_back(s);
            sets.back().push_back(s);
            inv.add("s" + std::to_string(sc), "set" + std::to_string(k), s);
          }
        }
      }
      std::vector<TokenSeq> src, pred, tgt;
      for (std::size_t p = 0, n = 1 + rng.below(30); p < n; ++p) {
        src.push_back(random_sentence(rng, 6, 1, 3));
        tgt.push_back(rng.below(4) ? used[rng.below(used.size())] : random_sentence(rng, 6, 1, 3));
        pred.push_back(rng.below(2) ? used[rng.below(used.size())] : random_sentence(rng, 6, 1, 3));
      }
      const auto want = oracle::paraphrase(sets, pred, tgt);
      const std::size_t evaluated = want.evaluated, correct = want.correct;
      const auto rep = paraphrase_accuracy(src, pred, tgt, inv);
      CHECK(rep.evaluated_pairs == evaluated);
      CHECK(rep.correct == correct);
      CHECK(rep.near_misses.size() == evaluated - correct);
      if (evaluated > 0) CHECK(rep.accuracy == static_cast<double>(correct) / static_cast<double>(evaluated));
    }
  }

  TEST_CASE("random predictions over 26 equally likely sets score about 4%") {
    ParaphraseInventory inv;
    std::vector<std::vector<TokenSeq>> sets(26);
    for (std::size_t k = 0; k < 26; ++k)
      for (std::size_t m = 0; m < 3; ++m) {
        sets[k].push_back({"e" + std::to_string(k), "v" + std::to_string(m)});
        inv.add("scenario", "set" + std::to_string(k), sets[k].back());
      }
    CHECK(inv.num_sets("scenario") == 26);
    Rng rng(26);
    std::vector<TokenSeq> src, pred, tgt;
    for (int trial = 0; trial < 10000; ++trial) {
      src.push_back({"x"});
      tgt.push_back(sets[rng.below(26)][rng.below(3)]);
      pred.push_back(sets[rng.below(26)][rng.below(3)]);
    }
    const auto rep = paraphrase_accuracy(src, pred, tgt, inv);
    CHECK(rep.accuracy >= 0.028);
    CHECK(rep.accuracy <= 0.050);
  }

  TEST_CASE("integrity: one sentence in two sets") {
    ParaphraseInventory inv;
    inv.add("s", "a", words("remove cake"));
    CHECK_THROWS_AS(inv.add("s", "b", words("Remove  cake")), IntegrityError);
    inv.add("t", "a", words("remove cake"));
    CHECK_THROWS_AS(inv.find(words("remove cake")), IntegrityError);
  }

  TEST_CASE("inventory file round trip") {
    const auto inv = oven_inventory();
    std::stringstream buf;
    inv.write(buf);
    const auto back = ParaphraseInventory::read(buf);
    CHECK(back.num_sets() == inv.num_sets());
    REQUIRE(back.find(words("place pan in oven")) != nullptr);
    CHECK(back.find(words("place pan in oven"))->id == "putting in oven");
    std::istringstream bad("s\tonly two fields\n");
    CHECK_THROWS_AS(ParaphraseInventory::read(bad), FormatError);
  }
}

TEST_SUITE("gold subset") {
  PairCorpus pairs_with_targets(const std::vector<std::string>& targets) {
    PairCorpus c;
    for (const auto& t : targets) c.pairs.push_back({words("src"), words(t)});
    return c;
  }

  TEST_CASE("empty inventory selects nothing") {
    CHECK(select_gold_subset(pairs_with_targets({"a", "b"}), ParaphraseInventory{}).empty());
  }

  TEST_CASE("all targets covered keeps everything") {
    ParaphraseInventory inv;
    inv.add("s", "x", words("a"));
    inv.add("s", "y", words("b"));
    const auto c = pairs_with_targets({"a", "b", "a"});
    CHECK(select_gold_subset(c, inv).pairs == c.pairs);
  }

  TEST_CASE("ten pairs with four covered") {
    ParaphraseInventory inv;
    inv.add("s", "x", words("a"));
    inv.add("s", "y", words("b c"));
    const std::vector<std::string> targets = {"a", "z", "b c", "q", "r", "a", "c b", "t", "b c", "u"};
    std::size_t brute = 0;
    for (const auto& t : targets)
      for (const auto& set : inv.sets())
        for (const auto& m : set.members) brute += m == words(t);
    const auto subset = select_gold_subset(pairs_with_targets(targets), inv);
    CHECK(brute == 4);
    CHECK(subset.size() == 4);
  }
}

TEST_SUITE("report") {
  TEST_CASE("stable key order; accuracy keys only with an inventory") {
    MetricsReport r;
    const std::vector<TokenSeq> x = {words("a b c d")};
    r.bleu = bleu_corpus(x, x);
    r.buckets = bleu_by_length_bucket(x, x, x);
    std::ostringstream out;
    write_metrics(out, r);
    const std::string text = out.str();
    CHECK(text.rfind("bleu=1\np1=1\np2=1\np3=1\np4=1\nbrevity_penalty=1\n", 0) == 0);
    CHECK(text.find("bucket.len_1_5.pairs=1") != std::string::npos);
    CHECK(text.find("accuracy") == std::string::npos);
    r.accuracy = AccuracyReport{4, 1, 0.25, {}};
    std::ostringstream with;
    write_metrics(with, r);
    CHECK(with.str().find("evaluated_pairs=4\ncorrect=1\naccuracy=0.25\n") != std::string::npos);
  }

  TEST_CASE("doubles print with round-trip precision") {
    const double v = 0.1 + 0.2;
    CHECK(std::stod(format_double(v)) == v);
  }
}
