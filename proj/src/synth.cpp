#include "evpred/synth.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "evpred/errors.hpp"
#include "evpred/rng.hpp"

namespace evpred {
namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};

std::vector<std::string> make_pool(std::size_t size, Rng& rng) {
  std::set<std::string> seen;
  std::vector<std::string> pool;
  while (pool.size() < size) {
    std::string w;
    const std::size_t syllables = 2 + rng.below(2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kOnsets[rng.below(std::size(kOnsets))];
      w += kVowels[rng.below(std::size(kVowels))];
    }
    if (seen.insert(w).second) pool.push_back(w);
  }
  return pool;
}

/// A random single cycle over n events, as the visiting order.
std::vector<std::size_t> random_cycle(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_scenarios == 0 || events_per_scenario < 2 || paraphrases_per_event == 0) {
    throw std::invalid_argument("synthetic spec needs scenarios >= 1, events >= 2, paraphrases >= 1");
  }
  if (min_words < 2 || max_words < min_words) throw std::invalid_argument("synthetic spec: bad word counts");
  if (vocab_pool < 4) throw std::invalid_argument("synthetic spec: vocab_pool must be at least 4");
}

std::size_t SyntheticSpec::num_chains() const {
  if (chains_per_scenario != 0) return chains_per_scenario;
  return paraphrases_per_event * (ambiguous ? 2 : 1);
}

std::string scenario_name(std::size_t scenario) { return "scenario_" + std::to_string(scenario + 1); }
std::string event_set_id(std::size_t event) { return "event_" + std::to_string(event + 1); }

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, 0x5E);
  const std::size_t flavors = spec.ambiguous ? 2 : 1;
  const std::size_t reserved = flavors + spec.paraphrases_per_event;
  const std::vector<std::string> pool = make_pool(spec.vocab_pool + reserved, rng);
  const std::size_t words = spec.vocab_pool;
  const std::vector<std::string> flavor_words(pool.begin() + static_cast<std::ptrdiff_t>(words),
                                              pool.begin() + static_cast<std::ptrdiff_t>(words + flavors));
  const std::vector<std::string> style_words(pool.begin() + static_cast<std::ptrdiff_t>(words + flavors), pool.end());

  SyntheticCorpus out;
  out.corpus.name = "synthetic";
  std::set<TokenSeq> used;
  // cores[scenario][event]: the words every paraphrase of the event shares.
  std::vector<std::vector<TokenSeq>> cores(spec.num_scenarios);
  std::vector<std::vector<std::vector<std::size_t>>> cycles;
  for (std::size_t s = 0; s < spec.num_scenarios; ++s) {
    for (std::size_t e = 0; e < spec.events_per_scenario; ++e) {
      TokenSeq core;
      std::size_t attempts = 0;
      do {
        if (++attempts > 10000) throw std::invalid_argument("synthetic spec: vocab_pool too small for unique sentences");
        const std::size_t len = spec.min_words - 1 + rng.below(spec.max_words - spec.min_words + 1);
        core.assign(1, pool[rng.below(words)]);
        while (core.size() < std::max<std::size_t>(len, 1)) core.push_back(pool[rng.below(words)]);
      } while (used.count(core) != 0);
      used.insert(core);
      cores[s].push_back(std::move(core));
    }
    out.successors.emplace_back();
    cycles.emplace_back();
    for (std::size_t f = 0; f < flavors; ++f) {
      cycles[s].push_back(random_cycle(spec.events_per_scenario, rng));
      std::vector<std::size_t> succ(spec.events_per_scenario);
      const auto& order = cycles[s].back();
      for (std::size_t i = 0; i < order.size(); ++i) succ[order[i]] = order[(i + 1) % order.size()];
      out.successors[s].push_back(std::move(succ));
    }
  }

  auto surface = [&](std::size_t s, std::size_t f, std::size_t e, std::size_t k) {
    TokenSeq t;
    if (spec.ambiguous) t.push_back(flavor_words[f]);
    const auto& core = cores[s][e];
    t.insert(t.end(), core.begin(), core.end());
    t.push_back(style_words[k]);
    return t;
  };

  for (std::size_t s = 0; s < spec.num_scenarios; ++s) {
    for (std::size_t e = 0; e < spec.events_per_scenario; ++e) {
      for (std::size_t f = 0; f < flavors; ++f) {
        for (std::size_t k = 0; k < spec.paraphrases_per_event; ++k) {
          out.inventory.add(scenario_name(s), event_set_id(e), surface(s, f, e, k));
        }
      }
    }
    for (std::size_t c = 0; c < spec.num_chains(); ++c) {
      const std::size_t style = c % spec.paraphrases_per_event;
      const std::size_t flavor = (c / spec.paraphrases_per_event) % flavors;
      const auto& succ = out.successors[s][flavor];
      // A chain walks the whole cycle. Starting chain c at cycle position c keeps
      // positional splits from holding out every style of the same event.
      std::size_t event = cycles[s][flavor][c % spec.events_per_scenario];
      for (std::size_t step = 0; step < spec.events_per_scenario; ++step) {
        const std::size_t next = succ[event];
        out.corpus.pairs.push_back({surface(s, flavor, event, style), surface(s, flavor, next, style)});
        out.info.push_back({s, flavor, event, next});
        event = next;
      }
    }
  }
  return out;
}

}  // namespace evpred
