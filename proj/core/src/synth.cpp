#include "damr/synth.hpp"

#include <random>

#include "damr/error.hpp"

namespace damr::harness {

namespace {

std::size_t bounded(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

bool bernoulli(std::mt19937_64& rng, double p) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
}

std::string padded(std::size_t value, std::size_t total) {
  std::string digits = std::to_string(value);
  const std::size_t width = std::to_string(total > 0 ? total - 1 : 0).size();
  return std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

}  // namespace

std::string relation_label(std::size_t index, std::size_t total) {
  return "synth.r" + padded(index, std::max<std::size_t>(total, 10));
}

void SynthSpec::validate(std::size_t max_len) const {
  if (relations < 2) throw InputError("synthetic graphs need at least 2 relation types");
  if (path_len < 1 || path_len > max_len) {
    throw InputError("gold path length must lie in [1, " + std::to_string(max_len) + "]");
  }
  if (!(decoy_rate >= 0.0 && decoy_rate <= 1.0)) throw InputError("decoy rate must lie in [0, 1]");
  if (entities == 0 && (branching > 0 || decoy_rate > 0.0)) {
    throw InputError("distractor edges need at least one filler entity");
  }
  if (decoy_rate > 0.0 && relations / 2 < 2) {
    throw InputError("decoys need at least 2 gold relation types");
  }
}

SynthData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t gold_pool = spec.relations / 2;
  const std::size_t distractor_pool = spec.relations - gold_pool;

  kg::KnowledgeGraphBuilder builder;
  std::vector<std::string> rel(spec.relations);
  for (std::size_t i = 0; i < spec.relations; ++i) {
    rel[i] = relation_label(i, spec.relations);
    builder.add_relation(rel[i]);
  }
  std::vector<std::string> filler(spec.entities);
  for (std::size_t i = 0; i < spec.entities; ++i) {
    filler[i] = "e" + padded(i, spec.entities);
    builder.add_entity(filler[i]);
  }
  auto distractor = [&] { return rel[gold_pool + bounded(rng, distractor_pool)]; };

  // Background: every filler leads on to two other fillers.
  if (spec.entities > 1) {
    for (std::size_t i = 0; i < spec.entities; ++i) {
      for (int e = 0; e < 2; ++e) {
        std::size_t j = bounded(rng, spec.entities - 1);
        if (j >= i) ++j;
        builder.add(filler[i], distractor(), filler[j]);
      }
    }
  }

  SynthData data;
  for (std::size_t q = 0; q < spec.questions; ++q) {
    const std::string base = spec.prefix + padded(q, spec.questions);
    std::vector<std::string> chain{base + ".topic"};
    for (std::size_t h = 1; h < spec.path_len; ++h) chain.push_back(base + ".m" + std::to_string(h));
    chain.push_back(base + ".answer");

    std::vector<std::size_t> gold;
    for (std::size_t h = 0; h < spec.path_len; ++h) gold.push_back(bounded(rng, gold_pool));
    for (std::size_t h = 0; h < spec.path_len; ++h) builder.add(chain[h], rel[gold[h]], chain[h + 1]);

    for (std::size_t h = 0; h < spec.path_len; ++h) {
      // Distinct distractor relations per node while the pool allows it.
      std::vector<std::size_t> pool(distractor_pool);
      for (std::size_t i = 0; i < distractor_pool; ++i) pool[i] = gold_pool + i;
      for (std::size_t b = 0; b < spec.branching; ++b) {
        std::size_t r;
        if (b < distractor_pool) {
          const std::size_t pick = b + bounded(rng, distractor_pool - b);
          std::swap(pool[b], pool[pick]);
          r = pool[b];
        } else {
          r = gold_pool + bounded(rng, distractor_pool);
        }
        builder.add(chain[h], rel[r], filler[bounded(rng, spec.entities)]);
      }
    }
    if (spec.decoy_rate > 0.0 && bernoulli(rng, spec.decoy_rate)) {
      std::size_t r = bounded(rng, gold_pool - 1);
      if (r >= gold.back()) ++r;
      builder.add(chain[spec.path_len - 1], rel[r], filler[bounded(rng, spec.entities)]);
    }

    std::string text = "starting from " + chain.front() + ", follow";
    for (std::size_t h = 0; h < spec.path_len; ++h) {
      text += (h == 0 ? " " : " then ") + rel[gold[h]];
    }
    text += ": which entity is reached?";
    data.items.push_back({base, std::move(text), {chain.front()}, {chain.back()}});
  }
  data.kg = std::move(builder).build();
  return data;
}

}  // namespace damr::harness
