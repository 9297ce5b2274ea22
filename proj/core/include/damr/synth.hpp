#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "damr/dataset.hpp"
#include "damr/kg.hpp"

namespace damr::harness {

// Every question gets its own chain of fresh entities (topic, intermediates,
// answer). `entities` sizes the shared pool of filler entities that
// distractor edges point into. The first half of the relation types label
// gold hops, the second half distractors.
struct SynthSpec {
  std::size_t entities = 200;
  std::size_t relations = 20;
  std::size_t path_len = 3;
  std::size_t branching = 4;
  std::size_t questions = 50;
  // Probability that the last gold hop also gets a same-pool sibling leading
  // to a filler instead of the answer.
  double decoy_rate = 0.0;
  std::uint64_t seed = 0;
  std::string prefix = "q";  // entity-label namespace for question chains

  void validate(std::size_t max_len = 8) const;
};

struct SynthData {
  kg::KnowledgeGraph kg;
  std::vector<QAItem> items;
};

SynthData generate_synthetic(const SynthSpec& spec);

std::string relation_label(std::size_t index, std::size_t total);

}  // namespace damr::harness
