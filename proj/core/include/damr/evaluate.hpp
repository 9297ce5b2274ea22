#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "damr/dataset.hpp"
#include "damr/embed.hpp"
#include "damr/kg.hpp"
#include "damr/mcts.hpp"
#include "damr/planner.hpp"
#include "damr/scorer.hpp"

namespace damr::harness {

struct EvalConfig {
  mcts::SearchConfig search;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool carry_scorer = false;  // keep fine-tuned weights across questions
  double answer_margin = 0.0;  // predicted set: scores within margin of the best
  bool record_timing = false;  // wall time makes reports non-reproducible
};

struct QuestionRecord {
  std::string id;
  double hits_at_1 = 0.0;
  double f1 = 0.0;
  planner::Usage usage;
  std::vector<mcts::Answer> answers;
  std::vector<std::string> answer_labels;
  std::optional<std::string> error;
  std::optional<double> wall_seconds;
  mcts::SearchStats stats;
};

struct EvalReport {
  std::vector<QuestionRecord> per_question;
  double mean_hits_at_1 = 0.0;
  double mean_f1 = 0.0;
  double mean_llm_calls = 0.0;
  double mean_tokens = 0.0;
  std::uint64_t total_llm_calls = 0;
  std::uint64_t counter_llm_calls = 0;  // global counter delta over the run
  std::size_t failures = 0;
};

// Entities tied (within margin) with the best score.
std::vector<std::string> predicted_set(const QuestionRecord& record, double margin);

EvalReport evaluate(const kg::KnowledgeGraph& kg, const std::vector<QAItem>& dataset,
                    planner::Planner& planner, const scorer::ScorerParams& checkpoint,
                    const embed::Embedder& embedder, const EvalConfig& config);

// Pretty-printed JSON document with `per_question` and `aggregate`.
std::string report_json(const kg::KnowledgeGraph& kg, const EvalReport& report,
                           const EvalConfig& config);

// Relation-label sequences of every path (within max_len) from a topic to an
// answer; feeds the oracle planner.
std::vector<std::vector<std::string>> gold_relation_paths(const kg::KnowledgeGraph& kg,
                                                          const QAItem& item,
                                                          std::size_t max_len);

}  // namespace damr::harness
