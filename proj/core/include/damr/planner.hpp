#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "damr/embed.hpp"
#include "damr/kg.hpp"
#include "damr/remote.hpp"

namespace damr::planner {

enum class Source { llm, similarity, mock, fallback };

std::string_view to_string(Source s);

struct Usage {
  std::uint64_t llm_calls = 0;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;

  std::uint64_t tokens() const { return prompt_tokens + completion_tokens; }
  Usage& operator+=(const Usage& o) {
    llm_calls += o.llm_calls;
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
  friend bool operator==(const Usage&, const Usage&) = default;
};

// Process-wide running totals; safe to bump from many threads.
class UsageCounter {
 public:
  void add(const Usage& u);
  Usage snapshot() const;
  void reset();

 private:
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<std::uint64_t> prompt_{0};
  std::atomic<std::uint64_t> completion_{0};
};

UsageCounter& global_usage();

struct Candidate {
  kg::RelationId id;
  std::string label;
};

struct PlannerQuery {
  std::string question;
  std::vector<std::string> current_path;  // relation labels from the root
  std::vector<Candidate> candidates;
  std::size_t k = 3;
};

struct PlannerChoice {
  std::vector<kg::RelationId> ranked;
  Source source = Source::mock;
  Usage usage;  // what this one selection consumed
};

// Rough token estimate used when no server count is available.
std::uint64_t estimate_tokens(std::string_view text);

std::string render_relations(const std::vector<Candidate>& candidates);
std::string build_prompt(const PlannerQuery& query);
// Exact-label mapping of the first ["..", ".."] list in `raw`. nullopt when no
// list is found or none of its entries is a candidate.
std::optional<std::vector<kg::RelationId>> parse_response(std::string_view raw,
                                                          const PlannerQuery& query);

class Planner {
 public:
  virtual ~Planner() = default;

  // Validates the query, short-circuits when nothing needs pruning, and adds
  // the consumed usage to both the choice and global_usage().
  PlannerChoice select_relations(const PlannerQuery& query);

  virtual std::string_view kind() const = 0;

 protected:
  virtual PlannerChoice choose(const PlannerQuery& query) = 0;
};

// Ranks by cosine(question, relation label), ties by relation id.
class SimilarityPlanner final : public Planner {
 public:
  explicit SimilarityPlanner(embed::Embedder embedder) : embedder_(embedder) {}

  std::string_view kind() const override { return "sim"; }
  std::vector<kg::RelationId> rank(const PlannerQuery& query) const;

 protected:
  PlannerChoice choose(const PlannerQuery& query) override;

 private:
  embed::Embedder embedder_;
};

// Test double that knows the gold relation-label sequences of each question.
// A candidate is gold when current_path + candidate is a prefix of one of
// them. With probability `noise` (decided by hashing seed, question and path)
// gold candidates are demoted behind all others.
class OraclePlanner final : public Planner {
 public:
  OraclePlanner(std::unordered_map<std::string, std::vector<std::vector<std::string>>> gold,
                double noise, std::uint64_t seed);

  std::string_view kind() const override { return "mock"; }
  bool demoted(const PlannerQuery& query) const;

 protected:
  PlannerChoice choose(const PlannerQuery& query) override;

 private:
  std::unordered_map<std::string, std::vector<std::vector<std::string>>> gold_;
  double noise_;
  std::uint64_t seed_;
};

struct LlmPlannerOptions {
  bool fallback_on_provider_error = true;
  std::size_t max_candidates = 50;
};

// Chat-completions planner; falls back to similarity ranking when the answer
// cannot be used.
class LlmPlanner final : public Planner {
 public:
  LlmPlanner(remote::RemoteConfig config, embed::Embedder embedder, LlmPlannerOptions options = {});

  std::string_view kind() const override { return "llm"; }

 protected:
  PlannerChoice choose(const PlannerQuery& query) override;

 private:
  remote::JsonClient client_;
  SimilarityPlanner similarity_;
  LlmPlannerOptions options_;
};

}  // namespace damr::planner
