#include "damr/evaluate.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "damr/error.hpp"
#include "damr/metrics.hpp"

namespace damr::harness {

std::vector<std::string> predicted_set(const QuestionRecord& record, double margin) {
  std::vector<std::string> out;
  if (record.answers.empty()) return out;
  const double top = record.answers.front().score;
  for (std::size_t i = 0; i < record.answers.size(); ++i) {
    if (record.answers[i].score < top - margin) break;
    out.push_back(record.answer_labels[i]);
  }
  return out;
}

std::vector<std::vector<std::string>> gold_relation_paths(const kg::KnowledgeGraph& kg,
                                                          const QAItem& item,
                                                          std::size_t max_len) {
  std::vector<kg::EntityId> answers;
  for (const auto& a : item.answers) {
    if (auto id = kg.find_entity(a)) answers.push_back(*id);
  }
  std::vector<std::vector<std::string>> out;
  for (const auto& t : item.topic_entities) {
    const auto topic = kg.find_entity(t);
    if (!topic) continue;
    for (const auto& path : kg::enumerate_paths(kg, *topic, answers, max_len, 64)) {
      std::vector<std::string> labels;
      for (const auto& hop : path.hops) labels.push_back(kg.relation_label(hop.relation));
      out.push_back(std::move(labels));
    }
  }
  return out;
}

namespace {

QuestionRecord run_question(const kg::KnowledgeGraph& kg, const QAItem& item,
                            planner::Planner& planner, scorer::ScorerParams& params,
                            const embed::Embedder& embedder, const EvalConfig& config,
                            std::uint64_t seed) {
  QuestionRecord rec;
  rec.id = item.id;
  const auto start = std::chrono::steady_clock::now();
  try {
    std::vector<kg::EntityId> topics;
    for (const auto& t : item.topic_entities) topics.push_back(kg.entity(t));
    auto result = mcts::search(kg, item.question, topics, planner, params, embedder,
                               config.search, seed);
    rec.usage = result.usage;
    rec.stats = result.stats;
    rec.answers = std::move(result.answers);
    for (const auto& a : rec.answers) rec.answer_labels.push_back(kg.entity_label(a.entity));
    rec.hits_at_1 = hits_at_1(rec.answer_labels, item.answers);
    rec.f1 = f1(predicted_set(rec, config.answer_margin), item.answers);
  } catch (const Error& e) {
    rec = QuestionRecord{};
    rec.id = item.id;
    rec.error = e.what();
    spdlog::warn("question {} failed: {}", item.id, e.what());
  }
  if (config.record_timing) {
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return rec;
}

}  // namespace

EvalReport evaluate(const kg::KnowledgeGraph& kg, const std::vector<QAItem>& dataset,
                    planner::Planner& planner, const scorer::ScorerParams& checkpoint,
                    const embed::Embedder& embedder, const EvalConfig& config) {
  config.search.validate(checkpoint.dims.l_max);
  EvalReport report;
  report.per_question.resize(dataset.size());
  const auto counter_before = planner::global_usage().snapshot();

  std::size_t workers = std::max<std::size_t>(1, config.workers);
  if (config.carry_scorer && workers > 1) {
    spdlog::warn("carrying the scorer across questions forces a single worker");
    workers = 1;
  }
  workers = std::min(workers, std::max<std::size_t>(1, dataset.size()));

  if (workers == 1) {
    scorer::ScorerParams carried = checkpoint;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      scorer::ScorerParams fresh;
      scorer::ScorerParams& params = config.carry_scorer ? carried : (fresh = checkpoint);
      report.per_question[i] =
          run_question(kg, dataset[i], planner, params, embedder, config, config.seed + i);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < dataset.size(); i = next++) {
          scorer::ScorerParams params = checkpoint;
          report.per_question[i] =
              run_question(kg, dataset[i], planner, params, embedder, config, config.seed + i);
        }
      });
    }
  }

  const double n = static_cast<double>(std::max<std::size_t>(1, dataset.size()));
  std::uint64_t tokens = 0;
  for (const auto& r : report.per_question) {
    report.mean_hits_at_1 += r.hits_at_1;
    report.mean_f1 += r.f1;
    report.total_llm_calls += r.usage.llm_calls;
    tokens += r.usage.tokens();
    if (r.error) ++report.failures;
  }
  if (!dataset.empty()) {
    report.mean_hits_at_1 /= n;
    report.mean_f1 /= n;
    report.mean_llm_calls = static_cast<double>(report.total_llm_calls) / n;
    report.mean_tokens = static_cast<double>(tokens) / n;
  }
  report.counter_llm_calls = planner::global_usage().snapshot().llm_calls - counter_before.llm_calls;
  return report;
}

std::string report_json(const kg::KnowledgeGraph& kg, const EvalReport& report,
                        const EvalConfig& config) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.per_question) {
    nlohmann::json answers = nlohmann::json::array();
    for (std::size_t i = 0; i < r.answers.size(); ++i) {
      nlohmann::json path = nlohmann::json::array();
      for (auto rel : r.answers[i].path) path.push_back(kg.relation_label(rel));
      answers.push_back(
          {{"entity", r.answer_labels[i]}, {"score", r.answers[i].score}, {"path", path}});
    }
    nlohmann::json row = {{"id", r.id},
                          {"hits_at_1", r.hits_at_1},
                          {"f1", r.f1},
                          {"llm_calls", r.usage.llm_calls},
                          {"prompt_tokens", r.usage.prompt_tokens},
                          {"completion_tokens", r.usage.completion_tokens},
                          {"tokens", r.usage.tokens()},
                          {"expansions", r.stats.expansions},
                          {"nodes", r.stats.nodes},
                          {"finetune_steps", r.stats.finetune_steps},
                          {"answers", answers}};
    if (r.error) row["error"] = *r.error;
    if (r.wall_seconds) row["wall_seconds"] = *r.wall_seconds;
    rows.push_back(std::move(row));
  }
  const auto& s = config.search;
  nlohmann::json doc = {
      {"per_question", rows},
      {"aggregate",
       {{"questions", report.per_question.size()},
        {"failures", report.failures},
        {"hits_at_1", report.mean_hits_at_1},
        {"f1", report.mean_f1},
        {"llm_calls", report.mean_llm_calls},
        {"tokens", report.mean_tokens},
        {"total_llm_calls", report.total_llm_calls},
        {"usage_counter_llm_calls", report.counter_llm_calls}}},
      {"config",
       {{"iterations", s.iterations},
        {"top_k", s.top_k},
        {"max_len", s.max_len},
        {"c", s.c},
        {"mode", std::string(mcts::to_string(s.mode))},
        {"finetune", s.finetune},
        {"finetune_period", s.finetune_period},
        {"pairs_per_finetune", s.pairs_per_finetune},
        {"seed", config.seed},
        {"workers", config.workers},
        {"carry_scorer", config.carry_scorer}}}};
  return doc.dump(2) + "\n";
}

}  // namespace damr::harness
