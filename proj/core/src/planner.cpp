#include "damr/planner.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "damr/error.hpp"

namespace damr::planner {

std::string_view to_string(Source s) {
  switch (s) {
    case Source::llm: return "llm";
    case Source::similarity: return "similarity";
    case Source::mock: return "mock";
    case Source::fallback: return "fallback";
  }
  return "unknown";
}

void UsageCounter::add(const Usage& u) {
  calls_.fetch_add(u.llm_calls, std::memory_order_relaxed);
  prompt_.fetch_add(u.prompt_tokens, std::memory_order_relaxed);
  completion_.fetch_add(u.completion_tokens, std::memory_order_relaxed);
}

Usage UsageCounter::snapshot() const {
  return {calls_.load(), prompt_.load(), completion_.load()};
}

void UsageCounter::reset() {
  calls_ = 0;
  prompt_ = 0;
  completion_ = 0;
}

UsageCounter& global_usage() {
  static UsageCounter counter;
  return counter;
}

std::uint64_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

namespace {

Source natural_source(std::string_view kind) {
  if (kind == "llm") return Source::llm;
  if (kind == "sim") return Source::similarity;
  return Source::mock;
}

std::string render_answer(const PlannerQuery& query, const std::vector<kg::RelationId>& ranked) {
  std::string out = "[";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    for (const auto& c : query.candidates) {
      if (c.id != ranked[i]) continue;
      if (i > 0) out += ", ";
      out += '"' + c.label + '"';
      break;
    }
  }
  return out + "]";
}

// Offline planners report what the equivalent prompt and answer would cost.
Usage offline_usage(const PlannerQuery& query, const std::vector<kg::RelationId>& ranked) {
  return {1, estimate_tokens(build_prompt(query)),
          estimate_tokens(render_answer(query, ranked))};
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (char c : bytes) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  return h;
}

}  // namespace

PlannerChoice Planner::select_relations(const PlannerQuery& query) {
  if (query.k < 1) throw_precondition("planner query needs k >= 1");
  if (query.candidates.empty()) throw_precondition("planner query has no candidates");
  {
    std::unordered_set<kg::RelationId> seen;
    for (const auto& c : query.candidates) {
      if (!seen.insert(c.id).second) throw_precondition("planner candidates contain duplicates");
    }
  }

  PlannerChoice choice;
  if (query.candidates.size() <= query.k) {
    for (const auto& c : query.candidates) choice.ranked.push_back(c.id);
    choice.source = natural_source(kind());
    return choice;
  }

  choice = choose(query);
  // Enforce the subset / size / uniqueness contract whatever the backend did.
  std::vector<kg::RelationId> clean;
  for (auto id : choice.ranked) {
    if (clean.size() == query.k) break;
    const bool known = std::any_of(query.candidates.begin(), query.candidates.end(),
                                   [&](const Candidate& c) { return c.id == id; });
    if (known && std::find(clean.begin(), clean.end(), id) == clean.end()) clean.push_back(id);
  }
  choice.ranked = std::move(clean);
  global_usage().add(choice.usage);
  return choice;
}

std::vector<kg::RelationId> SimilarityPlanner::rank(const PlannerQuery& query) const {
  const auto zq = embedder_(query.question);
  std::vector<std::pair<double, kg::RelationId>> scored;
  scored.reserve(query.candidates.size());
  for (const auto& c : query.candidates) {
    scored.emplace_back(embed::cosine(*zq, *embedder_(c.label)), c.id);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<kg::RelationId> out;
  out.reserve(scored.size());
  for (const auto& [s, id] : scored) out.push_back(id);
  return out;
}

PlannerChoice SimilarityPlanner::choose(const PlannerQuery& query) {
  PlannerChoice choice;
  choice.ranked = rank(query);
  choice.ranked.resize(std::min(choice.ranked.size(), query.k));
  choice.source = Source::similarity;
  choice.usage = offline_usage(query, choice.ranked);
  return choice;
}

OraclePlanner::OraclePlanner(
    std::unordered_map<std::string, std::vector<std::vector<std::string>>> gold, double noise,
    std::uint64_t seed)
    : gold_(std::move(gold)), noise_(noise), seed_(seed) {
  if (!(noise >= 0.0 && noise <= 1.0)) throw InputError("oracle noise must lie in [0, 1]");
}

bool OraclePlanner::demoted(const PlannerQuery& query) const {
  if (noise_ <= 0.0) return false;
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed_);
  h = fnv1a(h, query.question);
  for (const auto& label : query.current_path) {
    h = fnv1a(h, "\x1f");
    h = fnv1a(h, label);
  }
  const double u = static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
  return u < noise_;
}

PlannerChoice OraclePlanner::choose(const PlannerQuery& query) {
  const auto it = gold_.find(query.question);
  auto is_gold = [&](const std::string& label) {
    if (it == gold_.end()) return false;
    const auto& path = query.current_path;
    for (const auto& seq : it->second) {
      if (seq.size() <= path.size()) continue;
      if (std::equal(path.begin(), path.end(), seq.begin()) && seq[path.size()] == label) {
        return true;
      }
    }
    return false;
  };
  const bool demote = demoted(query);

  std::vector<std::size_t> order(query.candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<bool> gold(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) gold[i] = is_gold(query.candidates[i].label);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool ga = gold[a] != demote;
    const bool gb = gold[b] != demote;
    if (ga != gb) return ga;
    const auto& ca = query.candidates[a];
    const auto& cb = query.candidates[b];
    if (ca.label != cb.label) return ca.label < cb.label;
    return ca.id < cb.id;
  });

  PlannerChoice choice;
  for (std::size_t i = 0; i < order.size() && choice.ranked.size() < query.k; ++i) {
    choice.ranked.push_back(query.candidates[order[i]].id);
  }
  choice.source = Source::mock;
  choice.usage = offline_usage(query, choice.ranked);
  return choice;
}

LlmPlanner::LlmPlanner(remote::RemoteConfig config, embed::Embedder embedder,
                       LlmPlannerOptions options)
    : client_(std::move(config)), similarity_(embedder), options_(options) {
  if (options_.max_candidates < 1) throw InputError("max_candidates must be >= 1");
}

PlannerChoice LlmPlanner::choose(const PlannerQuery& full) {
  PlannerQuery query = full;
  if (query.candidates.size() > options_.max_candidates) {
    auto ranked = similarity_.rank(full);
    ranked.resize(options_.max_candidates);
    std::unordered_set<kg::RelationId> keep(ranked.begin(), ranked.end());
    std::erase_if(query.candidates, [&](const Candidate& c) { return !keep.contains(c.id); });
  }
  const std::string prompt = build_prompt(query);

  PlannerChoice choice;
  choice.usage.llm_calls = 1;
  auto fall_back = [&](const std::string& reason) {
    spdlog::warn("llm planner falling back to similarity: {}", reason);
    choice.ranked = similarity_.rank(query);
    choice.ranked.resize(std::min(choice.ranked.size(), query.k));
    choice.source = Source::fallback;
    return choice;
  };

  nlohmann::json body = {{"model", client_.config().model},
                         {"messages", {{{"role", "user"}, {"content", prompt}}}},
                         {"temperature", 0}};
  std::string raw;
  try {
    raw = client_.post("/chat/completions", body.dump());
  } catch (const ProviderError& e) {
    choice.usage.prompt_tokens = estimate_tokens(prompt);
    if (!options_.fallback_on_provider_error) throw PlannerError(e.what());
    return fall_back(e.what());
  }

  std::string content;
  bool have_usage = false;
  try {
    const auto reply = nlohmann::json::parse(raw);
    const auto& msg = reply.at("choices").at(0).at("message").at("content");
    if (msg.is_string()) content = msg.get<std::string>();
    if (reply.contains("usage") && reply["usage"].is_object()) {
      const auto& u = reply["usage"];
      if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_unsigned() &&
          u.contains("completion_tokens") && u["completion_tokens"].is_number_unsigned()) {
        choice.usage.prompt_tokens = u["prompt_tokens"].get<std::uint64_t>();
        choice.usage.completion_tokens = u["completion_tokens"].get<std::uint64_t>();
        have_usage = true;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    choice.usage.prompt_tokens = estimate_tokens(prompt);
    return fall_back(std::string("malformed completion: ") + e.what());
  }
  if (!have_usage) {
    choice.usage.prompt_tokens = estimate_tokens(prompt);
    choice.usage.completion_tokens = estimate_tokens(content);
  }

  auto parsed = parse_response(content, query);
  if (!parsed) return fall_back("no usable relation list in completion");
  choice.ranked = std::move(*parsed);
  choice.source = Source::llm;
  return choice;
}

}  // namespace damr::planner
