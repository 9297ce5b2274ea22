#include <algorithm>
#include <cctype>
#include <string>

#include "damr/planner.hpp"

namespace damr::planner {

namespace {

constexpr std::string_view kTemplateHead =
    R"(Role
You are an expert assistant for Knowledge Graph Question Answering (KGQA). Your core capability is to deeply understand natural language questions and the semantics of knowledge graph relations to find the most relevant reasoning paths.

Task
Your task is to act as a "Relation Retriever." Given a natural language question and a list of candidate relations, you must analyze the semantics of the question and each relation to select up to k relations that are most likely to lead to the correct answer.

Rules and Constraints
- Fidelity to Candidates: Your selection of relations MUST come strictly from the provided Candidate Relations list. Do not invent or modify relations.
- Quantity Limit: Return no more than k relations. If multiple relations are highly relevant, order them from most to least relevant. If there are fewer than k relevant relations, return only those.
- Output Format: Your response MUST be a list of strings, containing the names of the relations you have selected.

Example
- Input:
  - Question: "who was the president after jfk died"
  - Candidate Relations: {"government.president", "government.president.successor", "location.location.containedby", "people.person.place_of_birth"}
  - K: 2
- Output:
["government.president", "government.president.successor"]

Your Task
)";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

// Parses `[ "a" , "b" ]` starting at s[pos] == '['. Labels are unescaped, so a
// string ends at the first quote followed by `,` or `]`.
bool parse_list_at(std::string_view s, std::size_t pos, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t i = skip_space(s, pos + 1);
  while (true) {
    if (i >= s.size() || s[i] != '"') return false;
    const std::size_t begin = ++i;
    std::size_t next = std::string_view::npos;
    for (std::size_t j = begin; j < s.size(); ++j) {
      if (s[j] != '"') continue;
      const std::size_t k = skip_space(s, j + 1);
      if (k < s.size() && (s[k] == ',' || s[k] == ']')) {
        out.push_back(s.substr(begin, j - begin));
        next = k;
        break;
      }
    }
    if (next == std::string_view::npos) return false;
    if (s[next] == ']') return true;
    i = skip_space(s, next + 1);
  }
}

}  // namespace

std::string render_relations(const std::vector<Candidate>& candidates) {
  std::string out = "{";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i > 0) out += ", ";
    out += '"';
    out += candidates[i].label;
    out += '"';
  }
  out += '}';
  return out;
}

std::string build_prompt(const PlannerQuery& query) {
  std::string out(kTemplateHead);
  out += "- Question: " + query.question + "\n";
  out += "- Candidate Relations: " + render_relations(query.candidates) + "\n";
  out += "- K: " + std::to_string(query.k) + "\n";
  out += "\nOutput:\n[]\n";
  return out;
}

std::optional<std::vector<kg::RelationId>> parse_response(std::string_view raw,
                                                          const PlannerQuery& query) {
  std::vector<std::string_view> items;
  bool found = false;
  for (std::size_t pos = raw.find('['); pos != std::string_view::npos;
       pos = raw.find('[', pos + 1)) {
    if (parse_list_at(raw, pos, items)) {
      found = true;
      break;
    }
  }
  if (!found) return std::nullopt;

  std::vector<kg::RelationId> ranked;
  for (std::string_view item : items) {
    if (ranked.size() == query.k) break;
    const std::string_view label = trim(item);
    for (const auto& c : query.candidates) {
      if (c.label != label) continue;
      if (std::find(ranked.begin(), ranked.end(), c.id) == ranked.end()) ranked.push_back(c.id);
      break;
    }
  }
  if (ranked.empty()) return std::nullopt;
  return ranked;
}

}  // namespace damr::planner
