#include "damr/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "damr/error.hpp"

namespace damr::kg {

std::uint32_t Interner::intern(std::string_view label) {
  auto [it, inserted] =
      index_.try_emplace(std::string(label), static_cast<std::uint32_t>(labels_.size()));
  if (inserted) labels_.emplace_back(label);
  return it->second;
}

std::optional<std::uint32_t> Interner::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EntityId KnowledgeGraphBuilder::add_entity(std::string_view label) {
  if (label.empty()) throw ParseError("empty entity label");
  return EntityId{entities_.intern(label)};
}

RelationId KnowledgeGraphBuilder::add_relation(std::string_view label, bool inverse) {
  if (label.empty()) throw ParseError("empty relation label");
  RelationId id{relations_.intern(label)};
  if (id.value >= inverse_.size()) inverse_.resize(id.value + 1, false);
  if (inverse) inverse_[id.value] = true;
  return id;
}

void KnowledgeGraphBuilder::add(std::string_view subject, std::string_view relation,
                                std::string_view object) {
  const EntityId s = add_entity(subject);
  const RelationId r = add_relation(relation);
  const EntityId o = add_entity(object);
  triples_.push_back({s, r, o});
  if (include_inverse_) {
    const RelationId inv = add_relation(std::string(relation) + std::string(kInverseSuffix), true);
    triples_.push_back({o, inv, s});
  }
}

void KnowledgeGraphBuilder::add_directed(std::string_view subject, std::string_view relation,
                                         std::string_view object, bool inverse_relation) {
  const EntityId s = add_entity(subject);
  const RelationId r = add_relation(relation, inverse_relation);
  const EntityId o = add_entity(object);
  triples_.push_back({s, r, o});
}

KnowledgeGraph KnowledgeGraphBuilder::build() && {
  KnowledgeGraph kg;
  kg.include_inverse_ = include_inverse_;
  kg.entities_ = std::move(entities_);
  kg.relations_ = std::move(relations_);
  kg.inverse_ = std::move(inverse_);
  kg.inverse_.resize(kg.relations_.size(), false);

  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());
  kg.triples_ = std::move(triples_);

  const std::size_t n = kg.entities_.size();
  kg.offsets_.assign(n + 1, 0);
  for (const Triple& t : kg.triples_) ++kg.offsets_[t.subject.value + 1];
  for (std::size_t i = 0; i < n; ++i) kg.offsets_[i + 1] += kg.offsets_[i];
  kg.edges_.reserve(kg.triples_.size());
  // Triples are sorted by subject first, so edges land in CSR order already.
  for (const Triple& t : kg.triples_) kg.edges_.push_back({t.relation, t.object});
  return kg;
}

std::span<const Edge> KnowledgeGraph::neighbors(EntityId e) const {
  if (!valid(e)) throw LookupError("entity id " + std::to_string(e.value) + " out of range");
  return std::span<const Edge>(edges_).subspan(offsets_[e.value],
                                               offsets_[e.value + 1] - offsets_[e.value]);
}

bool KnowledgeGraph::is_inverse(RelationId r) const {
  if (!valid(r)) throw LookupError("relation id " + std::to_string(r.value) + " out of range");
  return inverse_[r.value];
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view label) const {
  if (auto id = entities_.find(label)) return EntityId{*id};
  return std::nullopt;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view label) const {
  if (auto id = relations_.find(label)) return RelationId{*id};
  return std::nullopt;
}

EntityId KnowledgeGraph::entity(std::string_view label) const {
  if (auto id = find_entity(label)) return *id;
  throw LookupError("unknown entity '" + std::string(label) + "'");
}

RelationId KnowledgeGraph::relation(std::string_view label) const {
  if (auto id = find_relation(label)) return *id;
  throw LookupError("unknown relation '" + std::string(label) + "'");
}

const std::string& KnowledgeGraph::entity_label(EntityId e) const {
  if (!valid(e)) throw LookupError("entity id " + std::to_string(e.value) + " out of range");
  return entities_.label(e.value);
}

const std::string& KnowledgeGraph::relation_label(RelationId r) const {
  if (!valid(r)) throw LookupError("relation id " + std::to_string(r.value) + " out of range");
  return relations_.label(r.value);
}

std::vector<RelationId> EntityPath::relations() const {
  std::vector<RelationId> out;
  out.reserve(hops.size());
  for (const Hop& h : hops) out.push_back(h.relation);
  return out;
}

KnowledgeGraph parse_kg(std::string_view text, bool include_inverse) {
  KnowledgeGraphBuilder builder(include_inverse);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    std::string_view fields[3];
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      const std::string_view field =
          line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start);
      if (count < 3) fields[count] = field;
      ++count;
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (count != 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                       std::to_string(count));
    }
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty label");
    }
    builder.add(fields[0], fields[1], fields[2]);
  }
  return std::move(builder).build();
}

KnowledgeGraph load_kg(const std::filesystem::path& path, bool include_inverse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open knowledge graph file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_kg(buffer.str(), include_inverse);
}

void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write knowledge graph file " + path.string());
  for (const Triple& t : kg.triples()) {
    if (kg.is_inverse(t.relation)) continue;
    out << kg.entity_label(t.subject) << '\t' << kg.relation_label(t.relation) << '\t'
        << kg.entity_label(t.object) << '\n';
  }
}

std::vector<RelationId> outgoing_relations(const KnowledgeGraph& kg, EntityId e) {
  std::vector<RelationId> out;
  for (const Edge& edge : kg.neighbors(e)) {
    if (out.empty() || out.back() != edge.relation) out.push_back(edge.relation);
  }
  return out;
}

std::vector<EntityId> follow(const KnowledgeGraph& kg, std::span<const EntityId> frontier,
                             RelationId r) {
  std::vector<EntityId> out;
  for (EntityId e : frontier) {
    const auto edges = kg.neighbors(e);
    auto it = std::lower_bound(edges.begin(), edges.end(), Edge{r, EntityId{0}});
    for (; it != edges.end() && it->relation == r; ++it) out.push_back(it->target);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

KnowledgeGraph extract_subgraph(const KnowledgeGraph& kg, std::span<const EntityId> topics,
                                std::size_t hops) {
  constexpr std::size_t kUnreached = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(kg.entity_count(), kUnreached);
  std::vector<EntityId> frontier;
  for (EntityId t : topics) {
    if (!kg.valid(t)) throw LookupError("topic id " + std::to_string(t.value) + " out of range");
    if (dist[t.value] != 0) {
      dist[t.value] = 0;
      frontier.push_back(t);
    }
  }

  // A triple (u, r, v) lies on a path of <= hops edges from a topic exactly
  // when u is within hops - 1 edges of some topic.
  std::vector<Triple> kept;
  for (std::size_t depth = 0; depth < hops && !frontier.empty(); ++depth) {
    std::vector<EntityId> next;
    for (EntityId u : frontier) {
      for (const Edge& e : kg.neighbors(u)) {
        kept.push_back({u, e.relation, e.target});
        if (dist[e.target.value] == kUnreached) {
          dist[e.target.value] = depth + 1;
          next.push_back(e.target);
        }
      }
    }
    frontier = std::move(next);
  }

  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
  for (std::uint32_t i = 0; i < kg.entity_count(); ++i) {
    if (dist[i] != kUnreached) entities.push_back(EntityId{i});
  }
  for (const Triple& t : kept) relations.push_back(t.relation);
  std::sort(relations.begin(), relations.end());
  relations.erase(std::unique(relations.begin(), relations.end()), relations.end());

  // add_directed never synthesizes inverses, so the flag only records provenance.
  KnowledgeGraphBuilder builder(kg.include_inverse());
  for (EntityId e : entities) builder.add_entity(kg.entity_label(e));
  for (RelationId r : relations) builder.add_relation(kg.relation_label(r), kg.is_inverse(r));
  for (const Triple& t : kept) {
    builder.add_directed(kg.entity_label(t.subject), kg.relation_label(t.relation),
                         kg.entity_label(t.object), kg.is_inverse(t.relation));
  }
  return std::move(builder).build();
}

KnowledgeGraph extract_subgraph(const KnowledgeGraph& kg,
                                std::span<const std::string> topic_labels, std::size_t hops) {
  std::vector<EntityId> topics;
  topics.reserve(topic_labels.size());
  for (const auto& label : topic_labels) topics.push_back(kg.entity(label));
  return extract_subgraph(kg, topics, hops);
}

EntityPath random_walk(const KnowledgeGraph& kg, EntityId start, std::size_t length,
                       std::mt19937_64& rng) {
  if (length < 1) throw_precondition("random_walk: length must be >= 1");
  EntityPath path{start, {}};
  EntityId current = start;
  for (std::size_t step = 0; step < length; ++step) {
    const auto edges = kg.neighbors(current);
    if (edges.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
    const Edge& e = edges[pick(rng)];
    path.hops.push_back({e.relation, e.target});
    current = e.target;
  }
  return path;
}

namespace {

struct PathEnumerator {
  const KnowledgeGraph& kg;
  std::vector<bool> is_target;
  std::vector<bool> on_path;
  std::size_t max_len;
  std::size_t cap;
  EntityPath current;
  std::vector<EntityPath> out;

  void visit(EntityId at) {
    for (const Edge& e : kg.neighbors(at)) {
      if (out.size() >= cap) return;
      if (on_path[e.target.value]) continue;
      current.hops.push_back({e.relation, e.target});
      on_path[e.target.value] = true;
      if (is_target[e.target.value]) out.push_back(current);
      if (current.hops.size() < max_len) visit(e.target);
      on_path[e.target.value] = false;
      current.hops.pop_back();
    }
  }
};

}  // namespace

std::vector<EntityPath> enumerate_paths(const KnowledgeGraph& kg, EntityId start,
                                        std::span<const EntityId> targets, std::size_t max_len,
                                        std::size_t cap) {
  if (max_len < 1) throw_precondition("enumerate_paths: max_len must be >= 1");
  if (!kg.valid(start)) throw LookupError("start id " + std::to_string(start.value) + " out of range");
  PathEnumerator walker{kg,
                        std::vector<bool>(kg.entity_count(), false),
                        std::vector<bool>(kg.entity_count(), false),
                        max_len,
                        cap,
                        EntityPath{start, {}},
                        {}};
  for (EntityId t : targets) {
    if (kg.valid(t)) walker.is_target[t.value] = true;
  }
  if (cap == 0) return {};
  walker.on_path[start.value] = true;
  walker.visit(start);
  return std::move(walker.out);
}

}  // namespace damr::kg
