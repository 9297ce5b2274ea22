#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace damr::kg {

// Dense index into one of the graph's interning tables.
template <typename Tag>
struct Id {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(Id, Id) = default;
};

using EntityId = Id<struct EntityTag>;
using RelationId = Id<struct RelationTag>;

struct Triple {
  EntityId subject;
  RelationId relation;
  EntityId object;

  friend constexpr auto operator<=>(const Triple&, const Triple&) = default;
};

struct Edge {
  RelationId relation;
  EntityId target;

  friend constexpr auto operator<=>(const Edge&, const Edge&) = default;
};

struct LabeledTriple {
  std::string subject;
  std::string relation;
  std::string object;
};

// Suffix appended to a relation label to name its reverse direction.
inline constexpr std::string_view kInverseSuffix = "^inv";

// Bijective label <-> dense id table. Ids are assigned in first-seen order.
class Interner {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

class KnowledgeGraph;

// Accumulates labeled triples, then freezes them into a KnowledgeGraph.
class KnowledgeGraphBuilder {
 public:
  explicit KnowledgeGraphBuilder(bool include_inverse = false)
      : include_inverse_(include_inverse) {}

  EntityId add_entity(std::string_view label);
  RelationId add_relation(std::string_view label, bool inverse = false);
  // Adds (s, r, o) and, when the builder includes inverses, (o, r^inv, s).
  void add(std::string_view subject, std::string_view relation, std::string_view object);
  // Adds exactly one triple; no inverse is generated.
  void add_directed(std::string_view subject, std::string_view relation, std::string_view object,
                    bool inverse_relation);

  KnowledgeGraph build() &&;

 private:
  bool include_inverse_;
  Interner entities_;
  Interner relations_;
  std::vector<bool> inverse_;
  std::vector<Triple> triples_;
};

// Immutable triple store with CSR forward adjacency. When built with
// include_inverse, every (s, r, o) also materializes (o, r^inv, s).
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  std::size_t triple_count() const { return triples_.size(); }
  bool include_inverse() const { return include_inverse_; }

  // Sorted by (subject, relation, object); duplicate-free.
  const std::vector<Triple>& triples() const { return triples_; }

  // Outgoing edges of `e`, sorted by (relation id, target id).
  std::span<const Edge> neighbors(EntityId e) const;

  bool valid(EntityId e) const { return e.value < entities_.size(); }
  bool valid(RelationId r) const { return r.value < relations_.size(); }
  bool is_inverse(RelationId r) const;

  std::optional<EntityId> find_entity(std::string_view label) const;
  std::optional<RelationId> find_relation(std::string_view label) const;
  EntityId entity(std::string_view label) const;      // throws LookupError
  RelationId relation(std::string_view label) const;  // throws LookupError

  const std::string& entity_label(EntityId e) const;
  const std::string& relation_label(RelationId r) const;

 private:
  friend class KnowledgeGraphBuilder;

  bool include_inverse_ = false;
  Interner entities_;
  Interner relations_;
  std::vector<bool> inverse_;
  std::vector<Triple> triples_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Edge> edges_;
};

struct Hop {
  RelationId relation;
  EntityId entity;

  friend constexpr auto operator<=>(const Hop&, const Hop&) = default;
};

// A grounded walk: start entity followed by (relation, entity) hops.
struct EntityPath {
  EntityId start;
  std::vector<Hop> hops;

  EntityId end() const { return hops.empty() ? start : hops.back().entity; }
  std::vector<RelationId> relations() const;

  friend bool operator==(const EntityPath&, const EntityPath&) = default;
};

// Tab-separated `subject\trelation\tobject`, one per line; `#` lines ignored.
KnowledgeGraph load_kg(const std::filesystem::path& path, bool include_inverse);
KnowledgeGraph parse_kg(std::string_view text, bool include_inverse);
// Writes the non-inverse triples in sorted order.
void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& path);

std::vector<RelationId> outgoing_relations(const KnowledgeGraph& kg, EntityId e);

std::vector<EntityId> follow(const KnowledgeGraph& kg, std::span<const EntityId> frontier,
                             RelationId r);

// Every triple lying on a path of at most `hops` edges from a topic, with
// entities and relations re-interned in ascending parent-id order.
KnowledgeGraph extract_subgraph(const KnowledgeGraph& kg, std::span<const EntityId> topics,
                                std::size_t hops);
KnowledgeGraph extract_subgraph(const KnowledgeGraph& kg,
                                std::span<const std::string> topic_labels, std::size_t hops);

EntityPath random_walk(const KnowledgeGraph& kg, EntityId start, std::size_t length,
                       std::mt19937_64& rng);

// Depth-first, lexicographic in (relation id, entity id) order. Paths never
// revisit an entity. Stops once `cap` paths are collected.
std::vector<EntityPath> enumerate_paths(const KnowledgeGraph& kg, EntityId start,
                                        std::span<const EntityId> targets, std::size_t max_len,
                                        std::size_t cap);

}  // namespace damr::kg

template <typename Tag>
struct std::hash<damr::kg::Id<Tag>> {
  std::size_t operator()(damr::kg::Id<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
