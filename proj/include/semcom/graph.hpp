#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "semcom/core.hpp"

namespace semcom {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct Edge {
  RelationId relation;
  EntityId tail;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// A user's knowledge base: entities, typed relations, and forward adjacency.
/// Immutable after construction; safe to share read-only across workers.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Labels must be unique within each table; triples are deduplicated, ids
  // must be in range.
  KnowledgeGraph(std::vector<std::string> entity_labels,
                 std::vector<std::string> relation_labels,
                 const std::vector<Triple>& triples);

  // One `head<TAB>relation<TAB>tail` per line; '#' lines and blank lines are
  // skipped. Ids are assigned by first appearance, duplicate triples dropped.
  static KnowledgeGraph load(std::istream& in);
  void serialize(std::ostream& out) const;

  int entity_count() const { return static_cast<int>(entity_labels_.size()); }
  int relation_count() const { return static_cast<int>(relation_labels_.size()); }
  const std::vector<Triple>& triples() const { return triples_; }

  // Forward adjacency, sorted by (relation, tail). Throws std::out_of_range
  // for an unknown entity.
  std::span<const Edge> neighbors(EntityId e) const;

  bool has_triple(EntityId h, RelationId r, EntityId t) const;

  const std::string& entity_label(EntityId e) const;
  const std::string& relation_label(RelationId r) const;
  std::optional<EntityId> entity_id(const std::string& label) const;
  std::optional<RelationId> relation_id(const std::string& label) const;

 private:
  void build_index();
  std::uint64_t triple_key(EntityId h, RelationId r, EntityId t) const;

  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
  std::vector<Triple> triples_;
  std::vector<std::vector<Edge>> adjacency_;
  std::unordered_set<std::uint64_t> triple_set_;
};

// Induced subgraph on `entity_budget` entities collected by seeded random
// walks (with restarts); keeps every triple among the selected entities.
KnowledgeGraph sample_skg(const KnowledgeGraph& kg, int entity_budget, std::uint64_t seed);

/// Alternating entity/relation sequence starting at a visible entity.
struct SemanticPath {
  struct Step {
    RelationId relation;
    EntityId entity;
    friend bool operator==(const Step&, const Step&) = default;
  };
  EntityId start = -1;
  std::vector<Step> steps;

  int length() const { return static_cast<int>(steps.size()); }
  EntityId terminal() const { return steps.empty() ? start : steps.back().entity; }
  // Flat id sequence (start, r0, e1, r1, e2, ...) used to key distributions.
  std::vector<std::int32_t> key() const;
  friend bool operator==(const SemanticPath&, const SemanticPath&) = default;
};

// True iff every step follows a forward adjacency edge of kg.
bool replay_valid(const KnowledgeGraph& kg, const SemanticPath& path);

struct ExplicitSemantics {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
};

struct ExpertPathSet {
  std::vector<SemanticPath> paths;
  int max_length = 0;
  bool complete = true;  // false when fewer paths than requested were found
};

// Seeded (start, goal) pairs resolved by two-sided BFS with a meet-in-the-
// middle splice; paths with repeated entities are rejected and resampled.
ExpertPathSet generate_expert_paths(const KnowledgeGraph& kg, int max_length, int count,
                                    std::uint64_t seed);

}  // namespace semcom
