#pragma once

#include "semcom/channel.hpp"
#include "semcom/embedding.hpp"
#include "semcom/graph.hpp"
#include "semcom/policy.hpp"

namespace semcom {

enum class Slot { Entity, Relation };
enum class InterpretMode { Hard, Soft };

struct RecoveryResult {
  InterpretMode mode = InterpretMode::Hard;
  ExplicitSemantics recovered;   // hard: committed ids; soft: nearest candidates
  std::vector<double> distances; // per decoded slot
  // Soft mode only: the equalized raw vector and the candidate list per slot.
  std::vector<Vec> raw;
  std::vector<std::vector<std::pair<std::int32_t, double>>> candidates;
};

// Entity row minimizing ||y - g(e)|| under the table norm; ties break toward
// the lowest id.
std::pair<EntityId, double> nearest_entity(std::span<const double> y, const EmbeddingTable& table);
std::pair<RelationId, double> nearest_relation(std::span<const double> y,
                                               const EmbeddingTable& table);

// k nearest entities, ascending by (distance, id); truncated when k exceeds
// the table.
std::vector<std::pair<EntityId, double>> candidate_set(std::span<const double> y,
                                                       const EmbeddingTable& table, int k);

// Equalizes by h when CSI is available, then decodes each slot by nearest
// row. Layout gives the slot types in transmission order.
RecoveryResult hard_recover(const TransmitRecord& record, std::span<const Slot> layout,
                            const EmbeddingTable& table);

// Keeps the raw equalized vectors and attaches the k nearest candidate ids
// per slot without committing.
RecoveryResult soft_recover(const TransmitRecord& record, std::span<const Slot> layout,
                            const EmbeddingTable& table, int k = 3);

// Restricts decoding candidates to entities reachable from `prev` via
// relations whose policy probability mass accumulates to top_p; falls back
// to the unrestricted table when the candidate set is empty.
EntityId reasoning_constrained_recover(std::span<const double> y, const EmbeddingTable& table,
                                       const PolicyNetwork& policy, EntityId prev,
                                       const KnowledgeGraph& kg, double top_p);

}  // namespace semcom
