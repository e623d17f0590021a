#include "semcom/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace semcom {

namespace {

double row_distance(std::span<const double> y, std::span<const double> row, Norm norm) {
  double acc = 0.0;
  if (norm == Norm::L1) {
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::fabs(y[i] - row[i]);
    return acc;
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    double d = y[i] - row[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

std::pair<std::int32_t, double> nearest_row(std::span<const double> y,
                                            const EmbeddingTable& table, bool entities) {
  int count = entities ? table.entity_count() : table.relation_count();
  int dim = entities ? table.n : table.n_prime;
  if (count == 0) throw std::invalid_argument("nearest: empty table");
  if (static_cast<int>(y.size()) != dim)
    throw std::invalid_argument("nearest: dimension mismatch");
  std::int32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::int32_t id = 0; id < count; ++id) {
    double d = row_distance(y, entities ? table.entity(id) : table.relation(id), table.norm);
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return {best, best_d};
}

// Number of channel symbols one slot occupies.
std::size_t slot_symbols(Slot slot, const EmbeddingTable& table, Packing packing) {
  int dim = slot == Slot::Entity ? table.n : table.n_prime;
  return packing == Packing::Real ? dim : dim / 2;
}

// Equalized real vector for one slot of the record.
Vec slot_vector(const TransmitRecord& record, std::size_t offset, Slot slot,
                const EmbeddingTable& table) {
  int dim = slot == Slot::Entity ? table.n : table.n_prime;
  std::size_t count = slot_symbols(slot, table, record.packing);
  std::vector<std::complex<double>> symbols(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::complex<double> v = record.y[offset + i];
    if (record.csi_at_receiver) {
      std::complex<double> h = record.h[offset + i];
      if (std::abs(h) > 0) v /= h;
    }
    symbols[i] = v;
  }
  return unpack_symbols(symbols, record.packing, dim);
}

}  // namespace

std::pair<EntityId, double> nearest_entity(std::span<const double> y,
                                           const EmbeddingTable& table) {
  return nearest_row(y, table, true);
}

std::pair<RelationId, double> nearest_relation(std::span<const double> y,
                                               const EmbeddingTable& table) {
  return nearest_row(y, table, false);
}

std::vector<std::pair<EntityId, double>> candidate_set(std::span<const double> y,
                                                       const EmbeddingTable& table, int k) {
  if (k < 1) throw std::invalid_argument("candidate_set: k must be >= 1");
  if (table.entity_count() == 0) throw std::invalid_argument("candidate_set: empty table");
  std::vector<std::pair<EntityId, double>> all;
  all.reserve(table.entity_count());
  for (EntityId id = 0; id < table.entity_count(); ++id)
    all.emplace_back(id, row_distance(y, table.entity(id), table.norm));
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  if (static_cast<int>(all.size()) > k) all.resize(k);
  return all;
}

namespace {

RecoveryResult recover(const TransmitRecord& record, std::span<const Slot> layout,
                       const EmbeddingTable& table, InterpretMode mode, int k) {
  std::size_t expected = 0;
  for (Slot slot : layout) expected += slot_symbols(slot, table, record.packing);
  if (expected != record.y.size())
    throw std::invalid_argument("recover: layout does not match record length");

  RecoveryResult result;
  result.mode = mode;
  std::size_t offset = 0;
  for (Slot slot : layout) {
    Vec v = slot_vector(record, offset, slot, table);
    offset += slot_symbols(slot, table, record.packing);
    if (slot == Slot::Entity) {
      if (mode == InterpretMode::Hard) {
        auto [id, d] = nearest_entity(v, table);
        result.recovered.entities.push_back(id);
        result.distances.push_back(d);
      } else {
        auto cands = candidate_set(v, table, k);
        result.recovered.entities.push_back(cands.front().first);
        result.distances.push_back(cands.front().second);
        result.candidates.push_back(std::move(cands));
        result.raw.push_back(std::move(v));
      }
    } else {
      auto [id, d] = nearest_relation(v, table);
      result.recovered.relations.push_back(id);
      result.distances.push_back(d);
      if (mode == InterpretMode::Soft) {
        result.candidates.push_back({{id, d}});
        result.raw.push_back(std::move(v));
      }
    }
  }
  return result;
}

}  // namespace

RecoveryResult hard_recover(const TransmitRecord& record, std::span<const Slot> layout,
                            const EmbeddingTable& table) {
  return recover(record, layout, table, InterpretMode::Hard, 1);
}

RecoveryResult soft_recover(const TransmitRecord& record, std::span<const Slot> layout,
                            const EmbeddingTable& table, int k) {
  return recover(record, layout, table, InterpretMode::Soft, k);
}

EntityId reasoning_constrained_recover(std::span<const double> y, const EmbeddingTable& table,
                                       const PolicyNetwork& policy, EntityId prev,
                                       const KnowledgeGraph& kg, double top_p) {
  if (!(top_p > 0.0) || top_p > 1.0)
    throw std::invalid_argument("reasoning_constrained_recover: top_p must be in (0, 1]");

  // Evaluate the policy at a single-entity path anchored at prev.
  State state;
  state.path.start = prev;
  state.t = 0;
  ActionMask mask = valid_actions(state, kg);

  std::vector<EntityId> reachable;
  if (std::find(mask.begin(), mask.end(), 1) != mask.end()) {
    Vec features = featurize_state(state, table, 1);
    Vec dist = policy_forward(policy, features, mask);

    // Relations by descending probability (id breaks ties) until top_p mass.
    std::vector<RelationId> by_prob;
    for (RelationId r = 0; r < static_cast<RelationId>(dist.size()); ++r)
      if (dist[r] > 0) by_prob.push_back(r);
    std::sort(by_prob.begin(), by_prob.end(), [&](RelationId a, RelationId b) {
      return dist[a] != dist[b] ? dist[a] > dist[b] : a < b;
    });
    std::unordered_set<RelationId> chosen;
    double mass = 0.0;
    for (RelationId r : by_prob) {
      chosen.insert(r);
      mass += dist[r];
      if (mass >= top_p) break;
    }

    std::unordered_set<EntityId> seen;
    for (const Edge& e : kg.neighbors(prev))
      if (chosen.contains(e.relation) && e.tail != prev && seen.insert(e.tail).second)
        reachable.push_back(e.tail);
  }

  if (reachable.empty()) return nearest_entity(y, table).first;

  EntityId best = reachable.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (EntityId id : reachable) {
    double d = row_distance(y, table.entity(id), table.norm);
    if (d < best_d || (d == best_d && id < best)) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

}  // namespace semcom
