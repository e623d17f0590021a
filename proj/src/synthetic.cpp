#include "semcom/synthetic.hpp"

#include <algorithm>
#include <stdexcept>

namespace semcom {

KnowledgeGraph make_synthetic_graph(const SyntheticGraphConfig& cfg) {
  if (cfg.entities < cfg.classes || cfg.classes < 1 || cfg.relations < 1)
    throw std::invalid_argument("bad synthetic graph config");

  Rng rng(cfg.seed);

  std::vector<std::string> entity_labels(cfg.entities);
  std::vector<int> entity_class(cfg.entities);
  std::vector<std::vector<EntityId>> class_members(cfg.classes);
  for (int e = 0; e < cfg.entities; ++e) {
    int c = e % cfg.classes;  // balanced classes
    entity_class[e] = c;
    class_members[c].push_back(e);
    entity_labels[e] = "e" + std::to_string(e) + "_c" + std::to_string(c);
  }

  std::vector<std::string> relation_labels(cfg.relations);
  std::vector<std::pair<int, int>> relation_signature(cfg.relations);
  std::uniform_int_distribution<int> any_class(0, cfg.classes - 1);
  for (int r = 0; r < cfg.relations; ++r) {
    int src = any_class(rng);
    int dst = any_class(rng);
    relation_signature[r] = {src, dst};
    relation_labels[r] = "r" + std::to_string(r) + "_" + std::to_string(src) + "to" +
                         std::to_string(dst);
  }

  // Relations applicable per source class.
  std::vector<std::vector<RelationId>> class_relations(cfg.classes);
  for (int r = 0; r < cfg.relations; ++r)
    class_relations[relation_signature[r].first].push_back(r);

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Triple> triples;
  long target_edges = static_cast<long>(cfg.edges_per_entity * cfg.entities);

  auto draw_tail = [&](int dst_class, EntityId head) {
    const auto& members = class_members[dst_class];
    int hubs = std::max(1, static_cast<int>(members.size() * cfg.hub_fraction));
    // Hubs are the first `hubs` members of the class; shared tails make
    // same-class heads land on overlapping successors, like real KG hubs.
    std::uniform_int_distribution<int> hub_pick(0, hubs - 1);
    std::uniform_int_distribution<int> any_pick(0, static_cast<int>(members.size()) - 1);
    for (int tries = 0; tries < 8; ++tries) {
      EntityId t = coin(rng) < cfg.hub_mass ? members[hub_pick(rng)] : members[any_pick(rng)];
      if (t != head) return t;
    }
    return members[any_pick(rng)];
  };

  std::uniform_int_distribution<EntityId> any_entity(0, cfg.entities - 1);
  long produced = 0;
  long guard = target_edges * 20;
  while (produced < target_edges && guard-- > 0) {
    EntityId head = any_entity(rng);
    const auto& rels = class_relations[entity_class[head]];
    if (rels.empty()) continue;
    std::uniform_int_distribution<std::size_t> rel_pick(0, rels.size() - 1);
    RelationId r = rels[rel_pick(rng)];
    EntityId tail = draw_tail(relation_signature[r].second, head);
    triples.push_back({head, r, tail});
    ++produced;
  }

  return KnowledgeGraph(std::move(entity_labels), std::move(relation_labels), triples);
}

}  // namespace semcom
