#include "semcom/graph.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>

namespace semcom {

namespace {

// Splits a TSV line into exactly three non-empty fields.
bool split3(const std::string& line, std::string out[3]) {
  std::size_t a = line.find('\t');
  if (a == std::string::npos) return false;
  std::size_t b = line.find('\t', a + 1);
  if (b == std::string::npos) return false;
  if (line.find('\t', b + 1) != std::string::npos) return false;
  out[0] = line.substr(0, a);
  out[1] = line.substr(a + 1, b - a - 1);
  out[2] = line.substr(b + 1);
  return !out[0].empty() && !out[1].empty() && !out[2].empty();
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<std::string> entity_labels,
                               std::vector<std::string> relation_labels,
                               const std::vector<Triple>& triples)
    : entity_labels_(std::move(entity_labels)), relation_labels_(std::move(relation_labels)) {
  for (std::size_t i = 0; i < entity_labels_.size(); ++i) {
    if (!entity_ids_.emplace(entity_labels_[i], static_cast<EntityId>(i)).second)
      throw std::invalid_argument("duplicate entity label: " + entity_labels_[i]);
  }
  for (std::size_t i = 0; i < relation_labels_.size(); ++i) {
    if (!relation_ids_.emplace(relation_labels_[i], static_cast<RelationId>(i)).second)
      throw std::invalid_argument("duplicate relation label: " + relation_labels_[i]);
  }
  for (const Triple& t : triples) {
    if (t.head < 0 || t.head >= entity_count() || t.tail < 0 || t.tail >= entity_count() ||
        t.relation < 0 || t.relation >= relation_count())
      throw std::invalid_argument("triple id out of range");
    if (triple_set_.insert(triple_key(t.head, t.relation, t.tail)).second)
      triples_.push_back(t);
  }
  build_index();
}

std::uint64_t KnowledgeGraph::triple_key(EntityId h, RelationId r, EntityId t) const {
  std::uint64_t e = static_cast<std::uint64_t>(entity_count());
  std::uint64_t rc = static_cast<std::uint64_t>(relation_count());
  return (static_cast<std::uint64_t>(h) * rc + static_cast<std::uint64_t>(r)) * e +
         static_cast<std::uint64_t>(t);
}

void KnowledgeGraph::build_index() {
  adjacency_.assign(entity_labels_.size(), {});
  for (const Triple& t : triples_) adjacency_[t.head].push_back({t.relation, t.tail});
  for (auto& edges : adjacency_) std::sort(edges.begin(), edges.end());
}

KnowledgeGraph KnowledgeGraph::load(std::istream& in) {
  std::vector<std::string> entity_labels, relation_labels;
  std::unordered_map<std::string, EntityId> eids;
  std::unordered_map<std::string, RelationId> rids;
  std::vector<Triple> triples;

  auto intern = [](auto& map, auto& labels, const std::string& label) {
    auto [it, inserted] = map.emplace(label, static_cast<std::int32_t>(labels.size()));
    if (inserted) labels.push_back(label);
    return it->second;
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string f[3];
    if (!split3(line, f))
      throw ParseError(lineno, "expected head<TAB>relation<TAB>tail, got \"" + line + "\"");
    EntityId h = intern(eids, entity_labels, f[0]);
    RelationId r = intern(rids, relation_labels, f[1]);
    EntityId t = intern(eids, entity_labels, f[2]);
    triples.push_back({h, r, t});
  }
  return KnowledgeGraph(std::move(entity_labels), std::move(relation_labels), triples);
}

void KnowledgeGraph::serialize(std::ostream& out) const {
  out << "#entities=" << entity_count() << " relations=" << relation_count() << "\n";
  for (const Triple& t : triples_)
    out << entity_labels_[t.head] << '\t' << relation_labels_[t.relation] << '\t'
        << entity_labels_[t.tail] << '\n';
}

std::span<const Edge> KnowledgeGraph::neighbors(EntityId e) const {
  if (e < 0 || e >= entity_count())
    throw std::out_of_range("unknown entity id " + std::to_string(e));
  return adjacency_[e];
}

bool KnowledgeGraph::has_triple(EntityId h, RelationId r, EntityId t) const {
  if (h < 0 || h >= entity_count() || t < 0 || t >= entity_count() || r < 0 ||
      r >= relation_count())
    return false;
  return triple_set_.contains(triple_key(h, r, t));
}

const std::string& KnowledgeGraph::entity_label(EntityId e) const {
  if (e < 0 || e >= entity_count())
    throw std::out_of_range("unknown entity id " + std::to_string(e));
  return entity_labels_[e];
}

const std::string& KnowledgeGraph::relation_label(RelationId r) const {
  if (r < 0 || r >= relation_count())
    throw std::out_of_range("unknown relation id " + std::to_string(r));
  return relation_labels_[r];
}

std::optional<EntityId> KnowledgeGraph::entity_id(const std::string& label) const {
  auto it = entity_ids_.find(label);
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::relation_id(const std::string& label) const {
  auto it = relation_ids_.find(label);
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph sample_skg(const KnowledgeGraph& kg, int entity_budget, std::uint64_t seed) {
  if (entity_budget < 1 || entity_budget > kg.entity_count())
    throw std::invalid_argument("entity budget must be in [1, entity_count]");

  Rng rng(seed);
  std::uniform_int_distribution<EntityId> any_entity(0, kg.entity_count() - 1);

  std::vector<EntityId> order;
  std::unordered_set<EntityId> selected;
  auto add = [&](EntityId e) {
    if (selected.insert(e).second) {
      order.push_back(e);
      return true;
    }
    return false;
  };

  EntityId cur = any_entity(rng);
  add(cur);
  int stale = 0;  // walk steps since the last new entity
  while (static_cast<int>(order.size()) < entity_budget) {
    auto edges = kg.neighbors(cur);
    if (!edges.empty() && stale <= 32) {
      std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
      cur = edges[pick(rng)].tail;
      if (add(cur)) stale = 0; else ++stale;
    } else {
      cur = any_entity(rng);
      add(cur);
      stale = 0;
    }
  }

  std::unordered_map<EntityId, EntityId> entity_remap;
  std::vector<std::string> entity_labels;
  for (EntityId e : order) {
    entity_remap.emplace(e, static_cast<EntityId>(entity_labels.size()));
    entity_labels.push_back(kg.entity_label(e));
  }

  std::unordered_map<RelationId, RelationId> relation_remap;
  std::vector<std::string> relation_labels;
  std::vector<Triple> triples;
  for (const Triple& t : kg.triples()) {
    auto hi = entity_remap.find(t.head);
    auto ti = entity_remap.find(t.tail);
    if (hi == entity_remap.end() || ti == entity_remap.end()) continue;
    auto [ri, inserted] = relation_remap.emplace(
        t.relation, static_cast<RelationId>(relation_labels.size()));
    if (inserted) relation_labels.push_back(kg.relation_label(t.relation));
    triples.push_back({hi->second, ri->second, ti->second});
  }
  return KnowledgeGraph(std::move(entity_labels), std::move(relation_labels), triples);
}

std::vector<std::int32_t> SemanticPath::key() const {
  std::vector<std::int32_t> k;
  k.reserve(1 + 2 * steps.size());
  k.push_back(start);
  for (const Step& s : steps) {
    k.push_back(s.relation);
    k.push_back(s.entity);
  }
  return k;
}

bool replay_valid(const KnowledgeGraph& kg, const SemanticPath& path) {
  if (path.start < 0 || path.start >= kg.entity_count()) return false;
  EntityId cur = path.start;
  for (const SemanticPath::Step& s : path.steps) {
    if (!kg.has_triple(cur, s.relation, s.entity)) return false;
    cur = s.entity;
  }
  return true;
}

namespace {

// Shortest splice of a forward BFS tree from `start` and a backward BFS tree
// from `goal`; ties broken by lowest meeting entity id.
std::optional<SemanticPath> bidirectional_path(
    const KnowledgeGraph& kg, const std::vector<std::vector<Edge>>& reverse_adj,
    EntityId start, EntityId goal, int max_length) {
  struct Hop {
    EntityId prev;
    RelationId relation;
    int depth;
  };
  int fwd_depth = (max_length + 1) / 2;
  int bwd_depth = max_length / 2;

  auto bfs = [&](EntityId origin, int limit, bool forward) {
    std::unordered_map<EntityId, Hop> tree;
    tree.emplace(origin, Hop{-1, -1, 0});
    std::deque<EntityId> queue{origin};
    while (!queue.empty()) {
      EntityId e = queue.front();
      queue.pop_front();
      int depth = tree.at(e).depth;
      if (depth == limit) continue;
      if (forward) {
        for (const Edge& edge : kg.neighbors(e))
          if (tree.emplace(edge.tail, Hop{e, edge.relation, depth + 1}).second)
            queue.push_back(edge.tail);
      } else {
        for (const Edge& edge : reverse_adj[e])
          if (tree.emplace(edge.tail, Hop{e, edge.relation, depth + 1}).second)
            queue.push_back(edge.tail);
      }
    }
    return tree;
  };

  auto fwd = bfs(start, fwd_depth, true);
  auto bwd = bfs(goal, bwd_depth, false);

  EntityId meet = -1;
  int best_len = max_length + 1;
  for (const auto& [e, hop] : fwd) {
    auto it = bwd.find(e);
    if (it == bwd.end()) continue;
    int len = hop.depth + it->second.depth;
    if (len == 0) continue;  // start == goal
    if (len < best_len || (len == best_len && e < meet)) {
      best_len = len;
      meet = e;
    }
  }
  if (meet < 0) return std::nullopt;

  // start -> meet from the forward tree.
  std::vector<SemanticPath::Step> prefix;
  for (EntityId e = meet; e != start;) {
    const Hop& hop = fwd.at(e);
    prefix.push_back({hop.relation, e});
    e = hop.prev;
  }
  std::reverse(prefix.begin(), prefix.end());

  SemanticPath path;
  path.start = start;
  path.steps = std::move(prefix);
  // meet -> goal from the backward tree (edges are stored reversed).
  for (EntityId e = meet; e != goal;) {
    const Hop& hop = bwd.at(e);
    path.steps.push_back({hop.relation, hop.prev});
    e = hop.prev;
  }
  return path;
}

bool all_entities_distinct(const SemanticPath& path) {
  std::unordered_set<EntityId> seen{path.start};
  for (const auto& s : path.steps)
    if (!seen.insert(s.entity).second) return false;
  return true;
}

}  // namespace

ExpertPathSet generate_expert_paths(const KnowledgeGraph& kg, int max_length, int count,
                                    std::uint64_t seed) {
  if (max_length < 1) throw std::invalid_argument("max_length must be >= 1");
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  if (kg.triples().empty()) throw std::invalid_argument("graph has no edges");

  std::vector<std::vector<Edge>> reverse_adj(kg.entity_count());
  for (const Triple& t : kg.triples()) reverse_adj[t.tail].push_back({t.relation, t.head});
  for (auto& edges : reverse_adj) std::sort(edges.begin(), edges.end());

  Rng rng(seed);
  std::uniform_int_distribution<EntityId> any_entity(0, kg.entity_count() - 1);

  ExpertPathSet set;
  set.max_length = max_length;
  long attempts = 0;
  const long attempt_budget = std::max(200L, 40L * count);
  while (static_cast<int>(set.paths.size()) < count && attempts < attempt_budget) {
    ++attempts;
    EntityId start = any_entity(rng);
    EntityId goal = any_entity(rng);
    if (start == goal) continue;
    auto path = bidirectional_path(kg, reverse_adj, start, goal, max_length);
    if (!path || !all_entities_distinct(*path)) continue;
    set.paths.push_back(std::move(*path));
  }
  set.complete = static_cast<int>(set.paths.size()) == count;
  return set;
}

}  // namespace semcom
