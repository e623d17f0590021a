#pragma once

#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "semcom/comparator.hpp"
#include "semcom/graph.hpp"
#include "semcom/synthetic.hpp"

namespace semcom::test {

inline KnowledgeGraph graph_from_tsv(const std::string& tsv) {
  std::istringstream in(tsv);
  return KnowledgeGraph::load(in);
}

// a -r-> b -r-> c -r-> d
inline KnowledgeGraph chain_graph() {
  return graph_from_tsv("a\tr\tb\nb\tr\tc\nc\tr\td\n");
}

// Chain with decoy branches: the policy has a real choice at a and b.
//   a -r-> b -r-> c      a -q-> x      b -q-> y
inline KnowledgeGraph decoy_chain_graph() {
  return graph_from_tsv("a\tr\tb\nb\tr\tc\na\tq\tx\nb\tq\ty\n");
}

// ---- 20-entity toy benchmark ----
// Three districts with a branch decision at the start, deterministic
// continuations of length 3, and a shared stray sink the generating
// mechanism never takes. Every (entity, relation) pair has a unique tail, so
// a policy can concentrate on any path the mechanism uses, and every
// mechanism path runs to length 3 or a terminal entity.
inline KnowledgeGraph toy20_graph() {
  std::string tsv =
      // district 0: s0 branches left (a0 chain) or right (d0 chain)
      "s0\tleft\ta0\n"
      "a0\tgo\tb0\n"
      "b0\tgo\tc0\n"
      "s0\tright\td0\n"
      "d0\tgo\tf0\n"
      "f0\tgo\tg0\n"
      "s0\tstray\tu\n"
      // district 1
      "s1\tleft\ta1\n"
      "a1\tgo\tb1\n"
      "b1\tgo\tc1\n"
      "s1\tright\td1\n"
      "d1\tgo\tf1\n"
      "f1\tgo\tg1\n"
      "s1\tstray\tu\n"
      // district 2: single shorter route ending at a terminal entity
      "s2\tleft\tx\n"
      "x\tgo\ty\n"
      "s2\tstray\tu\n"
      // padding so the graph has 20 entities
      "pad0\tgo\tpad1\n";
  return graph_from_tsv(tsv);
}

// The hidden mechanism behind toy20: start uniform over {s0, s1, s2}; branch
// probabilities 0.7/0.3 at s0, 0.4/0.6 at s1, single route at s2.
inline SemanticPath toy20_sample(const KnowledgeGraph& g, Rng& rng) {
  auto id = [&](const char* label) { return *g.entity_id(label); };
  auto rel = [&](const char* label) { return *g.relation_id(label); };
  std::uniform_int_distribution<int> pick_start(0, 2);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  int district = pick_start(rng);
  SemanticPath p;
  if (district == 0) {
    p.start = id("s0");
    if (coin(rng) < 0.7)
      p.steps = {{rel("left"), id("a0")}, {rel("go"), id("b0")}, {rel("go"), id("c0")}};
    else
      p.steps = {{rel("right"), id("d0")}, {rel("go"), id("f0")}, {rel("go"), id("g0")}};
  } else if (district == 1) {
    p.start = id("s1");
    if (coin(rng) < 0.4)
      p.steps = {{rel("left"), id("a1")}, {rel("go"), id("b1")}, {rel("go"), id("c1")}};
    else
      p.steps = {{rel("right"), id("d1")}, {rel("go"), id("f1")}, {rel("go"), id("g1")}};
  } else {
    p.start = id("s2");
    p.steps = {{rel("left"), id("x")}, {rel("go"), id("y")}};
  }
  return p;
}

inline ExpertPathSet toy20_experts(const KnowledgeGraph& g, int count, std::uint64_t seed) {
  Rng rng(seed);
  ExpertPathSet set;
  set.max_length = 3;
  for (int i = 0; i < count; ++i) set.paths.push_back(toy20_sample(g, rng));
  return set;
}

inline PathDistribution toy20_true_distribution(const KnowledgeGraph& g) {
  auto id = [&](const char* label) { return *g.entity_id(label); };
  auto rel = [&](const char* label) { return *g.relation_id(label); };
  PathDistribution d;
  auto add = [&](SemanticPath p, double prob) {
    d.support.push_back(std::move(p));
    d.probs.push_back(prob);
  };
  add({id("s0"), {{rel("left"), id("a0")}, {rel("go"), id("b0")}, {rel("go"), id("c0")}}},
      0.7 / 3);
  add({id("s0"), {{rel("right"), id("d0")}, {rel("go"), id("f0")}, {rel("go"), id("g0")}}},
      0.3 / 3);
  add({id("s1"), {{rel("left"), id("a1")}, {rel("go"), id("b1")}, {rel("go"), id("c1")}}},
      0.4 / 3);
  add({id("s1"), {{rel("right"), id("d1")}, {rel("go"), id("f1")}, {rel("go"), id("g1")}}},
      0.6 / 3);
  add({id("s2"), {{rel("left"), id("x")}, {rel("go"), id("y")}}}, 1.0 / 3);
  return d;
}

// ---- "hard" fork benchmark ----
// One start with a relation that fans out to four tails chosen uniformly by
// the walk dynamics. A small expert sample cannot reflect that uniform fork,
// so training with very few paths stalls above the convergence threshold.
inline KnowledgeGraph fork_graph() {
  std::string tsv =
      "s0\tra\tm1\n"
      "s0\tra\tm2\n"
      "s0\tra\tm3\n"
      "s0\tra\tm4\n"
      "s0\trb\tm5\n"
      "m1\tnext\tq1\nq1\tnext\tz1\n"
      "m2\tnext\tq2\nq2\tnext\tz2\n"
      "m3\tnext\tq3\nq3\tnext\tz3\n"
      "m4\tnext\tq4\nq4\tnext\tz4\n"
      "m5\tnext\tq5\nq5\tnext\tz5\n"
      "pad0\tnext\tpad1\n"
      "pad2\tnext\tpad3\n";
  return graph_from_tsv(tsv);
}

// Mechanism: ra with probability 0.8 (tail uniform among m1..m4), rb with 0.2.
inline SemanticPath fork_sample(const KnowledgeGraph& g, Rng& rng) {
  auto id = [&](const std::string& label) { return *g.entity_id(label); };
  auto rel = [&](const char* label) { return *g.relation_id(label); };
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick(1, 4);
  int branch = coin(rng) < 0.8 ? pick(rng) : 5;
  std::string m = "m" + std::to_string(branch);
  std::string q = "q" + std::to_string(branch);
  std::string z = "z" + std::to_string(branch);
  SemanticPath p;
  p.start = id("s0");
  p.steps = {{rel(branch == 5 ? "rb" : "ra"), id(m)},
             {rel("next"), id(q)},
             {rel("next"), id(z)}};
  return p;
}

inline ExpertPathSet fork_experts(const KnowledgeGraph& g, int count, std::uint64_t seed) {
  Rng rng(seed);
  ExpertPathSet set;
  set.max_length = 3;
  for (int i = 0; i < count; ++i) set.paths.push_back(fork_sample(g, rng));
  return set;
}

// The desk-scale benchmark: a 200-entity SKG sampled from the synthetic
// class-structured graph.
inline KnowledgeGraph benchmark_skg() {
  SyntheticGraphConfig cfg;  // defaults: 600 entities, 24 relations, seed 7
  return sample_skg(make_synthetic_graph(cfg), 200, 7);
}

// Exhaustive enumeration of simple paths start -> goal with length in
// [1, max_length]; the independent oracle for the BFS-splice generator.
inline std::vector<SemanticPath> enumerate_paths(const KnowledgeGraph& kg, EntityId start,
                                                 EntityId goal, int max_length) {
  std::vector<SemanticPath> found;
  SemanticPath cur;
  cur.start = start;
  std::set<EntityId> visited{start};
  auto dfs = [&](auto&& self, EntityId at) -> void {
    if (cur.length() >= 1 && at == goal) found.push_back(cur);
    if (cur.length() == max_length) return;
    for (const Edge& e : kg.neighbors(at)) {
      if (visited.contains(e.tail)) continue;
      visited.insert(e.tail);
      cur.steps.push_back({e.relation, e.tail});
      self(self, e.tail);
      cur.steps.pop_back();
      visited.erase(e.tail);
    }
  };
  dfs(dfs, start);
  return found;
}

// All simple paths from `start` that stop at a terminal state or at
// max_length; mirrors the rollout's support.
inline std::vector<SemanticPath> enumerate_rollout_support(const KnowledgeGraph& kg,
                                                           EntityId start, int max_length) {
  std::vector<SemanticPath> found;
  SemanticPath cur;
  cur.start = start;
  std::set<EntityId> visited{start};
  auto dfs = [&](auto&& self, EntityId at, int depth) -> void {
    bool terminal = true;
    if (depth < max_length) {
      for (const Edge& e : kg.neighbors(at)) {
        if (visited.contains(e.tail)) continue;
        terminal = false;
        visited.insert(e.tail);
        cur.steps.push_back({e.relation, e.tail});
        self(self, e.tail, depth + 1);
        cur.steps.pop_back();
        visited.erase(e.tail);
      }
    }
    if (terminal || depth == max_length) found.push_back(cur);
  };
  dfs(dfs, start, 0);
  return found;
}

inline double rel_error(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-12});
  return std::fabs(a - b) / denom;
}

// Relative error between two flat gradients, infinity-norm over norm.
inline double grad_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::fabs(a[i] - b[i]));
    da = std::max(da, std::fabs(a[i]));
    db = std::max(db, std::fabs(b[i]));
  }
  return num / std::max({da, db, 1e-12});
}

}  // namespace semcom::test
