#pragma once

#include "semcom/graph.hpp"

namespace semcom {

// Class-structured random knowledge graph in the style of the public KG
// benchmarks: entities carry a class, every relation links one source class
// to one target class, and tail choice is biased toward a few popular hub
// entities per class.
struct SyntheticGraphConfig {
  int entities = 600;
  int relations = 24;
  int classes = 8;
  double edges_per_entity = 6.0;
  double hub_fraction = 0.06;  // share of each class acting as popular tails
  double hub_mass = 0.9;       // probability a tail is drawn from the hubs
  std::uint64_t seed = 7;
};

KnowledgeGraph make_synthetic_graph(const SyntheticGraphConfig& cfg);

}  // namespace semcom
