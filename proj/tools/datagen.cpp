// Writes a synthetic class-structured knowledge graph as a triple TSV, for
// running the simulator without an external dataset.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "semcom/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic knowledge graph generator"};
  semcom::SyntheticGraphConfig cfg;
  std::string out = "graph.tsv";
  app.add_option("--entities", cfg.entities, "entity count");
  app.add_option("--relations", cfg.relations, "relation type count");
  app.add_option("--classes", cfg.classes, "entity class count");
  app.add_option("--edges-per-entity", cfg.edges_per_entity, "average out-degree");
  app.add_option("--seed", cfg.seed, "generator seed");
  app.add_option("--out", out, "output TSV path");
  CLI11_PARSE(app, argc, argv);

  try {
    semcom::KnowledgeGraph kg = semcom::make_synthetic_graph(cfg);
    std::ofstream file(out);
    if (!file) {
      std::cerr << "cannot write " << out << "\n";
      return 1;
    }
    kg.serialize(file);
    std::cout << "wrote " << kg.entity_count() << " entities, " << kg.relation_count()
              << " relations, " << kg.triples().size() << " triples to " << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
