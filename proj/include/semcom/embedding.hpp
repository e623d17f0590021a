#pragma once

#include <complex>
#include <iosfwd>

#include "semcom/core.hpp"
#include "semcom/graph.hpp"

namespace semcom {

/// The trained projection: one row per entity (dim n) and per relation
/// (dim n_prime). The norm mode is fixed at training time and honoured by
/// every downstream distance computation.
struct EmbeddingTable {
  int n = 0;
  int n_prime = 0;
  Norm norm = Norm::L1;
  // Raw attribute dimensions of the source representation. Metadata only;
  // not part of the serialized form.
  int m = 0;
  int m_prime = 0;
  std::vector<double> entity_data;    // row-major entity_count x n
  std::vector<double> relation_data;  // row-major relation_count x n_prime

  int entity_count() const { return n == 0 ? 0 : static_cast<int>(entity_data.size()) / n; }
  int relation_count() const {
    return n_prime == 0 ? 0 : static_cast<int>(relation_data.size()) / n_prime;
  }
  std::span<const double> entity(EntityId e) const;
  std::span<double> entity(EntityId e);
  std::span<const double> relation(RelationId r) const;
  std::span<double> relation(RelationId r);

  // Header `n n' norm_mode entity_count relation_count`, then one row of
  // text floats per entity and per relation. Reload is bit-exact.
  void save(std::ostream& out) const;
  static EmbeddingTable load(std::istream& in);
};

enum class Corruption { Head, Tail, Both };

struct EncoderConfig {
  int n = 50;
  int n_prime = 50;
  double margin = 1.0;
  Norm norm = Norm::L1;
  double learning_rate = 0.01;
  int epochs = 100;
  int batch_size = 128;
  Corruption corruption = Corruption::Both;
  std::uint64_t seed = 0;

  void validate() const;
};

// ||h + r - t|| under the chosen norm.
double energy(std::span<const double> h, std::span<const double> r, std::span<const double> t,
              Norm norm);

// ||e0 + sum(rels) - eL||; relation list must be non-empty.
double path_energy(std::span<const double> e0, std::span<const Vec> rels,
                   std::span<const double> eL, Norm norm);

struct TripletBatch {
  std::vector<Triple> positives;
  std::vector<Triple> negatives;  // aligned one-to-one with positives
};

// Pairs every positive with a corrupted copy guaranteed absent from the
// graph. Mode Both picks the corrupted side per Bernoulli(0.5); if one side
// cannot produce a fresh negative the other side is used as fallback.
TripletBatch sample_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                              Corruption mode, std::uint64_t seed);
TripletBatch sample_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                              Corruption mode, Rng& rng);

// sum over pairs of max{0, d + energy(pos) - energy(neg)}.
double margin_loss(const TripletBatch& batch, const EmbeddingTable& table, double margin);

struct TableGrad {
  std::vector<double> entity_grad;    // same shape as table.entity_data
  std::vector<double> relation_grad;  // same shape as table.relation_data
};

// Dense subgradient of margin_loss with respect to every table parameter.
TableGrad margin_loss_grad(const TripletBatch& batch, const EmbeddingTable& table, double margin);

struct EncoderResult {
  EmbeddingTable table;
  std::vector<double> epoch_loss;
};

// Mini-batch subgradient descent on the margin loss; entity rows are
// renormalized to unit l2 after each epoch. Deterministic for a fixed seed.
EncoderResult train_encoder(const KnowledgeGraph& kg, const EncoderConfig& cfg);

// One table row per id, entities first then relations, in input order.
std::vector<Vec> encode_explicit(const ExplicitSemantics& v, const EmbeddingTable& table);

enum class Packing { Real, Complex };

const char* to_string(Packing p);
Packing packing_from_string(const std::string& s);

// Real mode: one real symbol per coordinate. Complex mode: consecutive
// coordinate pairs become one complex symbol (dimension must be even).
std::vector<std::complex<double>> pack_symbols(std::span<const double> x, Packing mode);
Vec unpack_symbols(std::span<const std::complex<double>> symbols, Packing mode, int dim);

// Fraction of graph triples whose energy beats a freshly sampled corrupted
// negative by the margin.
double margin_satisfaction(const KnowledgeGraph& kg, const EmbeddingTable& table, double margin,
                           Corruption mode, std::uint64_t seed);

}  // namespace semcom
