#include "semcom/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

namespace semcom {

std::span<const double> EmbeddingTable::entity(EntityId e) const {
  if (e < 0 || e >= entity_count()) throw std::out_of_range("unknown entity id");
  return {entity_data.data() + static_cast<std::size_t>(e) * n, static_cast<std::size_t>(n)};
}

std::span<double> EmbeddingTable::entity(EntityId e) {
  if (e < 0 || e >= entity_count()) throw std::out_of_range("unknown entity id");
  return {entity_data.data() + static_cast<std::size_t>(e) * n, static_cast<std::size_t>(n)};
}

std::span<const double> EmbeddingTable::relation(RelationId r) const {
  if (r < 0 || r >= relation_count()) throw std::out_of_range("unknown relation id");
  return {relation_data.data() + static_cast<std::size_t>(r) * n_prime,
          static_cast<std::size_t>(n_prime)};
}

std::span<double> EmbeddingTable::relation(RelationId r) {
  if (r < 0 || r >= relation_count()) throw std::out_of_range("unknown relation id");
  return {relation_data.data() + static_cast<std::size_t>(r) * n_prime,
          static_cast<std::size_t>(n_prime)};
}

void EmbeddingTable::save(std::ostream& out) const {
  out << n << ' ' << n_prime << ' ' << to_string(norm) << ' ' << entity_count() << ' '
      << relation_count() << '\n';
  for (int e = 0; e < entity_count(); ++e) {
    auto row = entity(e);
    for (int i = 0; i < n; ++i) out << (i ? " " : "") << fmt_double(row[i]);
    out << '\n';
  }
  for (int r = 0; r < relation_count(); ++r) {
    auto row = relation(r);
    for (int i = 0; i < n_prime; ++i) out << (i ? " " : "") << fmt_double(row[i]);
    out << '\n';
  }
}

EmbeddingTable EmbeddingTable::load(std::istream& in) {
  EmbeddingTable t;
  std::string norm_mode;
  int entities = 0, relations = 0;
  if (!(in >> t.n >> t.n_prime >> norm_mode >> entities >> relations))
    throw std::runtime_error("bad embedding table header");
  t.norm = norm_from_string(norm_mode);
  t.entity_data.resize(static_cast<std::size_t>(entities) * t.n);
  t.relation_data.resize(static_cast<std::size_t>(relations) * t.n_prime);
  for (double& v : t.entity_data)
    if (!(in >> v)) throw std::runtime_error("truncated embedding table");
  for (double& v : t.relation_data)
    if (!(in >> v)) throw std::runtime_error("truncated embedding table");
  return t;
}

void EncoderConfig::validate() const {
  if (n < 2 || n_prime < 2) throw std::invalid_argument("dimensions must be >= 2");
  if (margin <= 0) throw std::invalid_argument("margin must be > 0");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (learning_rate <= 0) throw std::invalid_argument("learning rate must be > 0");
}

double energy(std::span<const double> h, std::span<const double> r, std::span<const double> t,
              Norm norm) {
  if (h.size() != r.size() || h.size() != t.size())
    throw std::invalid_argument("energy: dimension mismatch");
  double acc = 0.0;
  if (norm == Norm::L1) {
    for (std::size_t i = 0; i < h.size(); ++i) acc += std::fabs(h[i] + r[i] - t[i]);
    return acc;
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    double d = h[i] + r[i] - t[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double path_energy(std::span<const double> e0, std::span<const Vec> rels,
                   std::span<const double> eL, Norm norm) {
  if (rels.empty()) throw std::invalid_argument("path_energy: empty relation list");
  Vec sum(e0.size(), 0.0);
  for (const Vec& r : rels) {
    if (r.size() != e0.size()) throw std::invalid_argument("path_energy: dimension mismatch");
    for (std::size_t i = 0; i < r.size(); ++i) sum[i] += r[i];
  }
  return energy(e0, sum, eL, norm);
}

namespace {

// Corrupt one side of `pos` with a uniformly drawn entity until the result is
// absent from the graph. Returns nullopt when no fresh negative was found.
std::optional<Triple> corrupt_side(const KnowledgeGraph& kg, const Triple& pos, bool corrupt_head,
                                   Rng& rng) {
  std::uniform_int_distribution<EntityId> any_entity(0, kg.entity_count() - 1);
  for (int tries = 0; tries < 128; ++tries) {
    EntityId candidate = any_entity(rng);
    Triple neg = pos;
    (corrupt_head ? neg.head : neg.tail) = candidate;
    if (candidate != (corrupt_head ? pos.head : pos.tail) &&
        !kg.has_triple(neg.head, neg.relation, neg.tail))
      return neg;
  }
  return std::nullopt;
}

}  // namespace

TripletBatch sample_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                              Corruption mode, Rng& rng) {
  if (kg.entity_count() == 0) throw std::invalid_argument("sample_negatives: empty graph");
  TripletBatch batch;
  batch.positives.assign(positives.begin(), positives.end());
  batch.negatives.reserve(positives.size());
  std::bernoulli_distribution heads(0.5);
  for (const Triple& pos : positives) {
    bool corrupt_head = mode == Corruption::Head || (mode == Corruption::Both && heads(rng));
    auto neg = corrupt_side(kg, pos, corrupt_head, rng);
    if (!neg) neg = corrupt_side(kg, pos, !corrupt_head, rng);
    if (!neg)
      throw std::runtime_error("sample_negatives: no fresh negative exists for a positive");
    batch.negatives.push_back(*neg);
  }
  return batch;
}

TripletBatch sample_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                              Corruption mode, std::uint64_t seed) {
  Rng rng(seed);
  return sample_negatives(kg, positives, mode, rng);
}

double margin_loss(const TripletBatch& batch, const EmbeddingTable& table, double margin) {
  if (batch.positives.size() != batch.negatives.size())
    throw std::invalid_argument("margin_loss: batch not aligned");
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    const Triple& p = batch.positives[i];
    const Triple& q = batch.negatives[i];
    double ep = energy(table.entity(p.head), table.relation(p.relation), table.entity(p.tail),
                       table.norm);
    double en = energy(table.entity(q.head), table.relation(q.relation), table.entity(q.tail),
                       table.norm);
    loss += std::max(0.0, margin + ep - en);
  }
  return loss;
}

namespace {

// Subgradient of ||h + r - t|| pushed onto the three rows through `sink`,
// scaled by `scale`. sink(row_span_grad_target, coordinate, value).
template <typename Sink>
void energy_subgrad(const EmbeddingTable& table, const Triple& t, double scale, Sink&& sink) {
  auto h = table.entity(t.head);
  auto r = table.relation(t.relation);
  auto tl = table.entity(t.tail);
  for (int i = 0; i < table.n; ++i) {
    double d = h[i] + r[i] - tl[i];
    double g;
    if (table.norm == Norm::L1) {
      g = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    } else {
      // l2: gradient is d / ||.||; guarded at the origin.
      g = 0.0;
      double nv = energy(h, r, tl, Norm::L2);
      if (nv > 0) g = d / nv;
    }
    g *= scale;
    sink(0, t.head, i, g);     // d/dh
    sink(1, t.relation, i, g); // d/dr
    sink(0, t.tail, i, -g);    // d/dt
  }
}

// Shared hinge walk used by both the dense gradient and the trainer.
// emit(pos_triple, neg_triple) is called only for active hinge terms.
template <typename Emit>
double hinge_walk(const TripletBatch& batch, const EmbeddingTable& table, double margin,
                  Emit&& emit) {
  if (batch.positives.size() != batch.negatives.size())
    throw std::invalid_argument("batch not aligned");
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    const Triple& p = batch.positives[i];
    const Triple& q = batch.negatives[i];
    double ep = energy(table.entity(p.head), table.relation(p.relation), table.entity(p.tail),
                       table.norm);
    double en = energy(table.entity(q.head), table.relation(q.relation), table.entity(q.tail),
                       table.norm);
    double term = margin + ep - en;
    if (term > 0) {
      loss += term;
      emit(p, q);
    }
  }
  return loss;
}

}  // namespace

TableGrad margin_loss_grad(const TripletBatch& batch, const EmbeddingTable& table, double margin) {
  TableGrad grad;
  grad.entity_grad.assign(table.entity_data.size(), 0.0);
  grad.relation_grad.assign(table.relation_data.size(), 0.0);
  auto sink = [&](int which, std::int32_t row, int i, double g) {
    if (which == 0)
      grad.entity_grad[static_cast<std::size_t>(row) * table.n + i] += g;
    else
      grad.relation_grad[static_cast<std::size_t>(row) * table.n_prime + i] += g;
  };
  hinge_walk(batch, table, margin, [&](const Triple& p, const Triple& q) {
    energy_subgrad(table, p, 1.0, sink);
    energy_subgrad(table, q, -1.0, sink);
  });
  return grad;
}

EncoderResult train_encoder(const KnowledgeGraph& kg, const EncoderConfig& cfg) {
  cfg.validate();
  if (kg.triples().empty()) throw std::invalid_argument("train_encoder: graph has no triples");
  if (cfg.n != cfg.n_prime)
    throw std::invalid_argument("train_encoder: entity and relation dimensions must match");

  Rng rng(cfg.seed);
  EmbeddingTable table;
  table.n = cfg.n;
  table.n_prime = cfg.n_prime;
  table.norm = cfg.norm;
  double bound_e = 6.0 / std::sqrt(static_cast<double>(cfg.n));
  double bound_r = 6.0 / std::sqrt(static_cast<double>(cfg.n_prime));
  std::uniform_real_distribution<double> init_e(-bound_e, bound_e);
  std::uniform_real_distribution<double> init_r(-bound_r, bound_r);
  table.entity_data.resize(static_cast<std::size_t>(kg.entity_count()) * cfg.n);
  table.relation_data.resize(static_cast<std::size_t>(kg.relation_count()) * cfg.n_prime);
  for (double& v : table.entity_data) v = init_e(rng);
  for (double& v : table.relation_data) v = init_r(rng);

  EncoderResult result;
  std::vector<std::size_t> order(kg.triples().size());
  std::iota(order.begin(), order.end(), 0);

  // Sparse per-batch gradient: only rows touched by the batch.
  std::unordered_map<std::int64_t, Vec> sparse;
  auto sink = [&](int which, std::int32_t row, int i, double g) {
    std::int64_t key = which == 0 ? row : -(static_cast<std::int64_t>(row) + 1);
    auto [it, inserted] = sparse.try_emplace(key);
    if (inserted) it->second.assign(cfg.n, 0.0);
    it->second[i] += g;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      std::size_t end = std::min(order.size(), at + cfg.batch_size);
      TripletBatch batch;
      batch.positives.reserve(end - at);
      for (std::size_t i = at; i < end; ++i) batch.positives.push_back(kg.triples()[order[i]]);
      TripletBatch full = sample_negatives(kg, batch.positives, cfg.corruption, rng);

      sparse.clear();
      epoch_loss += hinge_walk(full, table, cfg.margin, [&](const Triple& p, const Triple& q) {
        energy_subgrad(table, p, 1.0, sink);
        energy_subgrad(table, q, -1.0, sink);
      });
      for (const auto& [key, g] : sparse) {
        std::span<double> row = key >= 0
                                    ? table.entity(static_cast<EntityId>(key))
                                    : table.relation(static_cast<RelationId>(-(key + 1)));
        for (int i = 0; i < cfg.n; ++i) row[i] -= cfg.learning_rate * g[i];
      }
    }
    if (!std::isfinite(epoch_loss))
      throw DivergenceError(epoch, "non-finite training loss");
    // Renormalize entity rows to the unit sphere; a non-finite norm marks a
    // diverged run even when cancellation keeps the hinge loss finite.
    for (int e = 0; e < kg.entity_count(); ++e) {
      auto row = table.entity(e);
      double nv = norm_value(row, Norm::L2);
      if (!std::isfinite(nv)) throw DivergenceError(epoch, "non-finite entity row");
      if (nv > 0)
        for (double& v : row) v /= nv;
    }
    for (double v : table.relation_data)
      if (!std::isfinite(v)) throw DivergenceError(epoch, "non-finite relation row");
    result.epoch_loss.push_back(epoch_loss);
  }

  result.table = std::move(table);
  return result;
}

std::vector<Vec> encode_explicit(const ExplicitSemantics& v, const EmbeddingTable& table) {
  std::vector<Vec> symbols;
  symbols.reserve(v.entities.size() + v.relations.size());
  for (EntityId e : v.entities) {
    auto row = table.entity(e);
    symbols.emplace_back(row.begin(), row.end());
  }
  for (RelationId r : v.relations) {
    auto row = table.relation(r);
    symbols.emplace_back(row.begin(), row.end());
  }
  return symbols;
}

const char* to_string(Packing p) { return p == Packing::Real ? "real" : "complex"; }

Packing packing_from_string(const std::string& s) {
  if (s == "real") return Packing::Real;
  if (s == "complex") return Packing::Complex;
  throw std::invalid_argument("unknown packing mode: " + s);
}

std::vector<std::complex<double>> pack_symbols(std::span<const double> x, Packing mode) {
  std::vector<std::complex<double>> out;
  if (mode == Packing::Real) {
    out.reserve(x.size());
    for (double v : x) out.emplace_back(v, 0.0);
    return out;
  }
  if (x.size() % 2 != 0)
    throw std::invalid_argument("pack_symbols: complex packing needs an even dimension");
  out.reserve(x.size() / 2);
  for (std::size_t i = 0; i < x.size(); i += 2) out.emplace_back(x[i], x[i + 1]);
  return out;
}

Vec unpack_symbols(std::span<const std::complex<double>> symbols, Packing mode, int dim) {
  Vec out;
  if (mode == Packing::Real) {
    if (static_cast<int>(symbols.size()) != dim)
      throw std::invalid_argument("unpack_symbols: size mismatch");
    out.reserve(symbols.size());
    for (const auto& s : symbols) out.push_back(s.real());
    return out;
  }
  if (static_cast<int>(symbols.size()) * 2 != dim)
    throw std::invalid_argument("unpack_symbols: size mismatch");
  out.reserve(dim);
  for (const auto& s : symbols) {
    out.push_back(s.real());
    out.push_back(s.imag());
  }
  return out;
}

double margin_satisfaction(const KnowledgeGraph& kg, const EmbeddingTable& table, double margin,
                           Corruption mode, std::uint64_t seed) {
  if (kg.triples().empty()) throw std::invalid_argument("margin_satisfaction: no triples");
  TripletBatch batch = sample_negatives(kg, kg.triples(), mode, seed);
  long satisfied = 0;
  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    const Triple& p = batch.positives[i];
    const Triple& q = batch.negatives[i];
    double ep = energy(table.entity(p.head), table.relation(p.relation), table.entity(p.tail),
                       table.norm);
    double en = energy(table.entity(q.head), table.relation(q.relation), table.entity(q.tail),
                       table.norm);
    if (ep + margin <= en) ++satisfied;
  }
  return static_cast<double>(satisfied) / static_cast<double>(batch.positives.size());
}

}  // namespace semcom
