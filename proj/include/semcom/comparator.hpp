#pragma once

#include <iosfwd>

#include "semcom/embedding.hpp"
#include "semcom/graph.hpp"
#include "semcom/policy.hpp"

namespace semcom {

/// Discriminator over featurized semantic paths: one ReLU hidden layer and a
/// sigmoid output read as the probability that the path is an expert path.
struct ComparatorNetwork {
  DenseLayer hidden;
  std::vector<double> w_out;  // 1 x hidden
  double b_out = 0.0;

  int input_dim() const { return hidden.in; }
  static ComparatorNetwork create(int input_dim, int hidden_dim, std::uint64_t seed);

  void save(std::ostream& out) const;
  static ComparatorNetwork load(std::istream& in);
};

// [g(e0); per step (g(r_i); g(e_i)); zero padding to max_length steps].
// Dimension n + max_length * (n' + n). Overlong paths are invalid.
Vec featurize_path(const SemanticPath& path, const EmbeddingTable& table, int max_length);

double comparator_forward(const ComparatorNetwork& net, std::span<const double> features);

struct ComparatorGrad {
  std::vector<double> w1, b1, w_out;
  double b_out = 0.0;
};

// Ascent gradient of mean[log w(expert)] + mean[log(1 - w(generated))].
ComparatorGrad comparator_grad(const ComparatorNetwork& net,
                               std::span<const SemanticPath> expert,
                               std::span<const SemanticPath> generated,
                               const EmbeddingTable& table, int max_length);

// The discrimination objective the gradient ascends; estimated on batches.
double comparator_objective(const ComparatorNetwork& net, std::span<const SemanticPath> expert,
                            std::span<const SemanticPath> generated, const EmbeddingTable& table,
                            int max_length);

// phi += step * grad.
void apply_update(ComparatorNetwork& net, const ComparatorGrad& grad, double step);

// rho_e / (rho_e + rho_g); the closed-form optimum of the discrimination
// objective for a path with the given occupancy values.
double optimal_comparator_value(double rho_expert, double rho_generated);

/// Probability distribution over semantic paths, keyed by id sequence.
struct PathDistribution {
  std::vector<SemanticPath> support;
  std::vector<double> probs;

  static PathDistribution from_samples(std::span<const SemanticPath> samples);
};

struct SemanticDistance {
  double gamma;  // in [-log 4, 0]
  double d_js;   // (gamma + log 4) / 2, in [0, log 2]
};

// gamma = sum_P p*log(p/(p+q)) + sum_Q q*log(q/(p+q)) over the zero-filled
// union support, with 0*log(0/x) = 0.
SemanticDistance semantic_distance(const PathDistribution& p, const PathDistribution& q);

}  // namespace semcom
