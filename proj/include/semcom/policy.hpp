#pragma once

#include <iosfwd>
#include <optional>

#include "semcom/embedding.hpp"
#include "semcom/graph.hpp"

namespace semcom {

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // row-major out x in
  std::vector<double> b;  // out
};

/// Relation-selection policy: hidden layers with ReLU, final layer feeds a
/// masked softmax over all relation ids. Input dimension is 2n+1.
struct PolicyNetwork {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int action_count() const { return layers.empty() ? 0 : layers.back().out; }
  int hidden_dim() const { return layers.size() < 2 ? 0 : layers.front().out; }

  static PolicyNetwork create(int input_dim, int hidden_dim, int hidden_layers, int action_count,
                              std::uint64_t seed);

  // Header `M input_dim hidden_dim action_count`, then per layer the weight
  // matrix row-major followed by the bias. Reload is bit-exact.
  void save(std::ostream& out) const;
  static PolicyNetwork load(std::istream& in);
};

/// Reasoning state: the path so far and the step counter. Soft interpretation
/// substitutes raw received vectors for embedding lookups.
struct State {
  SemanticPath path;
  int t = 0;
  std::optional<Vec> soft_current;  // stands in for g(current entity)
  std::optional<Vec> soft_start;    // stands in for g(start entity)

  EntityId current() const { return path.terminal(); }
};

using ActionMask = std::vector<std::uint8_t>;

// [g(current) or raw; g(start) or raw; t/L] -> dimension 2n+1.
Vec featurize_state(const State& s, const EmbeddingTable& table, int max_length);

// True exactly for relations with at least one outgoing edge from the current
// entity that does not revisit an entity already on the path. An all-false
// mask marks a terminal state.
ActionMask valid_actions(const State& s, const KnowledgeGraph& kg);

// Masked softmax over relations; masked-off entries are exactly 0. Throws
// std::invalid_argument on an all-false mask (terminal states have no
// distribution).
Vec policy_forward(const PolicyNetwork& net, const Vec& features, const ActionMask& mask);

RelationId sample_action(const Vec& dist, Rng& rng);

struct RolloutConfig {
  int max_length = 3;
  int rollouts = 1;
  std::uint64_t seed = 0;
};

struct TrajectoryStep {
  Vec features;
  ActionMask mask;
  RelationId action;
};

struct RolloutResult {
  SemanticPath path;
  std::vector<TrajectoryStep> steps;
};

// One episode: start at the first entity of v, sample relations from the
// masked policy, pick the next entity uniformly among unvisited tails of the
// sampled relation, stop at max_length or at a terminal mask.
RolloutResult rollout(const PolicyNetwork& net, const KnowledgeGraph& kg,
                      const EmbeddingTable& table, const ExplicitSemantics& v, int max_length,
                      Rng& rng);

struct PolicyGrad {
  std::vector<std::vector<double>> w;  // per layer, same shape as the network
  std::vector<std::vector<double>> b;

  static PolicyGrad zeros_like(const PolicyNetwork& net);
  void add(const PolicyGrad& other, double scale = 1.0);
};

// REINFORCE: sum_t grad log pi(a_t | s_t) * (reward - baseline).
PolicyGrad policy_grad(const PolicyNetwork& net, std::span<const TrajectoryStep> trajectory,
                       double reward, double baseline);

// sum_t log pi(a_t | s_t); the scalar behind policy_grad, used by tests.
double trajectory_logprob(const PolicyNetwork& net, std::span<const TrajectoryStep> trajectory);

// theta += step * grad.
void apply_update(PolicyNetwork& net, const PolicyGrad& grad, double step);

}  // namespace semcom
