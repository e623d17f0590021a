#pragma once

#include <iosfwd>

#include "semcom/comparator.hpp"
#include "semcom/graph.hpp"
#include "semcom/policy.hpp"

namespace semcom {

struct TrainConfig {
  int iterations = 300;
  int rollouts_per_iter = 256;
  double comparator_lr = 1e-3;  // comparator default; sweeps usually raise it
  double policy_lr = 0.05;
  double baseline_decay = 0.9;
  int max_length = 3;
  int policy_hidden = 64;
  int comparator_hidden = 64;
  double early_stop_djs = 0.02;  // stop once d_js stays below this ...
  int early_stop_patience = 20;  // ... for this many consecutive iterations
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double comparator_loss = 0.0;   // discrimination objective estimate
  double interpreter_loss = 0.0;  // E_gen[log w] + E_exp[1 - log w]
  double gamma = 0.0;
  double d_js = 0.0;
  double accuracy = 0.0;  // exact-match share of this iteration's rollouts
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<IterationRecord> records;
  bool converged = false;
  int converged_iter = -1;

  void to_csv(std::ostream& out) const;  // iter,comp_loss,interp_loss,gamma,d_js,accuracy,seconds
};

struct GrmlResult {
  PolicyNetwork policy;
  ComparatorNetwork comparator;
  TrainLog log;
};

// Alternates one comparator ascent step and one REINFORCE step per iteration.
// Rollouts start from the starts of sampled expert paths; per-path reward is
// log w(path) against a moving-average baseline. Deterministic per seed.
GrmlResult train(const KnowledgeGraph& kg, const ExpertPathSet& experts,
                 const EmbeddingTable& table, const TrainConfig& cfg);

// Normalized rollout frequencies keyed by path id sequence.
PathDistribution empirical_path_distribution(const PolicyNetwork& net,
                                             std::span<const ExplicitSemantics> starts,
                                             int samples, const KnowledgeGraph& kg,
                                             const EmbeddingTable& table, int max_length,
                                             std::uint64_t seed);

enum class AccuracyMetric { ExactMatch, TerminalHit };

const char* to_string(AccuracyMetric m);
AccuracyMetric accuracy_metric_from_string(const std::string& s);

// ExactMatch: share of rollouts whose id sequence appears among the expert
// paths with the same start. TerminalHit: share whose final entity matches
// some expert path's final entity for that start.
double evaluate_accuracy(const PolicyNetwork& net, const ExpertPathSet& experts,
                         AccuracyMetric metric, int samples, const KnowledgeGraph& kg,
                         const EmbeddingTable& table, std::uint64_t seed);

}  // namespace semcom
