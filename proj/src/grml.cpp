#include "semcom/grml.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

namespace semcom {

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (rollouts_per_iter < 1) throw std::invalid_argument("rollouts_per_iter must be >= 1");
  if (max_length < 1) throw std::invalid_argument("max_length must be >= 1");
  if (comparator_lr <= 0 || policy_lr <= 0) throw std::invalid_argument("rates must be > 0");
  if (baseline_decay < 0 || baseline_decay >= 1)
    throw std::invalid_argument("baseline decay must be in [0, 1)");
}

void TrainLog::to_csv(std::ostream& out) const {
  out << "iter,comp_loss,interp_loss,gamma,d_js,accuracy,seconds\n";
  for (const IterationRecord& r : records)
    out << r.iter << ',' << fmt_double(r.comparator_loss) << ','
        << fmt_double(r.interpreter_loss) << ',' << fmt_double(r.gamma) << ','
        << fmt_double(r.d_js) << ',' << fmt_double(r.accuracy) << ',' << fmt_double(r.seconds)
        << '\n';
}

namespace {

// Expert exact-match index: start entity -> set of full path keys.
std::map<EntityId, std::set<std::vector<std::int32_t>>> expert_key_index(
    const ExpertPathSet& experts) {
  std::map<EntityId, std::set<std::vector<std::int32_t>>> index;
  for (const SemanticPath& p : experts.paths) index[p.start].insert(p.key());
  return index;
}

}  // namespace

GrmlResult train(const KnowledgeGraph& kg, const ExpertPathSet& experts,
                 const EmbeddingTable& table, const TrainConfig& cfg) {
  cfg.validate();
  if (experts.paths.empty()) throw std::invalid_argument("train: no expert paths");
  for (const SemanticPath& p : experts.paths)
    if (!replay_valid(kg, p))
      throw std::invalid_argument("train: expert path invalid in the working graph");

  int feature_dim = 2 * table.n + 1;
  int comparator_dim = table.n + cfg.max_length * (table.n_prime + table.n);
  Rng rng(cfg.seed);

  GrmlResult result;
  result.policy = PolicyNetwork::create(feature_dim, cfg.policy_hidden, 2, kg.relation_count(),
                                        rng());
  result.comparator = ComparatorNetwork::create(comparator_dim, cfg.comparator_hidden, rng());

  PathDistribution expert_dist = PathDistribution::from_samples(experts.paths);
  auto expert_index = expert_key_index(experts);

  std::uniform_int_distribution<std::size_t> pick_expert(0, experts.paths.size() - 1);
  double baseline = 0.0;
  bool baseline_ready = false;
  int streak = 0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    auto tic = std::chrono::steady_clock::now();

    // (a) roll out from the starts of sampled expert paths
    std::vector<RolloutResult> rollouts;
    std::vector<SemanticPath> generated;
    rollouts.reserve(cfg.rollouts_per_iter);
    for (int i = 0; i < cfg.rollouts_per_iter; ++i) {
      const SemanticPath& expert = experts.paths[pick_expert(rng)];
      ExplicitSemantics v{{expert.start}, {}};
      rollouts.push_back(rollout(result.policy, kg, table, v, cfg.max_length, rng));
      generated.push_back(rollouts.back().path);
    }

    // (b) one comparator ascent step
    ComparatorGrad cgrad =
        comparator_grad(result.comparator, experts.paths, generated, table, cfg.max_length);
    apply_update(result.comparator, cgrad, cfg.comparator_lr);

    // (c) one REINFORCE step with reward log w(path) under the new comparator
    std::vector<double> rewards(rollouts.size());
    double mean_reward = 0.0;
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      Vec f = featurize_path(rollouts[i].path, table, cfg.max_length);
      rewards[i] = std::log(std::max(comparator_forward(result.comparator, f), 1e-12));
      mean_reward += rewards[i];
    }
    mean_reward /= static_cast<double>(rollouts.size());
    if (!std::isfinite(mean_reward))
      throw DivergenceError(iter, "non-finite policy reward");
    baseline = baseline_ready
                   ? cfg.baseline_decay * baseline + (1.0 - cfg.baseline_decay) * mean_reward
                   : mean_reward;
    baseline_ready = true;

    PolicyGrad pgrad = PolicyGrad::zeros_like(result.policy);
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      if (rollouts[i].steps.empty()) continue;  // no degrees of freedom
      pgrad.add(policy_grad(result.policy, rollouts[i].steps, rewards[i], baseline),
                1.0 / static_cast<double>(rollouts.size()));
    }
    apply_update(result.policy, pgrad, cfg.policy_lr);

    // (d) metrics
    IterationRecord rec;
    rec.iter = iter;
    rec.comparator_loss =
        comparator_objective(result.comparator, experts.paths, generated, table, cfg.max_length);
    double mean_log_w_gen = 0.0, mean_log_w_exp = 0.0;
    for (const SemanticPath& p : generated) {
      Vec f = featurize_path(p, table, cfg.max_length);
      mean_log_w_gen += std::log(std::max(comparator_forward(result.comparator, f), 1e-12));
    }
    mean_log_w_gen /= static_cast<double>(generated.size());
    for (const SemanticPath& p : experts.paths) {
      Vec f = featurize_path(p, table, cfg.max_length);
      mean_log_w_exp += std::log(std::max(comparator_forward(result.comparator, f), 1e-12));
    }
    mean_log_w_exp /= static_cast<double>(experts.paths.size());
    rec.interpreter_loss = mean_log_w_gen + (1.0 - mean_log_w_exp);

    SemanticDistance sd =
        semantic_distance(expert_dist, PathDistribution::from_samples(generated));
    rec.gamma = sd.gamma;
    rec.d_js = sd.d_js;

    long matched = 0;
    for (const SemanticPath& p : generated) {
      auto it = expert_index.find(p.start);
      if (it != expert_index.end() && it->second.contains(p.key())) ++matched;
    }
    rec.accuracy = static_cast<double>(matched) / static_cast<double>(generated.size());

    if (!std::isfinite(rec.comparator_loss) || !std::isfinite(rec.interpreter_loss))
      throw DivergenceError(iter, "non-finite training loss");

    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    result.log.records.push_back(rec);

    streak = rec.d_js < cfg.early_stop_djs ? streak + 1 : 0;
    if (cfg.early_stop_patience > 0 && streak >= cfg.early_stop_patience) {
      result.log.converged = true;
      result.log.converged_iter = iter - cfg.early_stop_patience + 1;
      break;
    }
  }
  return result;
}

PathDistribution empirical_path_distribution(const PolicyNetwork& net,
                                             std::span<const ExplicitSemantics> starts,
                                             int samples, const KnowledgeGraph& kg,
                                             const EmbeddingTable& table, int max_length,
                                             std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("empirical_path_distribution: samples >= 1");
  if (starts.empty()) throw std::invalid_argument("empirical_path_distribution: no starts");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
  std::vector<SemanticPath> paths;
  paths.reserve(samples);
  for (int i = 0; i < samples; ++i)
    paths.push_back(rollout(net, kg, table, starts[pick(rng)], max_length, rng).path);
  return PathDistribution::from_samples(paths);
}

const char* to_string(AccuracyMetric m) {
  return m == AccuracyMetric::ExactMatch ? "exact_match" : "terminal_hit";
}

AccuracyMetric accuracy_metric_from_string(const std::string& s) {
  if (s == "exact_match") return AccuracyMetric::ExactMatch;
  if (s == "terminal_hit") return AccuracyMetric::TerminalHit;
  throw std::invalid_argument("unknown accuracy metric: " + s);
}

double evaluate_accuracy(const PolicyNetwork& net, const ExpertPathSet& experts,
                         AccuracyMetric metric, int samples, const KnowledgeGraph& kg,
                         const EmbeddingTable& table, std::uint64_t seed) {
  if (experts.paths.empty()) throw std::invalid_argument("evaluate_accuracy: no expert paths");
  if (samples < 1) throw std::invalid_argument("evaluate_accuracy: samples >= 1");

  auto key_index = expert_key_index(experts);
  std::map<EntityId, std::set<EntityId>> terminal_index;
  for (const SemanticPath& p : experts.paths) terminal_index[p.start].insert(p.terminal());

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, experts.paths.size() - 1);
  long hits = 0;
  for (int i = 0; i < samples; ++i) {
    const SemanticPath& expert = experts.paths[pick(rng)];
    ExplicitSemantics v{{expert.start}, {}};
    SemanticPath rolled = rollout(net, kg, table, v, experts.max_length, rng).path;
    if (metric == AccuracyMetric::ExactMatch) {
      if (key_index.at(expert.start).contains(rolled.key())) ++hits;
    } else {
      if (terminal_index.at(expert.start).contains(rolled.terminal())) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(samples);
}

}  // namespace semcom
