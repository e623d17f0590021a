#include "semcom/policy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace semcom {

namespace {

DenseLayer make_layer(int in, int out, Rng& rng) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> init(-bound, bound);
  layer.w.resize(static_cast<std::size_t>(in) * out);
  layer.b.assign(out, 0.0);
  for (double& v : layer.w) v = init(rng);
  return layer;
}

// z = W a + b
void affine(const DenseLayer& layer, std::span<const double> a, Vec& z) {
  z.assign(layer.out, 0.0);
  for (int o = 0; o < layer.out; ++o) {
    const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
    double acc = layer.b[o];
    for (int i = 0; i < layer.in; ++i) acc += row[i] * a[i];
    z[o] = acc;
  }
}

struct ForwardCache {
  std::vector<Vec> pre;   // z_m per layer
  std::vector<Vec> post;  // a_m per layer (ReLU on hidden, identity on last)
};

ForwardCache forward_pass(const PolicyNetwork& net, const Vec& features) {
  ForwardCache cache;
  const Vec* input = &features;
  for (std::size_t m = 0; m < net.layers.size(); ++m) {
    Vec z;
    affine(net.layers[m], *input, z);
    Vec a = z;
    if (m + 1 < net.layers.size())
      for (double& v : a) v = std::max(0.0, v);
    cache.pre.push_back(std::move(z));
    cache.post.push_back(std::move(a));
    input = &cache.post.back();
  }
  return cache;
}

Vec masked_softmax(const Vec& logits, const ActionMask& mask) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < logits.size(); ++j)
    if (mask[j] && logits[j] > max_logit) max_logit = logits[j];
  Vec p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (!mask[j]) continue;
    p[j] = std::exp(logits[j] - max_logit);
    z += p[j];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

PolicyNetwork PolicyNetwork::create(int input_dim, int hidden_dim, int hidden_layers,
                                    int action_count, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || hidden_layers < 0 || action_count < 1)
    throw std::invalid_argument("bad policy network shape");
  Rng rng(seed);
  PolicyNetwork net;
  int in = input_dim;
  for (int m = 0; m < hidden_layers; ++m) {
    net.layers.push_back(make_layer(in, hidden_dim, rng));
    in = hidden_dim;
  }
  net.layers.push_back(make_layer(in, action_count, rng));
  return net;
}

void PolicyNetwork::save(std::ostream& out) const {
  out << layers.size() << ' ' << input_dim() << ' ' << hidden_dim() << ' ' << action_count()
      << '\n';
  for (const DenseLayer& layer : layers) {
    for (std::size_t i = 0; i < layer.w.size(); ++i)
      out << (i ? " " : "") << fmt_double(layer.w[i]);
    out << '\n';
    for (std::size_t i = 0; i < layer.b.size(); ++i)
      out << (i ? " " : "") << fmt_double(layer.b[i]);
    out << '\n';
  }
}

PolicyNetwork PolicyNetwork::load(std::istream& in) {
  std::size_t m = 0;
  int input_dim = 0, hidden_dim = 0, action_count = 0;
  if (!(in >> m >> input_dim >> hidden_dim >> action_count))
    throw std::runtime_error("bad policy network header");
  PolicyNetwork net;
  int cur = input_dim;
  for (std::size_t i = 0; i < m; ++i) {
    DenseLayer layer;
    layer.in = cur;
    layer.out = (i + 1 == m) ? action_count : hidden_dim;
    layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
    layer.b.resize(layer.out);
    for (double& v : layer.w)
      if (!(in >> v)) throw std::runtime_error("truncated policy network");
    for (double& v : layer.b)
      if (!(in >> v)) throw std::runtime_error("truncated policy network");
    cur = layer.out;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Vec featurize_state(const State& s, const EmbeddingTable& table, int max_length) {
  int n = table.n;
  Vec f;
  f.reserve(2 * n + 1);
  auto append = [&](std::span<const double> v) { f.insert(f.end(), v.begin(), v.end()); };
  if (s.soft_current) {
    if (static_cast<int>(s.soft_current->size()) != n)
      throw std::invalid_argument("featurize_state: raw vector dimension mismatch");
    append(*s.soft_current);
  } else {
    append(table.entity(s.path.terminal()));
  }
  if (s.soft_start) {
    if (static_cast<int>(s.soft_start->size()) != n)
      throw std::invalid_argument("featurize_state: raw vector dimension mismatch");
    append(*s.soft_start);
  } else {
    append(table.entity(s.path.start));
  }
  f.push_back(max_length > 0 ? static_cast<double>(s.t) / max_length : 0.0);
  return f;
}

ActionMask valid_actions(const State& s, const KnowledgeGraph& kg) {
  ActionMask mask(kg.relation_count(), 0);
  std::unordered_set<EntityId> visited{s.path.start};
  for (const auto& step : s.path.steps) visited.insert(step.entity);
  for (const Edge& e : kg.neighbors(s.path.terminal()))
    if (!visited.contains(e.tail)) mask[e.relation] = 1;
  return mask;
}

Vec policy_forward(const PolicyNetwork& net, const Vec& features, const ActionMask& mask) {
  if (static_cast<int>(features.size()) != net.input_dim())
    throw std::invalid_argument("policy_forward: feature dimension mismatch");
  if (static_cast<int>(mask.size()) != net.action_count())
    throw std::invalid_argument("policy_forward: mask size mismatch");
  if (std::find(mask.begin(), mask.end(), 1) == mask.end())
    throw std::invalid_argument("policy_forward: all actions masked (terminal state)");
  ForwardCache cache = forward_pass(net, features);
  return masked_softmax(cache.post.back(), mask);
}

RelationId sample_action(const Vec& dist, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  double acc = 0.0;
  RelationId last = -1;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    if (dist[j] <= 0.0) continue;
    acc += dist[j];
    last = static_cast<RelationId>(j);
    if (u < acc) return last;
  }
  return last;  // guard against rounding in the cumulative sum
}

RolloutResult rollout(const PolicyNetwork& net, const KnowledgeGraph& kg,
                      const EmbeddingTable& table, const ExplicitSemantics& v, int max_length,
                      Rng& rng) {
  if (v.entities.empty()) throw std::invalid_argument("rollout: no visible entity");
  RolloutResult result;
  result.path.start = v.entities.front();

  std::unordered_set<EntityId> visited{result.path.start};
  for (int t = 0; t < max_length; ++t) {
    State state{result.path, t, std::nullopt, std::nullopt};
    ActionMask mask = valid_actions(state, kg);
    if (std::find(mask.begin(), mask.end(), 1) == mask.end()) break;  // terminal

    Vec features = featurize_state(state, table, max_length);
    Vec dist = policy_forward(net, features, mask);
    RelationId action = sample_action(dist, rng);

    // Unvisited tails of the sampled relation from the current entity.
    std::vector<EntityId> tails;
    for (const Edge& e : kg.neighbors(result.path.terminal()))
      if (e.relation == action && !visited.contains(e.tail)) tails.push_back(e.tail);
    std::uniform_int_distribution<std::size_t> pick(0, tails.size() - 1);
    EntityId next = tails[pick(rng)];

    result.steps.push_back({std::move(features), std::move(mask), action});
    result.path.steps.push_back({action, next});
    visited.insert(next);
  }
  return result;
}

PolicyGrad PolicyGrad::zeros_like(const PolicyNetwork& net) {
  PolicyGrad g;
  for (const DenseLayer& layer : net.layers) {
    g.w.emplace_back(layer.w.size(), 0.0);
    g.b.emplace_back(layer.b.size(), 0.0);
  }
  return g;
}

void PolicyGrad::add(const PolicyGrad& other, double scale) {
  for (std::size_t m = 0; m < w.size(); ++m) {
    for (std::size_t i = 0; i < w[m].size(); ++i) w[m][i] += scale * other.w[m][i];
    for (std::size_t i = 0; i < b[m].size(); ++i) b[m][i] += scale * other.b[m][i];
  }
}

PolicyGrad policy_grad(const PolicyNetwork& net, std::span<const TrajectoryStep> trajectory,
                       double reward, double baseline) {
  if (trajectory.empty()) throw std::invalid_argument("policy_grad: empty trajectory");
  if (!std::isfinite(reward) || !std::isfinite(baseline))
    throw std::invalid_argument("policy_grad: non-finite reward");
  PolicyGrad grad = PolicyGrad::zeros_like(net);
  double advantage = reward - baseline;
  if (advantage == 0.0) return grad;

  std::size_t last = net.layers.size() - 1;
  for (const TrajectoryStep& step : trajectory) {
    ForwardCache cache = forward_pass(net, step.features);
    Vec p = masked_softmax(cache.post.back(), step.mask);

    // d log p[a] / d logits, zero on masked entries.
    Vec dz(p.size(), 0.0);
    for (std::size_t j = 0; j < p.size(); ++j)
      if (step.mask[j]) dz[j] = (static_cast<RelationId>(j) == step.action ? 1.0 : 0.0) - p[j];

    for (std::size_t m = last;; --m) {
      const DenseLayer& layer = net.layers[m];
      const Vec& input = m == 0 ? step.features : cache.post[m - 1];
      for (int o = 0; o < layer.out; ++o) {
        double g = dz[o] * advantage;
        if (g != 0.0) {
          double* wrow = grad.w[m].data() + static_cast<std::size_t>(o) * layer.in;
          for (int i = 0; i < layer.in; ++i) wrow[i] += g * input[i];
          grad.b[m][o] += g;
        }
      }
      if (m == 0) break;
      // Propagate through the affine map and the previous ReLU.
      Vec dprev(layer.in, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        if (dz[o] == 0.0) continue;
        const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) dprev[i] += wrow[i] * dz[o];
      }
      for (int i = 0; i < layer.in; ++i)
        if (cache.pre[m - 1][i] <= 0.0) dprev[i] = 0.0;
      dz = std::move(dprev);
    }
  }
  return grad;
}

double trajectory_logprob(const PolicyNetwork& net, std::span<const TrajectoryStep> trajectory) {
  double acc = 0.0;
  for (const TrajectoryStep& step : trajectory) {
    Vec p = policy_forward(net, step.features, step.mask);
    acc += std::log(std::max(p[step.action], 1e-300));
  }
  return acc;
}

void apply_update(PolicyNetwork& net, const PolicyGrad& grad, double step) {
  for (std::size_t m = 0; m < net.layers.size(); ++m) {
    DenseLayer& layer = net.layers[m];
    for (std::size_t i = 0; i < layer.w.size(); ++i) layer.w[i] += step * grad.w[m][i];
    for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] += step * grad.b[m][i];
  }
}

}  // namespace semcom
