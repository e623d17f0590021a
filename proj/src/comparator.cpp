#include "semcom/comparator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

namespace semcom {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

struct ComparatorCache {
  Vec pre;    // hidden pre-activation
  Vec post;   // hidden post-ReLU
  double z = 0.0;
  double out = 0.0;
};

ComparatorCache forward(const ComparatorNetwork& net, std::span<const double> x) {
  ComparatorCache c;
  c.pre.assign(net.hidden.out, 0.0);
  for (int o = 0; o < net.hidden.out; ++o) {
    const double* row = net.hidden.w.data() + static_cast<std::size_t>(o) * net.hidden.in;
    double acc = net.hidden.b[o];
    for (int i = 0; i < net.hidden.in; ++i) acc += row[i] * x[i];
    c.pre[o] = acc;
  }
  c.post = c.pre;
  for (double& v : c.post) v = std::max(0.0, v);
  c.z = net.b_out;
  for (int o = 0; o < net.hidden.out; ++o) c.z += net.w_out[o] * c.post[o];
  c.out = sigmoid(c.z);
  return c;
}

// Contribution of one path: d/dz applied through the shared backward pass.
void backprop(const ComparatorNetwork& net, std::span<const double> x, const ComparatorCache& c,
              double dz, ComparatorGrad& grad) {
  grad.b_out += dz;
  for (int o = 0; o < net.hidden.out; ++o) grad.w_out[o] += dz * c.post[o];
  for (int o = 0; o < net.hidden.out; ++o) {
    if (c.pre[o] <= 0.0) continue;
    double g = dz * net.w_out[o];
    double* wrow = grad.w1.data() + static_cast<std::size_t>(o) * net.hidden.in;
    for (int i = 0; i < net.hidden.in; ++i) wrow[i] += g * x[i];
    grad.b1[o] += g;
  }
}

}  // namespace

ComparatorNetwork ComparatorNetwork::create(int input_dim, int hidden_dim, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) throw std::invalid_argument("bad comparator shape");
  Rng rng(seed);
  ComparatorNetwork net;
  double bound = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
  std::uniform_real_distribution<double> init(-bound, bound);
  net.hidden.in = input_dim;
  net.hidden.out = hidden_dim;
  net.hidden.w.resize(static_cast<std::size_t>(input_dim) * hidden_dim);
  net.hidden.b.assign(hidden_dim, 0.0);
  for (double& v : net.hidden.w) v = init(rng);
  double bound2 = std::sqrt(6.0 / static_cast<double>(hidden_dim + 1));
  std::uniform_real_distribution<double> init2(-bound2, bound2);
  net.w_out.resize(hidden_dim);
  for (double& v : net.w_out) v = init2(rng);
  net.b_out = 0.0;
  return net;
}

void ComparatorNetwork::save(std::ostream& out) const {
  out << 2 << ' ' << hidden.in << ' ' << hidden.out << ' ' << 1 << '\n';
  for (std::size_t i = 0; i < hidden.w.size(); ++i) out << (i ? " " : "") << fmt_double(hidden.w[i]);
  out << '\n';
  for (std::size_t i = 0; i < hidden.b.size(); ++i) out << (i ? " " : "") << fmt_double(hidden.b[i]);
  out << '\n';
  for (std::size_t i = 0; i < w_out.size(); ++i) out << (i ? " " : "") << fmt_double(w_out[i]);
  out << '\n';
  out << fmt_double(b_out) << '\n';
}

ComparatorNetwork ComparatorNetwork::load(std::istream& in) {
  int layers = 0, input_dim = 0, hidden_dim = 0, out_dim = 0;
  if (!(in >> layers >> input_dim >> hidden_dim >> out_dim) || layers != 2 || out_dim != 1)
    throw std::runtime_error("bad comparator header");
  ComparatorNetwork net;
  net.hidden.in = input_dim;
  net.hidden.out = hidden_dim;
  net.hidden.w.resize(static_cast<std::size_t>(input_dim) * hidden_dim);
  net.hidden.b.resize(hidden_dim);
  net.w_out.resize(hidden_dim);
  for (double& v : net.hidden.w)
    if (!(in >> v)) throw std::runtime_error("truncated comparator");
  for (double& v : net.hidden.b)
    if (!(in >> v)) throw std::runtime_error("truncated comparator");
  for (double& v : net.w_out)
    if (!(in >> v)) throw std::runtime_error("truncated comparator");
  if (!(in >> net.b_out)) throw std::runtime_error("truncated comparator");
  return net;
}

Vec featurize_path(const SemanticPath& path, const EmbeddingTable& table, int max_length) {
  if (path.length() > max_length)
    throw std::invalid_argument("featurize_path: path longer than max_length");
  int n = table.n, np = table.n_prime;
  Vec f;
  f.reserve(n + static_cast<std::size_t>(max_length) * (np + n));
  auto start = table.entity(path.start);
  f.insert(f.end(), start.begin(), start.end());
  for (const auto& step : path.steps) {
    auto r = table.relation(step.relation);
    auto e = table.entity(step.entity);
    f.insert(f.end(), r.begin(), r.end());
    f.insert(f.end(), e.begin(), e.end());
  }
  f.resize(n + static_cast<std::size_t>(max_length) * (np + n), 0.0);
  return f;
}

double comparator_forward(const ComparatorNetwork& net, std::span<const double> features) {
  if (static_cast<int>(features.size()) != net.input_dim())
    throw std::invalid_argument("comparator_forward: dimension mismatch");
  return forward(net, features).out;
}

ComparatorGrad comparator_grad(const ComparatorNetwork& net,
                               std::span<const SemanticPath> expert,
                               std::span<const SemanticPath> generated,
                               const EmbeddingTable& table, int max_length) {
  if (expert.empty() || generated.empty())
    throw std::invalid_argument("comparator_grad: empty batch");
  ComparatorGrad grad;
  grad.w1.assign(net.hidden.w.size(), 0.0);
  grad.b1.assign(net.hidden.b.size(), 0.0);
  grad.w_out.assign(net.w_out.size(), 0.0);
  grad.b_out = 0.0;

  // d/dz log sigma(z) = 1 - sigma; d/dz log(1 - sigma(z)) = -sigma.
  for (const SemanticPath& path : expert) {
    Vec x = featurize_path(path, table, max_length);
    ComparatorCache c = forward(net, x);
    backprop(net, x, c, (1.0 - c.out) / static_cast<double>(expert.size()), grad);
  }
  for (const SemanticPath& path : generated) {
    Vec x = featurize_path(path, table, max_length);
    ComparatorCache c = forward(net, x);
    backprop(net, x, c, -c.out / static_cast<double>(generated.size()), grad);
  }
  return grad;
}

double comparator_objective(const ComparatorNetwork& net, std::span<const SemanticPath> expert,
                            std::span<const SemanticPath> generated, const EmbeddingTable& table,
                            int max_length) {
  if (expert.empty() || generated.empty())
    throw std::invalid_argument("comparator_objective: empty batch");
  double acc = 0.0;
  for (const SemanticPath& path : expert) {
    Vec x = featurize_path(path, table, max_length);
    acc += std::log(std::max(comparator_forward(net, x), 1e-300)) /
           static_cast<double>(expert.size());
  }
  for (const SemanticPath& path : generated) {
    Vec x = featurize_path(path, table, max_length);
    acc += std::log(std::max(1.0 - comparator_forward(net, x), 1e-300)) /
           static_cast<double>(generated.size());
  }
  return acc;
}

void apply_update(ComparatorNetwork& net, const ComparatorGrad& grad, double step) {
  for (std::size_t i = 0; i < net.hidden.w.size(); ++i) net.hidden.w[i] += step * grad.w1[i];
  for (std::size_t i = 0; i < net.hidden.b.size(); ++i) net.hidden.b[i] += step * grad.b1[i];
  for (std::size_t i = 0; i < net.w_out.size(); ++i) net.w_out[i] += step * grad.w_out[i];
  net.b_out += step * grad.b_out;
}

double optimal_comparator_value(double rho_expert, double rho_generated) {
  if (rho_expert < 0 || rho_generated < 0)
    throw std::invalid_argument("optimal_comparator_value: negative occupancy");
  if (rho_expert == 0 && rho_generated == 0)
    throw std::invalid_argument("optimal_comparator_value: both occupancies zero");
  return rho_expert / (rho_expert + rho_generated);
}

PathDistribution PathDistribution::from_samples(std::span<const SemanticPath> samples) {
  if (samples.empty()) throw std::invalid_argument("from_samples: no samples");
  std::map<std::vector<std::int32_t>, std::pair<SemanticPath, long>> counts;
  for (const SemanticPath& p : samples) {
    auto [it, inserted] = counts.try_emplace(p.key(), std::make_pair(p, 0L));
    ++it->second.second;
  }
  PathDistribution dist;
  for (auto& [key, entry] : counts) {
    dist.support.push_back(std::move(entry.first));
    dist.probs.push_back(static_cast<double>(entry.second) / static_cast<double>(samples.size()));
  }
  return dist;
}

SemanticDistance semantic_distance(const PathDistribution& p, const PathDistribution& q) {
  if (p.support.size() != p.probs.size() || q.support.size() != q.probs.size())
    throw std::invalid_argument("semantic_distance: malformed distribution");
  if (p.support.empty() && q.support.empty())
    throw std::invalid_argument("semantic_distance: no paths");
  for (double v : p.probs)
    if (v < 0) throw std::invalid_argument("semantic_distance: negative probability");
  for (double v : q.probs)
    if (v < 0) throw std::invalid_argument("semantic_distance: negative probability");

  // Zero-filled union support keyed by id sequence.
  std::map<std::vector<std::int32_t>, std::pair<double, double>> joint;
  for (std::size_t i = 0; i < p.support.size(); ++i)
    joint[p.support[i].key()].first += p.probs[i];
  for (std::size_t i = 0; i < q.support.size(); ++i)
    joint[q.support[i].key()].second += q.probs[i];

  double gamma = 0.0;
  for (const auto& [key, pq] : joint) {
    auto [pp, qq] = pq;
    if (pp > 0) gamma += pp * std::log(pp / (pp + qq));
    if (qq > 0) gamma += qq * std::log(qq / (pp + qq));
  }
  return {gamma, (gamma + std::log(4.0)) / 2.0};
}

}  // namespace semcom
