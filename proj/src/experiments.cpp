#include "semcom/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "semcom/synthetic.hpp"

namespace semcom {

namespace fs = std::filesystem;

const char* to_string(EvalMode m) {
  switch (m) {
    case EvalMode::Hard: return "hard";
    case EvalMode::Soft: return "soft";
    default: return "none";
  }
}

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "hard") return EvalMode::Hard;
  if (s == "soft") return EvalMode::Soft;
  if (s == "none") return EvalMode::None;
  throw std::invalid_argument("unknown interpretation mode: " + s);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

template <typename T>
std::string join_list(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>)
      out += fmt_double(values[i]);
    else
      out += std::to_string(values[i]);
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if constexpr (std::is_same_v<T, double>)
      out.push_back(std::stod(item));
    else if constexpr (std::is_same_v<T, std::uint64_t>)
      out.push_back(std::stoull(item));
    else
      out.push_back(static_cast<T>(std::stol(item)));
  }
  return out;
}

std::string dataset_name(const std::string& path) {
  fs::path p(path);
  return p.stem().string();
}

}  // namespace

std::map<std::string, std::string> ExperimentConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["dataset"] = dataset;
  kv["out"] = out_dir;
  kv["seeds"] = join_list(seeds);
  kv["skg_budget"] = std::to_string(skg_budget);
  kv["n"] = std::to_string(n);
  kv["n_prime"] = std::to_string(n_prime);
  kv["margin"] = fmt_double(margin);
  kv["packing"] = to_string(packing);
  kv["encoder_epochs"] = std::to_string(encoder_epochs);
  kv["encoder_batch"] = std::to_string(encoder_batch);
  kv["encoder_lr"] = fmt_double(encoder_lr);
  kv["channel"] = to_string(channel);
  kv["mode"] = mode;
  kv["max_length"] = std::to_string(max_length);
  kv["experts"] = std::to_string(expert_count);
  kv["grml_iterations"] = std::to_string(grml_iterations);
  kv["grml_rollouts"] = std::to_string(grml_rollouts);
  kv["policy_lr"] = fmt_double(policy_lr);
  kv["comparator_lr"] = fmt_double(comparator_lr);
  kv["baseline_decay"] = fmt_double(baseline_decay);
  kv["policy_hidden"] = std::to_string(policy_hidden);
  kv["comparator_hidden"] = std::to_string(comparator_hidden);
  kv["early_stop_djs"] = fmt_double(early_stop_djs);
  kv["early_stop_patience"] = std::to_string(early_stop_patience);
  kv["lengths"] = join_list(length_sweep);
  kv["snrs"] = join_list(snr_sweep);
  kv["dims"] = join_list(dim_sweep);
  kv["expert_counts"] = join_list(expert_count_sweep);
  kv["ser_symbols"] = std::to_string(ser_symbols);
  kv["ser_dim_snr_db"] = fmt_double(ser_dim_snr_db);
  kv["top_p"] = fmt_double(top_p);
  kv["eval_samples"] = std::to_string(eval_samples);
  kv["timing_ks"] = join_list(timing_k);
  kv["timing_epochs"] = std::to_string(timing_epochs);
  kv["timing_repeats"] = std::to_string(timing_repeats);
  kv["table"] = table_file;
  kv["policy"] = policy_file;
  return kv;
}

ExperimentConfig ExperimentConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ExperimentConfig cfg;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  try {
    if (auto* v = get("dataset")) cfg.dataset = *v;
    if (auto* v = get("out")) cfg.out_dir = *v;
    if (auto* v = get("seeds")) cfg.seeds = parse_list<std::uint64_t>(*v);
    if (auto* v = get("skg_budget")) cfg.skg_budget = std::stoi(*v);
    if (auto* v = get("n")) cfg.n = std::stoi(*v);
    if (auto* v = get("n_prime")) cfg.n_prime = std::stoi(*v);
    if (auto* v = get("margin")) cfg.margin = std::stod(*v);
    if (auto* v = get("packing")) cfg.packing = packing_from_string(*v);
    if (auto* v = get("encoder_epochs")) cfg.encoder_epochs = std::stoi(*v);
    if (auto* v = get("encoder_batch")) cfg.encoder_batch = std::stoi(*v);
    if (auto* v = get("encoder_lr")) cfg.encoder_lr = std::stod(*v);
    if (auto* v = get("channel")) cfg.channel = channel_model_from_string(*v);
    if (auto* v = get("mode")) cfg.mode = *v;
    if (auto* v = get("max_length")) cfg.max_length = std::stoi(*v);
    if (auto* v = get("experts")) cfg.expert_count = std::stoi(*v);
    if (auto* v = get("grml_iterations")) cfg.grml_iterations = std::stoi(*v);
    if (auto* v = get("grml_rollouts")) cfg.grml_rollouts = std::stoi(*v);
    if (auto* v = get("policy_lr")) cfg.policy_lr = std::stod(*v);
    if (auto* v = get("comparator_lr")) cfg.comparator_lr = std::stod(*v);
    if (auto* v = get("baseline_decay")) cfg.baseline_decay = std::stod(*v);
    if (auto* v = get("policy_hidden")) cfg.policy_hidden = std::stoi(*v);
    if (auto* v = get("comparator_hidden")) cfg.comparator_hidden = std::stoi(*v);
    if (auto* v = get("early_stop_djs")) cfg.early_stop_djs = std::stod(*v);
    if (auto* v = get("early_stop_patience")) cfg.early_stop_patience = std::stoi(*v);
    if (auto* v = get("lengths")) cfg.length_sweep = parse_list<int>(*v);
    if (auto* v = get("snrs")) cfg.snr_sweep = parse_list<double>(*v);
    if (auto* v = get("dims")) cfg.dim_sweep = parse_list<int>(*v);
    if (auto* v = get("expert_counts")) cfg.expert_count_sweep = parse_list<int>(*v);
    if (auto* v = get("ser_symbols")) cfg.ser_symbols = std::stoi(*v);
    if (auto* v = get("ser_dim_snr_db")) cfg.ser_dim_snr_db = std::stod(*v);
    if (auto* v = get("top_p")) cfg.top_p = std::stod(*v);
    if (auto* v = get("eval_samples")) cfg.eval_samples = std::stoi(*v);
    if (auto* v = get("timing_ks")) cfg.timing_k = parse_list<int>(*v);
    if (auto* v = get("timing_epochs")) cfg.timing_epochs = std::stoi(*v);
    if (auto* v = get("timing_repeats")) cfg.timing_repeats = std::stoi(*v);
    if (auto* v = get("table")) cfg.table_file = *v;
    if (auto* v = get("policy")) cfg.policy_file = *v;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto notspace = [](unsigned char c) { return !std::isspace(c); };
    auto trim = [&](std::string s) {
      s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
      s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
      return s;
    };
    if (trim(line).empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return from_kv(kv);
}

void ExperimentConfig::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  for (const auto& [k, v] : to_kv()) out << k << " = " << v << "\n";
}

void CsvTable::write(std::ostream& out) const {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
  for (const std::string& t : trailers) out << "# " << t << '\n';
}

CsvTable CsvTable::read(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    return fields;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string t = line.substr(1);
      if (!t.empty() && t[0] == ' ') t.erase(0, 1);
      table.trailers.push_back(t);
      continue;
    }
    if (!have_header) {
      table.header = split(line);
      have_header = true;
    } else {
      table.rows.push_back(split(line));
    }
  }
  return table;
}

namespace {

EncoderConfig encoder_config(const ExperimentConfig& cfg, int dim, std::uint64_t seed) {
  EncoderConfig ec;
  ec.n = dim;
  ec.n_prime = dim;
  ec.margin = cfg.margin;
  ec.norm = cfg.norm();
  ec.learning_rate = cfg.encoder_lr;
  ec.epochs = cfg.encoder_epochs;
  ec.batch_size = cfg.encoder_batch;
  ec.seed = seed;
  return ec;
}

TrainConfig grml_config(const ExperimentConfig& cfg, int max_length, std::uint64_t seed) {
  TrainConfig tc;
  tc.iterations = cfg.grml_iterations;
  tc.rollouts_per_iter = cfg.grml_rollouts;
  tc.comparator_lr = cfg.comparator_lr;
  tc.policy_lr = cfg.policy_lr;
  tc.baseline_decay = cfg.baseline_decay;
  tc.max_length = max_length;
  tc.policy_hidden = cfg.policy_hidden;
  tc.comparator_hidden = cfg.comparator_hidden;
  tc.early_stop_djs = cfg.early_stop_djs;
  tc.early_stop_patience = cfg.early_stop_patience;
  tc.seed = seed;
  return tc;
}

KnowledgeGraph build_skg(const KnowledgeGraph& dataset, const ExperimentConfig& cfg,
                         std::uint64_t seed) {
  if (cfg.skg_budget >= dataset.entity_count()) return dataset;
  return sample_skg(dataset, cfg.skg_budget, seed);
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nan("");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

// ---- sequence transmission + decoding used by the SER experiments ----

struct SerCounters {
  long symbols = 0;
  std::map<EvalMode, long> errors;
};

std::vector<EvalMode> requested_modes(const ExperimentConfig& cfg) {
  if (cfg.mode == "all") return {EvalMode::None, EvalMode::Hard, EvalMode::Soft};
  return {eval_mode_from_string(cfg.mode)};
}

// Relations holding the top_p probability mass, largest first.
std::vector<RelationId> top_p_relations(const Vec& dist, double top_p) {
  std::vector<RelationId> by_prob;
  for (RelationId r = 0; r < static_cast<RelationId>(dist.size()); ++r)
    if (dist[r] > 0) by_prob.push_back(r);
  std::sort(by_prob.begin(), by_prob.end(), [&](RelationId a, RelationId b) {
    return dist[a] != dist[b] ? dist[a] > dist[b] : a < b;
  });
  std::vector<RelationId> chosen;
  double mass = 0.0;
  for (RelationId r : by_prob) {
    chosen.push_back(r);
    mass += dist[r];
    if (mass >= top_p) break;
  }
  return chosen;
}

double vec_distance(std::span<const double> a, std::span<const double> b, Norm norm) {
  double acc = 0.0;
  if (norm == Norm::L1) {
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
    return acc;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

EntityId nearest_in(const std::vector<EntityId>& ids, std::span<const double> y,
                    const EmbeddingTable& table) {
  EntityId best = ids.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (EntityId id : ids) {
    double d = vec_distance(y, table.entity(id), table.norm);
    if (d < best_d || (d == best_d && id < best)) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

// Soft-interpretation step: anchor the policy on the raw previous vector,
// ground adjacency in the union of the k nearest candidates.
EntityId soft_sequence_step(const RecoveryResult& res, int t, const PolicyNetwork& policy,
                            const KnowledgeGraph& kg, const EmbeddingTable& table, double top_p,
                            int max_length) {
  const auto& prev_cands = res.candidates[t - 1];
  ActionMask mask(kg.relation_count(), 0);
  for (const auto& [cid, d] : prev_cands)
    for (const Edge& e : kg.neighbors(cid)) mask[e.relation] = 1;
  if (std::find(mask.begin(), mask.end(), 1) == mask.end())
    return res.candidates[t][0].first;

  State state;
  state.path.start = prev_cands[0].first;
  state.t = t - 1;
  state.soft_current = res.raw[t - 1];
  state.soft_start = res.raw[0];
  Vec features = featurize_state(state, table, max_length);
  Vec dist = policy_forward(policy, features, mask);

  std::vector<RelationId> chosen = top_p_relations(dist, top_p);
  std::unordered_set<RelationId> chosen_set(chosen.begin(), chosen.end());
  std::vector<EntityId> reachable;
  std::unordered_set<EntityId> seen;
  for (const auto& [cid, d] : prev_cands)
    for (const Edge& e : kg.neighbors(cid))
      if (chosen_set.contains(e.relation) && seen.insert(e.tail).second)
        reachable.push_back(e.tail);
  if (reachable.empty()) return res.candidates[t][0].first;
  return nearest_in(reachable, res.raw[t], table);
}

// Transmits valid paths as entity-symbol sequences at one SNR and decodes the
// same records under every requested mode.
SerCounters ser_at_snr(const ExperimentConfig& cfg, const KnowledgeGraph& kg,
                       const EmbeddingTable& table, const PolicyNetwork* policy,
                       const std::vector<SemanticPath>& test_paths, double snr_db,
                       std::uint64_t seed) {
  double power = measure_signal_power(table);
  ChannelConfig ch;
  ch.model = cfg.channel;
  ch.snr_db = snr_db;
  ch.packing = cfg.packing;
  ch.csi_at_receiver = true;
  Rng rng(seed);

  std::vector<EvalMode> modes = requested_modes(cfg);
  SerCounters counters;
  for (EvalMode m : modes) counters.errors[m] = 0;

  std::size_t path_at = 0;
  while (counters.symbols < cfg.ser_symbols) {
    const SemanticPath& path = test_paths[path_at];
    path_at = (path_at + 1) % test_paths.size();

    std::vector<EntityId> truth{path.start};
    for (const auto& s : path.steps) truth.push_back(s.entity);

    Vec coords;
    for (EntityId e : truth) {
      auto row = table.entity(e);
      coords.insert(coords.end(), row.begin(), row.end());
    }
    auto symbols = pack_symbols(coords, cfg.packing);
    TransmitRecord record = transmit(symbols, ch, power, rng);

    std::vector<Slot> layout(truth.size(), Slot::Entity);
    RecoveryResult res = soft_recover(record, layout, table, 3);

    counters.symbols += static_cast<long>(truth.size());
    for (EvalMode m : modes) {
      long& err = counters.errors[m];
      if (m == EvalMode::None) {
        for (std::size_t t = 0; t < truth.size(); ++t)
          if (res.candidates[t][0].first != truth[t]) ++err;
      } else if (m == EvalMode::Hard) {
        // Hard interpretation: every slot is first committed by nearest-row
        // lookup, then each symbol is refined by the policy anchored at its
        // predecessor's committed id.
        if (res.candidates[0][0].first != truth[0]) ++err;
        for (std::size_t t = 1; t < truth.size(); ++t) {
          EntityId prev = res.candidates[t - 1][0].first;
          EntityId dec =
              reasoning_constrained_recover(res.raw[t], table, *policy, prev, kg, cfg.top_p);
          if (dec != truth[t]) ++err;
        }
      } else {
        if (res.candidates[0][0].first != truth[0]) ++err;
        for (std::size_t t = 1; t < truth.size(); ++t) {
          EntityId dec = soft_sequence_step(res, static_cast<int>(t), *policy, kg, table,
                                            cfg.top_p, cfg.max_length);
          if (dec != truth[t]) ++err;
        }
      }
    }
  }
  return counters;
}

}  // namespace

CsvTable run_accuracy_vs_length(const ExperimentConfig& cfg, const KnowledgeGraph& dataset) {
  if (cfg.length_sweep.empty()) throw std::invalid_argument("empty length sweep");
  CsvTable table;
  table.header = {"dataset", "L", "metric", "mean_accuracy", "std_accuracy"};
  std::string name = dataset_name(cfg.dataset.empty() ? "dataset" : cfg.dataset);

  for (int L : cfg.length_sweep) {
    std::vector<double> exact, terminal;
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      std::uint64_t seed = cfg.seeds[si];
      try {
        KnowledgeGraph skg = build_skg(dataset, cfg, mix_seed(seed, 11));
        EncoderResult enc = train_encoder(skg, encoder_config(cfg, cfg.n, mix_seed(seed, 12)));
        ExpertPathSet experts =
            generate_expert_paths(skg, L, cfg.expert_count, mix_seed(seed, 13));
        if (experts.paths.empty()) throw std::runtime_error("no expert paths found");
        GrmlResult grml = train(skg, experts, enc.table, grml_config(cfg, L, mix_seed(seed, 14)));
        exact.push_back(evaluate_accuracy(grml.policy, experts, AccuracyMetric::ExactMatch,
                                          cfg.eval_samples, skg, enc.table, mix_seed(seed, 15)));
        terminal.push_back(evaluate_accuracy(grml.policy, experts, AccuracyMetric::TerminalHit,
                                             cfg.eval_samples, skg, enc.table,
                                             mix_seed(seed, 16)));
      } catch (const std::exception& e) {
        table.trailers.push_back("cell_failure L=" + std::to_string(L) +
                                 " seed=" + std::to_string(seed) + ": " + e.what());
      }
    }
    table.rows.push_back({name, std::to_string(L), "exact_match", fmt_double(mean_of(exact)),
                          fmt_double(std_of(exact))});
    table.rows.push_back({name, std::to_string(L), "terminal_hit", fmt_double(mean_of(terminal)),
                          fmt_double(std_of(terminal))});
  }
  return table;
}

CsvTable run_expert_count_sweep(const ExperimentConfig& cfg, const KnowledgeGraph& dataset,
                                const ExpertSampler& sampler) {
  if (cfg.expert_count_sweep.empty()) throw std::invalid_argument("empty expert count sweep");
  CsvTable table;
  table.header = {"expert_count", "final_d_js", "iterations_to_converge", "converged"};
  std::uint64_t seed = cfg.seeds.front();
  KnowledgeGraph skg = build_skg(dataset, cfg, mix_seed(seed, 21));
  EncoderResult enc = train_encoder(skg, encoder_config(cfg, cfg.n, mix_seed(seed, 22)));

  for (int count : cfg.expert_count_sweep) {
    try {
      ExpertPathSet experts =
          sampler ? sampler(skg, count, mix_seed(seed, 23))
                  : generate_expert_paths(skg, cfg.max_length, count, mix_seed(seed, 23));
      if (experts.paths.empty()) throw std::runtime_error("no expert paths found");
      GrmlResult grml =
          train(skg, experts, enc.table, grml_config(cfg, cfg.max_length, mix_seed(seed, 24)));
      double final_djs =
          grml.log.records.empty() ? std::nan("") : grml.log.records.back().d_js;
      int iters = grml.log.converged ? grml.log.converged_iter
                                     : static_cast<int>(grml.log.records.size());
      table.rows.push_back({std::to_string(count), fmt_double(final_djs), std::to_string(iters),
                            grml.log.converged ? "1" : "0"});
    } catch (const std::exception& e) {
      table.rows.push_back({std::to_string(count), "nan", "0", "0"});
      table.trailers.push_back("cell_failure count=" + std::to_string(count) + ": " + e.what());
    }
  }
  return table;
}

CsvTable run_ser_vs_snr(const ExperimentConfig& cfg, const KnowledgeGraph& skg,
                        const EmbeddingTable& table, const PolicyNetwork* policy) {
  if (cfg.snr_sweep.empty()) throw std::invalid_argument("empty snr sweep");
  if (table.entity_count() != skg.entity_count())
    throw std::invalid_argument("table does not match the graph");
  std::vector<EvalMode> modes = requested_modes(cfg);
  if (!policy &&
      std::any_of(modes.begin(), modes.end(), [](EvalMode m) { return m != EvalMode::None; }))
    throw std::invalid_argument("run_ser_vs_snr: reasoning modes need a trained policy");

  std::uint64_t seed = cfg.seeds.front();
  ExpertPathSet test =
      generate_expert_paths(skg, cfg.max_length, std::max(64, cfg.ser_symbols / 2),
                            mix_seed(seed, 31));
  if (test.paths.empty()) throw std::runtime_error("no transmit paths found");

  CsvTable out;
  out.header = {"snr_db", "mode", "channel", "dimension", "ser"};
  for (std::size_t i = 0; i < cfg.snr_sweep.size(); ++i) {
    double snr = cfg.snr_sweep[i];
    SerCounters counters =
        ser_at_snr(cfg, skg, table, policy, test.paths, snr, mix_seed(seed, 100 + i));
    for (EvalMode m : modes) {
      double ser =
          static_cast<double>(counters.errors[m]) / static_cast<double>(counters.symbols);
      out.rows.push_back({fmt_double(snr), to_string(m), to_string(cfg.channel),
                          std::to_string(table.n), fmt_double(ser)});
    }
  }
  out.trailers.push_back("symbols_per_row=" + std::to_string(cfg.ser_symbols) +
                         " seed=" + std::to_string(seed));
  return out;
}

CsvTable run_dimension_sweep(const ExperimentConfig& cfg, const KnowledgeGraph& dataset) {
  if (cfg.dim_sweep.empty()) throw std::invalid_argument("empty dimension sweep");
  CsvTable out;
  out.header = {"dimension", "channel", "accuracy"};

  std::map<std::string, std::vector<std::pair<int, double>>> per_channel;
  for (auto channel : {ChannelConfig::Model::Awgn, ChannelConfig::Model::Rayleigh}) {
    for (int dim : cfg.dim_sweep) {
      std::vector<double> accs;
      for (std::uint64_t seed : cfg.seeds) {
        try {
          ExperimentConfig local = cfg;
          local.channel = channel;
          local.mode = "hard";
          local.n = dim;
          local.n_prime = dim;
          KnowledgeGraph skg = build_skg(dataset, local, mix_seed(seed, 41));
          EncoderResult enc = train_encoder(skg, encoder_config(local, dim, mix_seed(seed, 42)));
          ExpertPathSet experts = generate_expert_paths(skg, local.max_length, local.expert_count,
                                                        mix_seed(seed, 43));
          if (experts.paths.empty()) throw std::runtime_error("no expert paths found");
          GrmlResult grml = train(skg, experts, enc.table,
                                  grml_config(local, local.max_length, mix_seed(seed, 44)));
          ExpertPathSet test = generate_expert_paths(
              skg, local.max_length, std::max(64, local.ser_symbols / 2), mix_seed(seed, 45));
          SerCounters counters = ser_at_snr(local, skg, enc.table, &grml.policy, test.paths,
                                            local.ser_dim_snr_db, mix_seed(seed, 46));
          double ser = static_cast<double>(counters.errors[EvalMode::Hard]) /
                       static_cast<double>(counters.symbols);
          accs.push_back(1.0 - ser);
        } catch (const std::exception& e) {
          out.trailers.push_back("cell_failure dim=" + std::to_string(dim) + " channel=" +
                                 std::string(to_string(channel)) + ": " + e.what());
        }
      }
      double acc = mean_of(accs);
      per_channel[to_string(channel)].emplace_back(dim, acc);
      out.rows.push_back({std::to_string(dim), to_string(channel), fmt_double(acc)});
    }
  }

  std::map<std::string, int> best;
  for (const auto& [channel, points] : per_channel) {
    bool strictly_increasing = true;
    int best_dim = points.front().first;
    double best_acc = points.front().second;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i > 0 && !(points[i].second > points[i - 1].second)) strictly_increasing = false;
      if (points[i].second > best_acc) {
        best_acc = points[i].second;
        best_dim = points[i].first;
      }
    }
    best[channel] = best_dim;
    out.trailers.push_back("best_dim_" + channel + "=" + std::to_string(best_dim));
    out.trailers.push_back("not_monotone_increasing_" + channel + "=" +
                           (strictly_increasing ? "false" : "true"));
  }
  // Fading channels tend to need more constellation dimensions; report only.
  out.trailers.push_back(std::string("rayleigh_best_ge_awgn_best=") +
                         (best["rayleigh"] >= best["awgn"] ? "true" : "false"));
  return out;
}

CsvTable run_encoder_timing(const ExperimentConfig& cfg, const KnowledgeGraph& dataset) {
  if (cfg.timing_k.empty()) throw std::invalid_argument("empty timing sweep");
  std::uint64_t seed = cfg.seeds.front();

  CsvTable out;
  out.header = {"K", "n", "seconds"};
  std::vector<std::pair<double, double>> points;
  for (int k : cfg.timing_k) {
    if (k > static_cast<int>(dataset.triples().size()))
      throw std::invalid_argument("timing K exceeds dataset triple count");
    // Induced K-triple training set, fresh labels so ids stay dense.
    std::vector<std::size_t> order(dataset.triples().size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 51));
    std::shuffle(order.begin(), order.end(), rng);
    std::ostringstream tsv;
    for (int i = 0; i < k; ++i) {
      const Triple& t = dataset.triples()[order[i]];
      tsv << dataset.entity_label(t.head) << '\t' << dataset.relation_label(t.relation) << '\t'
          << dataset.entity_label(t.tail) << '\n';
    }
    std::istringstream in(tsv.str());
    KnowledgeGraph sub = KnowledgeGraph::load(in);

    EncoderConfig ec = encoder_config(cfg, cfg.n, mix_seed(seed, 52));
    ec.epochs = cfg.timing_epochs;
    std::vector<double> times;
    for (int rep = 0; rep < cfg.timing_repeats; ++rep) {
      auto tic = std::chrono::steady_clock::now();
      train_encoder(sub, ec);
      times.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count());
    }
    std::sort(times.begin(), times.end());
    double seconds = times[times.size() / 2];
    points.emplace_back(static_cast<double>(k), seconds);
    out.rows.push_back({std::to_string(k), std::to_string(cfg.n), fmt_double(seconds)});
  }

  // Least-squares fit seconds ~ a + b*K.
  double n = static_cast<double>(points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : points) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = n * sxx - sx * sx;
  double b = denom != 0 ? (n * sxy - sx * sy) / denom : 0.0;
  double a = (sy - b * sx) / n;
  double ss_res = 0, ss_tot = 0;
  for (auto [x, y] : points) {
    double pred = a + b * x;
    ss_res += (y - pred) * (y - pred);
    ss_tot += (y - sy / n) * (y - sy / n);
  }
  double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  out.trailers.push_back("r2=" + fmt_double(r2));
  out.trailers.push_back("fit_seconds_per_triple=" + fmt_double(b));
  return out;
}

namespace {

std::string iso_timestamp() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

std::string version_string() {
  std::string v;
  if (FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r")) {
    char buf[128];
    if (fgets(buf, sizeof(buf), pipe)) {
      v = buf;
      while (!v.empty() && (v.back() == '\n' || v.back() == '\r')) v.pop_back();
    }
    pclose(pipe);
  }
  return v.empty() ? "0.1.0" : v;
}

void write_manifest(const ExperimentConfig& cfg, const std::string& subcommand) {
  nlohmann::json manifest;
  manifest["config"] = cfg.to_kv();
  manifest["config"]["subcommand"] = subcommand;
  manifest["seeds"] = cfg.seeds;
  manifest["version"] = version_string();
  manifest["started_at"] = iso_timestamp();
  std::ofstream out(fs::path(cfg.out_dir) / "manifest.json");
  out << manifest.dump(2) << '\n';
  cfg.save_file((fs::path(cfg.out_dir) / "config.txt").string());
}

void write_csv(const CsvTable& table, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  table.write(out);
}

KnowledgeGraph require_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw ConfigError("--dataset is required");
  std::ifstream in(cfg.dataset);
  if (!in) throw ConfigError("cannot open dataset given by --dataset: " + cfg.dataset);
  return KnowledgeGraph::load(in);
}

EmbeddingTable require_table(const ExperimentConfig& cfg) {
  if (cfg.table_file.empty()) throw ConfigError("--table is required");
  std::ifstream in(cfg.table_file);
  if (!in) throw ConfigError("cannot open table given by --table: " + cfg.table_file);
  return EmbeddingTable::load(in);
}

PolicyNetwork require_policy(const ExperimentConfig& cfg) {
  if (cfg.policy_file.empty()) throw ConfigError("--policy is required");
  std::ifstream in(cfg.policy_file);
  if (!in) throw ConfigError("cannot open policy given by --policy: " + cfg.policy_file);
  return PolicyNetwork::load(in);
}

void prepare_out(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("--out is required");
  fs::create_directories(cfg.out_dir);
}

int cmd_train_encoder(const ExperimentConfig& cfg) {
  KnowledgeGraph dataset = require_dataset(cfg);
  prepare_out(cfg);
  std::uint64_t seed = cfg.seeds.front();
  KnowledgeGraph skg = build_skg(dataset, cfg, mix_seed(seed, 11));
  EncoderResult enc = train_encoder(skg, encoder_config(cfg, cfg.n, mix_seed(seed, 12)));

  {
    std::ofstream out(fs::path(cfg.out_dir) / "skg.tsv");
    skg.serialize(out);
  }
  {
    std::ofstream out(fs::path(cfg.out_dir) / "encoder.table");
    enc.table.save(out);
  }
  CsvTable loss;
  loss.header = {"epoch", "loss"};
  for (std::size_t i = 0; i < enc.epoch_loss.size(); ++i)
    loss.rows.push_back({std::to_string(i), fmt_double(enc.epoch_loss[i])});
  write_csv(loss, fs::path(cfg.out_dir) / "encoder_loss.csv");
  write_manifest(cfg, "train-encoder");
  std::cout << "trained encoder on " << skg.entity_count() << " entities, "
            << skg.triples().size() << " triples; margin satisfaction "
            << fmt_double(margin_satisfaction(skg, enc.table, cfg.margin, Corruption::Both,
                                              mix_seed(seed, 13)))
            << "\n";
  return 0;
}

int cmd_train_grml(const ExperimentConfig& cfg) {
  KnowledgeGraph kg = require_dataset(cfg);
  EmbeddingTable table = require_table(cfg);
  if (table.entity_count() != kg.entity_count() || table.relation_count() != kg.relation_count())
    throw ConfigError("--table does not match --dataset (entity/relation counts differ)");
  prepare_out(cfg);
  std::uint64_t seed = cfg.seeds.front();
  ExpertPathSet experts =
      generate_expert_paths(kg, cfg.max_length, cfg.expert_count, mix_seed(seed, 61));
  if (experts.paths.empty()) throw std::runtime_error("no expert paths found");
  GrmlResult grml = train(kg, experts, table, grml_config(cfg, cfg.max_length, mix_seed(seed, 62)));

  {
    std::ofstream out(fs::path(cfg.out_dir) / "policy.net");
    grml.policy.save(out);
  }
  {
    std::ofstream out(fs::path(cfg.out_dir) / "comparator.net");
    grml.comparator.save(out);
  }
  {
    std::ofstream out(fs::path(cfg.out_dir) / "experts.tsv");
    out << "#max_length=" << experts.max_length << " complete=" << (experts.complete ? 1 : 0)
        << "\n";
    for (const SemanticPath& p : experts.paths) {
      auto key = p.key();
      for (std::size_t i = 0; i < key.size(); ++i) out << (i ? " " : "") << key[i];
      out << "\n";
    }
  }
  {
    std::ofstream out(fs::path(cfg.out_dir) / "trainlog.csv");
    grml.log.to_csv(out);
  }
  write_manifest(cfg, "train-grml");
  std::cout << "trained policy for " << grml.log.records.size() << " iterations; converged="
            << (grml.log.converged ? "yes" : "no") << " final_d_js="
            << fmt_double(grml.log.records.empty() ? std::nan("")
                                                   : grml.log.records.back().d_js)
            << "\n";
  return 0;
}

int cmd_eval_accuracy(const ExperimentConfig& cfg) {
  KnowledgeGraph dataset = require_dataset(cfg);
  prepare_out(cfg);
  CsvTable table = run_accuracy_vs_length(cfg, dataset);
  write_csv(table, fs::path(cfg.out_dir) / "accuracy_vs_length.csv");
  write_manifest(cfg, "eval-accuracy");
  return 0;
}

int cmd_eval_ser(const ExperimentConfig& cfg) {
  KnowledgeGraph kg = require_dataset(cfg);
  EmbeddingTable table = require_table(cfg);
  std::optional<PolicyNetwork> policy;
  if (cfg.mode != "none") policy = require_policy(cfg);
  prepare_out(cfg);
  CsvTable out = run_ser_vs_snr(cfg, kg, table, policy ? &*policy : nullptr);
  write_csv(out, fs::path(cfg.out_dir) / "ser_vs_snr.csv");
  write_manifest(cfg, "eval-ser");
  return 0;
}

int cmd_sweep_dim(const ExperimentConfig& cfg) {
  KnowledgeGraph dataset = require_dataset(cfg);
  prepare_out(cfg);
  CsvTable out = run_dimension_sweep(cfg, dataset);
  write_csv(out, fs::path(cfg.out_dir) / "dimension_sweep.csv");
  write_manifest(cfg, "sweep-dim");
  return 0;
}

int cmd_sweep_experts(const ExperimentConfig& cfg) {
  KnowledgeGraph dataset = require_dataset(cfg);
  prepare_out(cfg);
  CsvTable out = run_expert_count_sweep(cfg, dataset);
  write_csv(out, fs::path(cfg.out_dir) / "expert_count.csv");
  write_manifest(cfg, "sweep-experts");
  return 0;
}

int cmd_timing(const ExperimentConfig& cfg) {
  KnowledgeGraph dataset = require_dataset(cfg);
  prepare_out(cfg);
  CsvTable out = run_encoder_timing(cfg, dataset);
  write_csv(out, fs::path(cfg.out_dir) / "timing.csv");
  write_manifest(cfg, "timing");
  return 0;
}

void add_common_options(CLI::App* cmd, ExperimentConfig& cfg, std::string& snr_list,
                        std::string& dims, std::string& seeds, std::string& lengths,
                        std::string& expert_counts, std::string& timing_ks,
                        std::string& channel, std::string& packing) {
  cmd->add_option("--dataset", cfg.dataset, "triple TSV file (head<TAB>relation<TAB>tail)");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--seed", seeds, "comma list of seeds");
  cmd->add_option("--config", "flat key = value config file (parsed first)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--budget", cfg.skg_budget, "SKG entity budget");
  cmd->add_option("--n", cfg.n, "entity constellation dimension");
  cmd->add_option("--n-prime", cfg.n_prime, "relation constellation dimension");
  cmd->add_option("--margin", cfg.margin, "encoder margin d");
  cmd->add_option("--epochs", cfg.encoder_epochs, "encoder training epochs");
  cmd->add_option("--iterations", cfg.grml_iterations, "training iterations");
  cmd->add_option("--rollouts", cfg.grml_rollouts, "rollouts per iteration");
  cmd->add_option("--experts", cfg.expert_count, "expert path count");
  cmd->add_option("--max-length", cfg.max_length, "max reasoning path length L");
  cmd->add_option("--snr-list", snr_list, "comma list of SNR points (dB)");
  cmd->add_option("--dims", dims, "comma list of constellation dimensions");
  cmd->add_option("--lengths", lengths, "comma list of L values for eval-accuracy");
  cmd->add_option("--expert-counts", expert_counts, "comma list for sweep-experts");
  cmd->add_option("--timing-ks", timing_ks, "comma list of triple counts for timing");
  cmd->add_option("--timing-epochs", cfg.timing_epochs, "epochs per timing run");
  cmd->add_option("--channel", channel, "awgn|rayleigh")
      ->check(CLI::IsMember({"awgn", "rayleigh"}));
  cmd->add_option("--mode", cfg.mode, "hard|soft|none|all")
      ->check(CLI::IsMember({"hard", "soft", "none", "all"}));
  cmd->add_option("--packing", packing, "real|complex")
      ->check(CLI::IsMember({"real", "complex"}));
  cmd->add_option("--symbols", cfg.ser_symbols, "entity symbols per SER row");
  cmd->add_option("--top-p", cfg.top_p, "policy mass for constrained recovery");
  cmd->add_option("--eval-samples", cfg.eval_samples, "rollouts per accuracy estimate");
  cmd->add_option("--table", cfg.table_file, "trained embedding table file");
  cmd->add_option("--policy", cfg.policy_file, "trained policy network file");
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> argv_storage;
  argv_storage.push_back("semcom");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : argv_storage) argv.push_back(s.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

int cli_main(int argc, const char* const* argv) {
  ExperimentConfig cfg;
  // --config is applied before the remaining flags so they can override it.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        cfg = ExperimentConfig::load_file(argv[i + 1]);
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
    }
  }

  CLI::App app{"desk-scale semantic communication simulator"};
  app.require_subcommand(0, 1);
  std::string snr_list, dims, seeds, lengths, expert_counts, timing_ks, channel, packing;

  const char* names[] = {"train-encoder", "train-grml", "eval-accuracy", "eval-ser",
                         "sweep-dim",     "sweep-experts", "timing"};
  const char* descs[] = {
      "sample an SKG and train the projection table",
      "train the reasoning policy and comparator by adversarial imitation",
      "interpretation accuracy vs max path length",
      "symbol error rate vs SNR under hard/soft/none interpretation",
      "recovery accuracy vs constellation dimension",
      "convergence vs number of expert paths",
      "encoder training time vs triple count"};
  std::map<std::string, CLI::App*> cmds;
  for (int i = 0; i < 7; ++i) {
    CLI::App* cmd = app.add_subcommand(names[i], descs[i]);
    add_common_options(cmd, cfg, snr_list, dims, seeds, lengths, expert_counts, timing_ks,
                       channel, packing);
    cmds[names[i]] = cmd;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!seeds.empty()) cfg.seeds = parse_list<std::uint64_t>(seeds);
    if (!snr_list.empty()) cfg.snr_sweep = parse_list<double>(snr_list);
    if (!dims.empty()) cfg.dim_sweep = parse_list<int>(dims);
    if (!lengths.empty()) cfg.length_sweep = parse_list<int>(lengths);
    if (!expert_counts.empty()) cfg.expert_count_sweep = parse_list<int>(expert_counts);
    if (!timing_ks.empty()) cfg.timing_k = parse_list<int>(timing_ks);
    if (!channel.empty()) cfg.channel = channel_model_from_string(channel);
    if (!packing.empty()) cfg.packing = packing_from_string(packing);
    if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");

    std::string which;
    for (const auto& [name, cmd] : cmds)
      if (cmd->parsed()) which = name;
    if (which.empty()) {
      std::cout << app.help();
      return 0;
    }
    if (which == "train-encoder") return cmd_train_encoder(cfg);
    if (which == "train-grml") return cmd_train_grml(cfg);
    if (which == "eval-accuracy") return cmd_eval_accuracy(cfg);
    if (which == "eval-ser") return cmd_eval_ser(cfg);
    if (which == "sweep-dim") return cmd_sweep_dim(cfg);
    if (which == "sweep-experts") return cmd_sweep_experts(cfg);
    return cmd_timing(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace semcom
