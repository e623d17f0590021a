#pragma once

#include <iosfwd>
#include <functional>
#include <map>
#include <string>

#include "semcom/channel.hpp"
#include "semcom/decode.hpp"
#include "semcom/grml.hpp"

namespace semcom {

// Configuration problems (bad flags, missing files) exit with code 2;
// runtime failures exit with code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EvalMode { Hard, Soft, None };
const char* to_string(EvalMode m);
EvalMode eval_mode_from_string(const std::string& s);

struct ExperimentConfig {
  std::string dataset;
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int skg_budget = 200;

  int n = 50;
  int n_prime = 50;
  double margin = 1.0;
  Packing packing = Packing::Real;  // real -> l1 distances, complex -> l2
  int encoder_epochs = 400;
  int encoder_batch = 128;
  double encoder_lr = 0.01;

  ChannelConfig::Model channel = ChannelConfig::Model::Awgn;
  std::string mode = "all";  // hard|soft|none|all (eval-ser rows)

  int max_length = 3;
  int expert_count = 50;
  int grml_iterations = 200;
  int grml_rollouts = 256;
  double policy_lr = 0.05;
  double comparator_lr = 0.05;
  double baseline_decay = 0.9;
  int policy_hidden = 64;
  int comparator_hidden = 64;
  double early_stop_djs = 0.02;
  int early_stop_patience = 20;

  std::vector<int> length_sweep = {1, 2, 3, 4, 5};
  std::vector<double> snr_sweep = {0, 2, 4, 6, 8, 10, 12};
  // wide enough to show the saturation plateau past the per-channel optimum
  std::vector<int> dim_sweep = {2, 8, 16, 32, 64, 96};
  std::vector<int> expert_count_sweep = {5, 10, 20, 50};

  int ser_symbols = 10000;
  double ser_dim_snr_db = 7.0;  // SNR for the dimension sweep accuracy
  double top_p = 0.95;
  int eval_samples = 2000;

  std::vector<int> timing_k = {50, 100, 200, 400};
  int timing_epochs = 2000;
  int timing_repeats = 3;

  // Artifact paths consumed by eval subcommands.
  std::string table_file;
  std::string policy_file;

  Norm norm() const { return packing == Packing::Real ? Norm::L1 : Norm::L2; }

  std::map<std::string, std::string> to_kv() const;
  static ExperimentConfig from_kv(const std::map<std::string, std::string>& kv);
  // Flat `key = value` text, '#' comments skipped.
  static ExperimentConfig load_file(const std::string& path);
  void save_file(const std::string& path) const;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> trailers;  // '#'-prefixed comment lines after data

  void write(std::ostream& out) const;
  static CsvTable read(std::istream& in);
};

// One row per (L, metric): dataset,L,metric,mean_accuracy,std_accuracy.
// Per-cell training failures are recorded as nan and the run continues.
CsvTable run_accuracy_vs_length(const ExperimentConfig& cfg, const KnowledgeGraph& dataset);

// Draws `count` expert paths from the working graph with the given seed.
using ExpertSampler =
    std::function<ExpertPathSet(const KnowledgeGraph&, int count, std::uint64_t seed)>;

// One row per expert count: expert_count,final_d_js,iterations_to_converge,converged.
// The sampler defaults to the two-sided BFS generator; callers with a known
// generating mechanism can substitute their own.
CsvTable run_expert_count_sweep(const ExperimentConfig& cfg, const KnowledgeGraph& dataset,
                                const ExpertSampler& sampler = {});

// One row per (snr, mode): snr_db,mode,channel,dimension,ser. The same noisy
// records are decoded under every mode. Policy may be null when only mode
// `none` is requested.
CsvTable run_ser_vs_snr(const ExperimentConfig& cfg, const KnowledgeGraph& skg,
                        const EmbeddingTable& table, const PolicyNetwork* policy);

// One row per (dimension, channel): dimension,channel,accuracy. Trailer
// comments carry the per-channel best dimension and trend flags.
CsvTable run_dimension_sweep(const ExperimentConfig& cfg, const KnowledgeGraph& dataset);

// One row per K: K,n,seconds, with the linear-fit R^2 as a trailer comment.
CsvTable run_encoder_timing(const ExperimentConfig& cfg, const KnowledgeGraph& dataset);

// Subcommands: train-encoder, train-grml, eval-accuracy, eval-ser,
// sweep-dim, sweep-experts, timing. Returns 0 on success, 2 on config
// errors, 1 on runtime failure.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);  // without argv[0]

// Deterministic stream splitting for sub-experiments.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace semcom
