#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "semcom/experiments.hpp"
#include "support.hpp"

using namespace semcom;
using namespace semcom::test;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("semcom_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_benchmark_tsv(const fs::path& dir) {
  KnowledgeGraph g = benchmark_skg();
  fs::path path = dir / "skg.tsv";
  std::ofstream out(path);
  g.serialize(out);
  return path.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_cfg(const std::string& dataset, const std::string& out) {
  ExperimentConfig cfg;
  cfg.dataset = dataset;
  cfg.out_dir = out;
  cfg.seeds = {1};
  cfg.skg_budget = 60;
  cfg.n = cfg.n_prime = 8;
  cfg.encoder_epochs = 80;
  cfg.expert_count = 30;
  cfg.grml_iterations = 25;
  cfg.grml_rollouts = 64;
  cfg.eval_samples = 300;
  cfg.ser_symbols = 1200;
  return cfg;
}

}  // namespace

TEST_CASE("config round-trips through kv and file form") {
  ExperimentConfig cfg;
  cfg.dataset = "data/foo.tsv";
  cfg.seeds = {4, 5};
  cfg.snr_sweep = {0, 3.5, 12};
  cfg.packing = Packing::Complex;
  cfg.channel = ChannelConfig::Model::Rayleigh;
  cfg.mode = "soft";
  cfg.top_p = 0.9;

  ExperimentConfig back = ExperimentConfig::from_kv(cfg.to_kv());
  CHECK(back.dataset == cfg.dataset);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.snr_sweep == cfg.snr_sweep);
  CHECK(back.packing == cfg.packing);
  CHECK(back.channel == cfg.channel);
  CHECK(back.mode == cfg.mode);
  CHECK(back.top_p == cfg.top_p);

  fs::path dir = fresh_dir("config");
  cfg.save_file((dir / "config.txt").string());
  ExperimentConfig loaded = ExperimentConfig::load_file((dir / "config.txt").string());
  CHECK(loaded.to_kv() == cfg.to_kv());

  std::ofstream bad(dir / "bad.txt");
  bad << "this is not a key value line\n";
  bad.close();
  CHECK_THROWS_AS(ExperimentConfig::load_file((dir / "bad.txt").string()), ConfigError);
}

TEST_CASE("csv tables round-trip with trailers") {
  CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"1", "2"}, {"3", "4"}};
  t.trailers = {"note=1"};
  std::ostringstream out;
  t.write(out);
  std::istringstream in(out.str());
  CsvTable back = CsvTable::read(in);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.trailers == t.trailers);
}

TEST_CASE("run_accuracy_vs_length: chain sweep and schema shape") {
  fs::path dir = fresh_dir("acc");
  KnowledgeGraph chain = chain_graph();
  ExperimentConfig cfg;
  cfg.dataset = "chain.tsv";
  cfg.seeds = {1, 2};
  cfg.skg_budget = 1000;  // use the dataset as-is
  cfg.n = cfg.n_prime = 6;
  cfg.encoder_epochs = 60;
  cfg.expert_count = 6;
  cfg.grml_iterations = 40;
  cfg.grml_rollouts = 64;
  cfg.eval_samples = 200;
  cfg.length_sweep = {1};

  CsvTable table = run_accuracy_vs_length(cfg, chain);
  CHECK(table.header ==
        std::vector<std::string>{"dataset", "L", "metric", "mean_accuracy", "std_accuracy"});
  REQUIRE(table.rows.size() == 2);  // one length x two metrics
  for (const auto& row : table.rows) {
    CHECK(row[0] == "chain");
    CHECK(row[1] == "1");
    // on a single-relation chain every rollout of length 1 is an expert edge
    CHECK(std::stod(row[3]) == doctest::Approx(1.0));
  }
}

TEST_CASE("run_accuracy_vs_length: accuracy trend non-increasing in L on the benchmark") {
  fs::path dir = fresh_dir("acctrend");
  KnowledgeGraph skg = benchmark_skg();
  ExperimentConfig cfg = small_cfg("bench.tsv", (dir / "out").string());
  cfg.skg_budget = 1000;  // already desk-scale
  cfg.length_sweep = {1, 3};
  cfg.grml_iterations = 40;
  CsvTable table = run_accuracy_vs_length(cfg, skg);
  REQUIRE(table.rows.size() == 4);
  double acc_l1 = std::stod(table.rows[0][3]);
  double acc_l3 = std::stod(table.rows[2][3]);
  CHECK(table.rows[0][2] == "exact_match");
  CHECK(table.rows[2][2] == "exact_match");
  CHECK(acc_l3 <= acc_l1 + 0.02);
}

TEST_CASE("run_expert_count_sweep: fork benchmark separates 5 from 50") {
  KnowledgeGraph fork = fork_graph();
  ExperimentConfig cfg;
  cfg.dataset = "fork.tsv";
  cfg.seeds = {3};
  cfg.skg_budget = 1000;
  cfg.n = cfg.n_prime = 8;
  cfg.encoder_epochs = 150;
  cfg.grml_iterations = 250;
  cfg.grml_rollouts = 384;
  cfg.expert_count_sweep = {5, 50};

  // Experts drawn from the known generating mechanism of the fork benchmark.
  auto sampler = [](const KnowledgeGraph& g, int count, std::uint64_t seed) {
    return fork_experts(g, count, seed);
  };
  CsvTable table = run_expert_count_sweep(cfg, fork, sampler);
  CHECK(table.header == std::vector<std::string>{"expert_count", "final_d_js",
                                                 "iterations_to_converge", "converged"});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0][0] == "5");
  CHECK(table.rows[0][3] == "0");  // few experts cannot converge here
  CHECK(table.rows[1][0] == "50");
  CHECK(table.rows[1][3] == "1");
  CHECK(std::stod(table.rows[1][1]) < std::stod(table.rows[0][1]));
}

TEST_CASE("run_ser_vs_snr: exact zero at sigma=0, monotone, reasoning helps") {
  KnowledgeGraph skg = benchmark_skg();
  ExperimentConfig cfg = small_cfg("bench.tsv", "unused");
  cfg.skg_budget = 1000;
  cfg.n = cfg.n_prime = 16;
  cfg.encoder_epochs = 250;
  cfg.grml_iterations = 40;
  cfg.ser_symbols = 2500;
  cfg.snr_sweep = {0, 6, 12, 4000};  // the last point has sigma == 0 exactly

  EncoderConfig ec;
  ec.n = ec.n_prime = cfg.n;
  ec.epochs = cfg.encoder_epochs;
  ec.seed = 2;
  EmbeddingTable table = train_encoder(skg, ec).table;
  REQUIRE(snr_to_sigma(4000, measure_signal_power(table)) == 0.0);

  ExpertPathSet experts = generate_expert_paths(skg, 3, 100, 4);
  TrainConfig tc;
  tc.iterations = cfg.grml_iterations;
  tc.rollouts_per_iter = 128;
  tc.policy_lr = 0.05;
  tc.comparator_lr = 0.05;
  tc.seed = 5;
  GrmlResult grml = train(skg, experts, table, tc);

  CsvTable ser = run_ser_vs_snr(cfg, skg, table, &grml.policy);
  CHECK(ser.header ==
        std::vector<std::string>{"snr_db", "mode", "channel", "dimension", "ser"});
  REQUIRE(ser.rows.size() == 4 * 3);

  std::map<std::string, std::map<double, double>> by_mode;
  for (const auto& row : ser.rows) by_mode[row[1]][std::stod(row[0])] = std::stod(row[4]);
  // sigma = 0 row decodes perfectly in every mode
  for (const auto& [mode, curve] : by_mode) CHECK(curve.at(4000) == 0.0);
  // monotone non-increasing within 1 pp slack
  for (const auto& [mode, curve] : by_mode) {
    double prev = 2.0;
    for (const auto& [snr, v] : curve) {
      CHECK(v <= prev + 0.01);
      prev = v;
    }
  }
  // reasoning-aided hard decoding beats plain nearest-neighbor at low SNR
  CHECK(by_mode["hard"].at(0) < by_mode["none"].at(0));
  CHECK(by_mode["hard"].at(6) < by_mode["none"].at(6));
}

TEST_CASE("run_ser_vs_snr: reasoning modes require a policy") {
  KnowledgeGraph skg = benchmark_skg();
  ExperimentConfig cfg = small_cfg("bench.tsv", "unused");
  EncoderConfig ec;
  ec.n = ec.n_prime = 8;
  ec.epochs = 30;
  EmbeddingTable table = train_encoder(skg, ec).table;
  cfg.mode = "hard";
  CHECK_THROWS_AS(run_ser_vs_snr(cfg, skg, table, nullptr), std::invalid_argument);
  cfg.mode = "none";
  cfg.snr_sweep = {8};
  cfg.ser_symbols = 500;
  CsvTable t = run_ser_vs_snr(cfg, skg, table, nullptr);
  CHECK(t.rows.size() == 1);
  CHECK(t.rows[0][1] == "none");
}

TEST_CASE("run_dimension_sweep: shape, best-dimension trailers") {
  KnowledgeGraph skg = benchmark_skg();
  ExperimentConfig cfg = small_cfg("bench.tsv", "unused");
  cfg.skg_budget = 50;
  cfg.dim_sweep = {2};
  cfg.encoder_epochs = 50;
  cfg.grml_iterations = 10;
  cfg.grml_rollouts = 32;
  cfg.ser_symbols = 400;
  CsvTable t = run_dimension_sweep(cfg, skg);
  CHECK(t.header == std::vector<std::string>{"dimension", "channel", "accuracy"});
  REQUIRE(t.rows.size() == 2);  // one dimension x two channels
  bool best_awgn = false, best_rayleigh = false;
  for (const std::string& tr : t.trailers) {
    if (tr.rfind("best_dim_awgn=", 0) == 0) best_awgn = true;
    if (tr.rfind("best_dim_rayleigh=", 0) == 0) best_rayleigh = true;
  }
  CHECK(best_awgn);
  CHECK(best_rayleigh);
}

TEST_CASE("run_encoder_timing: shape, doubling band, fit quality") {
  KnowledgeGraph base = make_synthetic_graph(SyntheticGraphConfig{});
  ExperimentConfig cfg = small_cfg("bench.tsv", "unused");
  cfg.timing_k = {50, 100, 200, 400};
  cfg.timing_epochs = 1500;
  cfg.timing_repeats = 3;
  CsvTable t = run_encoder_timing(cfg, base);
  CHECK(t.header == std::vector<std::string>{"K", "n", "seconds"});
  REQUIRE(t.rows.size() == 4);

  std::vector<double> secs;
  for (const auto& row : t.rows) secs.push_back(std::stod(row[2]));
  for (std::size_t i = 1; i < secs.size(); ++i) {
    double ratio = secs[i] / secs[i - 1];
    CHECK(ratio > 1.4);
    CHECK(ratio < 2.8);
  }
  double r2 = -1;
  for (const std::string& tr : t.trailers)
    if (tr.rfind("r2=", 0) == 0) r2 = std::stod(tr.substr(3));
  CHECK(r2 >= 0.95);
}

TEST_CASE("cli: help, unknown flags, missing dataset") {
  CHECK(cli_main({"--help"}) == 0);
  CHECK(cli_main({"eval-ser", "--definitely-not-a-flag"}) == 2);
  CHECK(cli_main({"timing"}) == 2);  // no --dataset
  CHECK(cli_main({"timing", "--dataset", "/nonexistent/file.tsv"}) == 2);
}

TEST_CASE("cli: train-encoder -> train-grml -> eval-ser pipeline") {
  fs::path dir = fresh_dir("pipeline");
  std::string dataset = write_benchmark_tsv(dir);

  std::string enc_out = (dir / "enc").string();
  int rc = cli_main({"train-encoder", "--dataset", dataset, "--out", enc_out, "--seed", "1",
                     "--budget", "60", "--n", "8", "--epochs", "80"});
  REQUIRE(rc == 0);
  CHECK(fs::exists(fs::path(enc_out) / "skg.tsv"));
  CHECK(fs::exists(fs::path(enc_out) / "encoder.table"));
  CHECK(fs::exists(fs::path(enc_out) / "encoder_loss.csv"));
  CHECK(fs::exists(fs::path(enc_out) / "manifest.json"));
  CHECK(fs::exists(fs::path(enc_out) / "config.txt"));

  std::string grml_out = (dir / "grml").string();
  rc = cli_main({"train-grml", "--dataset", enc_out + "/skg.tsv", "--table",
                 enc_out + "/encoder.table", "--out", grml_out, "--seed", "1", "--experts",
                 "30", "--iterations", "25", "--rollouts", "64"});
  REQUIRE(rc == 0);
  CHECK(fs::exists(fs::path(grml_out) / "policy.net"));
  CHECK(fs::exists(fs::path(grml_out) / "comparator.net"));
  CHECK(fs::exists(fs::path(grml_out) / "trainlog.csv"));
  CHECK(fs::exists(fs::path(grml_out) / "experts.tsv"));

  std::string ser_out = (dir / "ser").string();
  rc = cli_main({"eval-ser", "--dataset", enc_out + "/skg.tsv", "--table",
                 enc_out + "/encoder.table", "--policy", grml_out + "/policy.net", "--out",
                 ser_out, "--seed", "1", "--snr-list", "0,8", "--symbols", "800"});
  REQUIRE(rc == 0);
  CHECK(fs::exists(fs::path(ser_out) / "ser_vs_snr.csv"));

  // trainlog schema
  std::ifstream log(fs::path(grml_out) / "trainlog.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "iter,comp_loss,interp_loss,gamma,d_js,accuracy,seconds");
}

TEST_CASE("cli: rerun from the emitted config reproduces result CSVs byte for byte") {
  fs::path dir = fresh_dir("repro");
  std::string dataset = write_benchmark_tsv(dir);
  std::string enc_out = (dir / "enc").string();
  REQUIRE(cli_main({"train-encoder", "--dataset", dataset, "--out", enc_out, "--seed", "3",
                    "--budget", "50", "--n", "8", "--epochs", "60"}) == 0);

  std::string a = (dir / "a").string(), b = (dir / "b").string();
  std::vector<std::string> run{"eval-ser", "--dataset", enc_out + "/skg.tsv", "--table",
                               enc_out + "/encoder.table", "--out", a, "--seed", "3",
                               "--snr-list", "4,10", "--symbols", "600", "--mode", "none"};
  REQUIRE(cli_main(run) == 0);
  REQUIRE(cli_main({"eval-ser", "--config", a + "/config.txt", "--out", b}) == 0);
  CHECK(slurp(fs::path(a) / "ser_vs_snr.csv") == slurp(fs::path(b) / "ser_vs_snr.csv"));
  CHECK(slurp(fs::path(a) / "ser_vs_snr.csv").size() > 0);
}

TEST_CASE("experiments never mutate the dataset file") {
  fs::path dir = fresh_dir("nomut");
  std::string dataset = write_benchmark_tsv(dir);
  std::string before = slurp(dataset);
  REQUIRE(cli_main({"timing", "--dataset", dataset, "--out", (dir / "t").string(),
                    "--timing-ks", "30,60", "--timing-epochs", "40"}) == 0);
  CHECK(slurp(dataset) == before);
}

TEST_CASE("run_accuracy_vs_length records cell failures and continues") {
  // single self-loop: no usable expert paths, every cell fails
  KnowledgeGraph g = graph_from_tsv("a\tr\ta\n");
  ExperimentConfig cfg;
  cfg.dataset = "loop.tsv";
  cfg.seeds = {1};
  cfg.skg_budget = 10;
  cfg.n = cfg.n_prime = 4;
  cfg.encoder_epochs = 5;
  cfg.length_sweep = {1};
  CsvTable t = run_accuracy_vs_length(cfg, g);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][3] == "nan");
  REQUIRE_FALSE(t.trailers.empty());
  CHECK(t.trailers[0].rfind("cell_failure", 0) == 0);
}

TEST_CASE("run_dimension_sweep reports the cross-channel best-dimension flag") {
  KnowledgeGraph skg = benchmark_skg();
  ExperimentConfig cfg = small_cfg("bench.tsv", "unused");
  cfg.skg_budget = 40;
  cfg.dim_sweep = {2, 4};
  cfg.encoder_epochs = 40;
  cfg.grml_iterations = 8;
  cfg.grml_rollouts = 32;
  cfg.ser_symbols = 300;
  CsvTable t = run_dimension_sweep(cfg, skg);
  bool flag = false;
  for (const std::string& tr : t.trailers)
    if (tr.rfind("rayleigh_best_ge_awgn_best=", 0) == 0) flag = true;
  CHECK(flag);
}

TEST_CASE("cli: complex packing flows through encoder and SER evaluation") {
  fs::path dir = fresh_dir("complex");
  std::string dataset = write_benchmark_tsv(dir);
  std::string enc = (dir / "enc").string();
  REQUIRE(cli_main({"train-encoder", "--dataset", dataset, "--out", enc, "--seed", "2",
                    "--budget", "50", "--n", "8", "--epochs", "60", "--packing",
                    "complex"}) == 0);
  std::ifstream table_in(fs::path(enc) / "encoder.table");
  EmbeddingTable table = EmbeddingTable::load(table_in);
  CHECK(table.norm == Norm::L2);  // complex packing pairs with l2 distances

  std::string ser = (dir / "ser").string();
  REQUIRE(cli_main({"eval-ser", "--dataset", enc + "/skg.tsv", "--table",
                    enc + "/encoder.table", "--out", ser, "--seed", "2", "--snr-list", "6",
                    "--symbols", "400", "--mode", "none", "--packing", "complex", "--channel",
                    "rayleigh"}) == 0);
  std::ifstream csv(fs::path(ser) / "ser_vs_snr.csv");
  CsvTable t = CsvTable::read(csv);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][2] == "rayleigh");
  double v = std::stod(t.rows[0][4]);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0);
}
