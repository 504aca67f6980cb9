#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "momentprop/config.hpp"
#include "momentprop/dataset.hpp"
#include "momentprop/network.hpp"
#include "momentprop/rng.hpp"
#include "momentprop/trainer.hpp"
#include "momentprop/types.hpp"

namespace momentprop {

// Experiment protocol for one UCI-style dataset: random train/test splits,
// a grid search over (p_star, tau) by validation NLL, then test RMSE, NLL,
// and runtime for the MC and moment-propagation arms.
struct BenchConfig {
  std::string dataset_name = "dataset";
  std::string data_path;
  int n_splits = 20;
  double train_fraction = 0.9;
  double val_fraction = 0.2;  // of the training split, for the grid search
  Index hidden_width = 50;
  std::vector<double> dropout_grid = {0.005, 0.01, 0.05, 0.1};
  std::vector<double> tau_grid = {0.025, 0.05, 0.075, 0.1, 0.25, 0.5, 0.75, 1.0, 2.5, 5.0, 10.0};
  Index T_mc = 10000;
  int epochs_base = 40;
  int epochs_multiplier = 10;
  int batch_size = 128;
  double learning_rate = 1e-3;
  TrainConfig::Optimizer optimizer = TrainConfig::Optimizer::kAdam;
  bool input_dropout = false;
  std::uint64_t seed = 1;
  int threads = 1;
  // grid-search selection arm: "mp" (single-pass, deterministic) or "mc"
  std::string grid_metric = "mp";
  Index T_grid = 1000;  // ensemble size when grid_metric == "mc"
  CsvFormat csv;
  std::string out_dir;
  std::string save_nets_dir;

  void validate() const;
  static BenchConfig from_config(const KeyValueConfig& cfg);
  TrainConfig trainer(std::uint64_t train_seed, int epochs) const;
};

struct GridChoice {
  double p_star = 0.0;
  double tau = 1.0;
  double val_nll = 0.0;  // standardized scale
};

// Inner train/validation split; returns the grid pair minimizing the
// validation NLL, first-in-grid-order on ties. Singleton grids return
// immediately without training.
GridChoice grid_search(const Dataset& train, const BenchConfig& cfg, RngStream stream);

// Dropout regression net: Dense(q -> hidden) ReLU Dropout(p) Dense(hidden -> 1),
// optionally with input dropout in front; hidden may repeat for deeper nets.
std::vector<LayerSpec> make_mlp_spec(Index in_dim, const std::vector<Index>& hidden, double p_star,
                                     bool input_dropout);

// Wall-clock seconds for whole-test-set prediction: T_mc stochastic passes
// for the MC arm against one moment pass, single-threaded, after one untimed
// warmup pass each. Columns of X are test points (standardized scale).
std::pair<double, double> time_inference(const Network<double>& net, const MatrixXd& X, Index T_mc,
                                         RngStream stream);

struct SplitMetrics {
  int split = -1;
  double p_star = 0.0;
  double tau = 0.0;
  double rmse_mc = 0.0, rmse_mp = 0.0;
  double nll_mc = 0.0, nll_mp = 0.0;
  double rt_mc = 0.0, rt_mp = 0.0;
  bool failed = false;
  std::string note;
};

struct Stat {
  double mean = 0.0;
  double se = 0.0;
};

Stat aggregate(const std::vector<double>& values);

struct ResultRow {
  std::string dataset;
  Index n = 0, q = 0;
  Stat rmse_mc, rmse_mp, nll_mc, nll_mp, rt_mc, rt_mp;
  int splits_ok = 0;
  int splits_failed = 0;
};

struct BenchOutcome {
  ResultRow row;
  std::vector<SplitMetrics> splits;
};

// Full protocol over all splits; writes <dataset>_splits.csv and
// <dataset>_result.csv into cfg.out_dir when set. Failed splits (non-finite
// training loss) are skipped and flagged, never silently dropped.
BenchOutcome run_uci_benchmark(const BenchConfig& cfg);

std::string format_result_table(const ResultRow& row);

// Toy experiment: 1-d regression on x sin x, trained on [-3, 19], compared
// on a wider grid.
struct ToyConfig {
  Index n_train = 1024;
  double noise_sd = 1.0;
  double x_lo = -3.0;
  double x_hi = 19.0;
  double grid_lo = -10.0;
  double grid_hi = 30.0;
  double grid_step = 0.25;
  Index hidden = 256;
  int depth = 3;
  double p_star = 0.3;
  Index T = 30;
  int epochs = 1500;
  int batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::string out_csv;
  std::string save_net_path;

  static ToyConfig from_config(const KeyValueConfig& cfg);
};

double toy_function(double x);

// x uniform on [x_lo, x_hi], y = x sin x plus Gaussian noise; seedable.
Dataset generate_toy(const ToyConfig& cfg);

struct ToyCurves {
  VectorXd x;
  VectorXd e_mc, sd_mc;
  VectorXd e_mp, sd_mp;
  VectorXd dnn_mu;
  double train_y_lo = 0.0, train_y_hi = 0.0;  // target dynamic range seen in training
};

ToyCurves run_toy_experiment(const ToyConfig& cfg);

}  // namespace momentprop
