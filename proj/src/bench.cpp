#include "momentprop/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "momentprop/mc.hpp"
#include "momentprop/moments.hpp"
#include "momentprop/predictive.hpp"

namespace momentprop {

namespace {

constexpr std::uint64_t kPermKey = 0;
constexpr std::uint64_t kGridKey = 1;
constexpr std::uint64_t kBuildKey = 2;
constexpr std::uint64_t kTrainKey = 3;
constexpr std::uint64_t kEvalKey = 4;
constexpr std::uint64_t kTimingKey = 5;

std::vector<Index> shuffled_indices(Index n, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// Online log-sum-exp so the MC arm never has to store all T runs.
struct StreamingLse {
  double m = -std::numeric_limits<double>::infinity();
  double s = 0.0;

  void add(double e) {
    if (e <= m) {
      s += std::exp(e - m);
    } else {
      s = s * std::exp(m - e) + 1.0;
      m = e;
    }
  }
  double value() const { return m + std::log(s); }
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace

void BenchConfig::validate() const {
  if (data_path.empty()) throw std::invalid_argument("bench config: data path not set");
  if (n_splits < 1) throw std::invalid_argument("bench config: n_splits must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("bench config: train_fraction must lie in (0, 1)");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("bench config: val_fraction must lie in (0, 1)");
  }
  if (hidden_width < 1) throw std::invalid_argument("bench config: hidden width must be positive");
  if (dropout_grid.empty() || tau_grid.empty()) throw std::invalid_argument("bench config: grids must be non-empty");
  for (double p : dropout_grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bench config: dropout grid entry out of [0, 1]");
  }
  for (double t : tau_grid) {
    if (!(t > 0.0)) throw std::invalid_argument("bench config: tau grid entries must be positive");
  }
  if (T_mc < 2) throw std::invalid_argument("bench config: T_mc must be >= 2");
  if (epochs_base < 1 || epochs_multiplier < 1) throw std::invalid_argument("bench config: epochs must be >= 1");
  if (threads < 1) throw std::invalid_argument("bench config: threads must be >= 1");
  if (grid_metric != "mp" && grid_metric != "mc") {
    throw std::invalid_argument("bench config: grid_metric must be 'mp' or 'mc'");
  }
  if (grid_metric == "mc" && T_grid < 2) throw std::invalid_argument("bench config: T_grid must be >= 2");
}

BenchConfig BenchConfig::from_config(const KeyValueConfig& cfg) {
  BenchConfig b;
  b.dataset_name = cfg.get_string("dataset", b.dataset_name);
  b.data_path = cfg.get_string("data", b.data_path);
  b.n_splits = static_cast<int>(cfg.get_int("n_splits", b.n_splits));
  b.train_fraction = cfg.get_real("train_fraction", b.train_fraction);
  b.val_fraction = cfg.get_real("val_fraction", b.val_fraction);
  b.hidden_width = cfg.get_int("hidden", b.hidden_width);
  b.dropout_grid = cfg.get_real_list("dropout_grid", b.dropout_grid);
  b.tau_grid = cfg.get_real_list("tau_grid", b.tau_grid);
  b.T_mc = cfg.get_int("T_mc", b.T_mc);
  b.epochs_base = static_cast<int>(cfg.get_int("epochs_base", b.epochs_base));
  b.epochs_multiplier = static_cast<int>(cfg.get_int("epochs_multiplier", b.epochs_multiplier));
  b.batch_size = static_cast<int>(cfg.get_int("batch_size", b.batch_size));
  b.learning_rate = cfg.get_real("learning_rate", b.learning_rate);
  const std::string opt = cfg.get_string("optimizer", "adam");
  if (opt == "adam") {
    b.optimizer = TrainConfig::Optimizer::kAdam;
  } else if (opt == "sgd") {
    b.optimizer = TrainConfig::Optimizer::kSgd;
  } else {
    throw std::runtime_error("bench config: unknown optimizer '" + opt + "'");
  }
  b.input_dropout = cfg.get_bool("input_dropout", b.input_dropout);
  b.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(b.seed)));
  b.threads = static_cast<int>(cfg.get_int("threads", b.threads));
  b.grid_metric = cfg.get_string("grid_metric", b.grid_metric);
  b.T_grid = cfg.get_int("T_grid", b.T_grid);
  b.csv = CsvFormat::from_config(cfg);
  b.out_dir = cfg.get_string("out_dir", b.out_dir);
  return b;
}

TrainConfig BenchConfig::trainer(std::uint64_t train_seed, int epochs) const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.optimizer = optimizer;
  t.seed = train_seed;
  return t;
}

std::vector<LayerSpec> make_mlp_spec(Index in_dim, const std::vector<Index>& hidden, double p_star,
                                     bool input_dropout) {
  if (hidden.empty()) throw std::invalid_argument("make_mlp_spec: need at least one hidden layer");
  std::vector<LayerSpec> specs;
  if (input_dropout) specs.push_back(LayerSpec::dropout(p_star));
  Index width = in_dim;
  for (Index h : hidden) {
    specs.push_back(LayerSpec::dense(width, h));
    specs.push_back(LayerSpec::relu());
    specs.push_back(LayerSpec::dropout(p_star));
    width = h;
  }
  specs.push_back(LayerSpec::dense(width, 1));
  return specs;
}

Stat aggregate(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

GridChoice grid_search(const Dataset& train, const BenchConfig& cfg, RngStream stream) {
  cfg.validate();
  train.check_invariants();
  if (cfg.dropout_grid.size() == 1 && cfg.tau_grid.size() == 1) {
    return GridChoice{cfg.dropout_grid.front(), cfg.tau_grid.front(), 0.0};
  }

  const Index n = train.n();
  Rng perm_rng(stream.sub(kPermKey));
  const auto perm = shuffled_indices(n, perm_rng);
  const Index n_sub = static_cast<Index>(static_cast<double>(n) * (1.0 - cfg.val_fraction));
  if (n_sub < 2 || n_sub >= n) throw std::invalid_argument("grid_search: validation split is degenerate");
  std::vector<Index> sub_idx(perm.begin(), perm.begin() + n_sub);
  std::vector<Index> val_idx(perm.begin() + n_sub, perm.end());

  const Dataset sub_raw = train.rows(sub_idx);
  const Dataset val_raw = train.rows(val_idx);
  auto [sub_std, val_std, scaler] = standardize(sub_raw, val_raw);
  const MatrixXd Xv = val_std.X.transpose();
  const Index n_val = val_std.n();

  // One training seed shared by every candidate: common random numbers for
  // the comparison, and duplicate grid entries evaluate identically.
  const std::uint64_t build_seed = stream.sub(kBuildKey).stream;
  const std::uint64_t train_seed = stream.sub(kTrainKey).stream;
  const int epochs = cfg.epochs_base * cfg.epochs_multiplier;

  GridChoice best;
  double best_nll = std::numeric_limits<double>::infinity();
  for (double p_star : cfg.dropout_grid) {
    const auto spec = make_mlp_spec(train.q(), {cfg.hidden_width}, p_star, cfg.input_dropout);
    const auto net = momentprop::train(build_network<double>(spec, build_seed), sub_std, cfg.trainer(train_seed, epochs));

    VectorXd nll_by_tau = VectorXd::Zero(static_cast<Index>(cfg.tau_grid.size()));
    if (cfg.grid_metric == "mp") {
      const auto mp = propagate_moments_batch(net, Xv);
      for (std::size_t ti = 0; ti < cfg.tau_grid.size(); ++ti) {
        double acc = 0.0;
        for (Index j = 0; j < n_val; ++j) {
          acc += mp_nll(PredictiveGaussian<double>{mp.first(0, j), mp.second(0, j), cfg.tau_grid[ti]},
                        val_std.y(j));
        }
        nll_by_tau(static_cast<Index>(ti)) = acc / static_cast<double>(n_val);
      }
    } else {
      Rng mc_rng(stream.sub(kEvalKey));
      MatrixXd mus(n_val, cfg.T_grid);
      for (Index t = 0; t < cfg.T_grid; ++t) {
        mus.col(t) = mc_forward_batch(net, Xv, mc_rng).row(0).transpose();
      }
      for (std::size_t ti = 0; ti < cfg.tau_grid.size(); ++ti) {
        double acc = 0.0;
        for (Index j = 0; j < n_val; ++j) {
          acc += mc_nll(VectorXd(mus.row(j).transpose()), val_std.y(j), cfg.tau_grid[ti]);
        }
        nll_by_tau(static_cast<Index>(ti)) = acc / static_cast<double>(n_val);
      }
    }
    for (std::size_t ti = 0; ti < cfg.tau_grid.size(); ++ti) {
      const double nll = nll_by_tau(static_cast<Index>(ti));
      if (nll < best_nll) {
        best_nll = nll;
        best = GridChoice{p_star, cfg.tau_grid[ti], nll};
      }
    }
  }
  if (!std::isfinite(best_nll)) throw std::runtime_error("grid_search: every grid point produced non-finite NLL");
  return best;
}

std::pair<double, double> time_inference(const Network<double>& net, const MatrixXd& X, Index T_mc,
                                         RngStream stream) {
  if (X.cols() < 1) throw std::invalid_argument("time_inference: empty test set");
  if (T_mc < 1) throw std::invalid_argument("time_inference: T_mc must be >= 1");

  Rng rng(stream);
  // warmup, untimed
  double sink = propagate_moments_batch(net, X).first.sum();
  sink += mc_forward_batch(net, X, rng).sum();

  const double t0 = now_seconds();
  for (Index t = 0; t < T_mc; ++t) {
    sink += mc_forward_batch(net, X, rng).sum();
  }
  const double t1 = now_seconds();
  const auto mp = propagate_moments_batch(net, X);
  const double t2 = now_seconds();
  sink += mp.first.sum();
  if (!std::isfinite(sink)) throw std::runtime_error("time_inference: non-finite prediction");
  return {t1 - t0, t2 - t1};
}

namespace {

struct SplitData {
  Dataset train_raw;
  Dataset test_raw;
};

SplitData make_split(const Dataset& full, double train_fraction, Rng& rng) {
  const Index n = full.n();
  const auto perm = shuffled_indices(n, rng);
  const Index n_train = static_cast<Index>(static_cast<double>(n) * train_fraction);
  if (n_train < 2 || n_train >= n) throw std::invalid_argument("split: train fraction leaves a degenerate split");
  std::vector<Index> train_idx(perm.begin(), perm.begin() + n_train);
  std::vector<Index> test_idx(perm.begin() + n_train, perm.end());

  // leakage guard: every row lands in exactly one side
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index i : train_idx) seen[static_cast<std::size_t>(i)] += 1;
  for (Index i : test_idx) seen[static_cast<std::size_t>(i)] += 1;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) throw std::logic_error("split: train/test indices overlap or drop row " + std::to_string(i));
  }
  return SplitData{full.rows(train_idx), full.rows(test_idx)};
}

SplitMetrics run_one_split(const Dataset& full, const BenchConfig& cfg, int split) {
  SplitMetrics m;
  m.split = split;
  const RngStream ss = RngStream{cfg.seed, 0}.sub(static_cast<std::uint64_t>(split));

  Rng perm_rng(ss.sub(kPermKey));
  SplitData data = make_split(full, cfg.train_fraction, perm_rng);

  const GridChoice choice = grid_search(data.train_raw, cfg, ss.sub(kGridKey));
  m.p_star = choice.p_star;
  m.tau = choice.tau;

  auto [train_std, test_std, scaler] = standardize(data.train_raw, data.test_raw);
  const auto spec = make_mlp_spec(full.q(), {cfg.hidden_width}, choice.p_star, cfg.input_dropout);
  const int epochs = cfg.epochs_base * cfg.epochs_multiplier;
  const auto net = momentprop::train(build_network<double>(spec, ss.sub(kBuildKey).stream), train_std,
                                     cfg.trainer(ss.sub(kTrainKey).stream, epochs));

  if (!cfg.save_nets_dir.empty()) {
    save_network(net, cfg.save_nets_dir + "/" + cfg.dataset_name + "_split" + std::to_string(split) + ".net");
  }

  const MatrixXd Xt = test_std.X.transpose();
  const Index n_test = test_std.n();
  const double log_t = std::log(static_cast<double>(cfg.T_mc));

  // moment-propagation arm: one pass
  const auto mp = propagate_moments_batch(net, Xt);
  VectorXd pred_mp(n_test);
  double nll_mp_acc = 0.0;
  for (Index j = 0; j < n_test; ++j) {
    pred_mp(j) = scaler.original_prediction(mp.first(0, j));
    nll_mp_acc += mp_nll(PredictiveGaussian<double>{mp.first(0, j), mp.second(0, j), choice.tau}, test_std.y(j));
  }
  m.rmse_mp = rmse(pred_mp, data.test_raw.y);
  m.nll_mp = nll_mp_acc / static_cast<double>(n_test) + scaler.nll_offset();

  // MC arm: T_mc stochastic passes, streamed
  Rng mc_rng(ss.sub(kEvalKey));
  VectorXd sum = VectorXd::Zero(n_test);
  std::vector<StreamingLse> lse(static_cast<std::size_t>(n_test));
  for (Index t = 0; t < cfg.T_mc; ++t) {
    const MatrixXd Y = mc_forward_batch(net, Xt, mc_rng);
    for (Index j = 0; j < n_test; ++j) {
      const double mu = Y(0, j);
      sum(j) += mu;
      const double d = test_std.y(j) - mu;
      lse[static_cast<std::size_t>(j)].add(-0.5 * choice.tau * d * d);
    }
  }
  VectorXd pred_mc(n_test);
  double nll_mc_acc = 0.0;
  for (Index j = 0; j < n_test; ++j) {
    pred_mc(j) = scaler.original_prediction(sum(j) / static_cast<double>(cfg.T_mc));
    nll_mc_acc += -(lse[static_cast<std::size_t>(j)].value() - log_t + 0.5 * std::log(choice.tau) -
                    0.5 * kLogTwoPi);
  }
  m.rmse_mc = rmse(pred_mc, data.test_raw.y);
  m.nll_mc = nll_mc_acc / static_cast<double>(n_test) + scaler.nll_offset();

  const auto rt = time_inference(net, Xt, cfg.T_mc, ss.sub(kTimingKey));
  m.rt_mc = rt.first;
  m.rt_mp = rt.second;
  return m;
}

void write_split_csv(const std::string& path, const std::vector<SplitMetrics>& splits) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "split,p_star,tau,rmse_mc,rmse_mp,nll_mc,nll_mp,rt_mc,rt_mp,failed,note\n";
  for (const auto& s : splits) {
    out << s.split << "," << format_double(s.p_star) << "," << format_double(s.tau) << ","
        << format_double(s.rmse_mc) << "," << format_double(s.rmse_mp) << "," << format_double(s.nll_mc) << ","
        << format_double(s.nll_mp) << "," << format_double(s.rt_mc) << "," << format_double(s.rt_mp) << ","
        << (s.failed ? 1 : 0) << "," << s.note << "\n";
  }
}

void write_result_csv(const std::string& path, const ResultRow& row) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "dataset,n,q,splits_ok,splits_failed,"
         "rmse_mc,rmse_mc_se,rmse_mp,rmse_mp_se,nll_mc,nll_mc_se,nll_mp,nll_mp_se,"
         "rt_mc,rt_mc_se,rt_mp,rt_mp_se\n";
  out << row.dataset << "," << row.n << "," << row.q << "," << row.splits_ok << "," << row.splits_failed;
  for (const Stat* s : {&row.rmse_mc, &row.rmse_mp, &row.nll_mc, &row.nll_mp, &row.rt_mc, &row.rt_mp}) {
    out << "," << format_double(s->mean) << "," << format_double(s->se);
  }
  out << "\n";
}

}  // namespace

BenchOutcome run_uci_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  const Dataset full = load_dataset_csv(cfg.data_path, cfg.csv);

  BenchOutcome outcome;
  outcome.splits.resize(static_cast<std::size_t>(cfg.n_splits));

  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int s = next.fetch_add(1);
      if (s >= cfg.n_splits) return;
      SplitMetrics& slot = outcome.splits[static_cast<std::size_t>(s)];
      try {
        slot = run_one_split(full, cfg, s);
      } catch (const std::exception& e) {
        slot = SplitMetrics{};
        slot.split = s;
        slot.failed = true;
        slot.note = e.what();
      }
    }
  };
  if (cfg.threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int k = std::min(cfg.threads, cfg.n_splits);
    pool.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<double> rmse_mc, rmse_mp, nll_mc, nll_mp, rt_mc, rt_mp;
  for (const auto& s : outcome.splits) {
    if (s.failed) {
      ++outcome.row.splits_failed;
      continue;
    }
    ++outcome.row.splits_ok;
    rmse_mc.push_back(s.rmse_mc);
    rmse_mp.push_back(s.rmse_mp);
    nll_mc.push_back(s.nll_mc);
    nll_mp.push_back(s.nll_mp);
    rt_mc.push_back(s.rt_mc);
    rt_mp.push_back(s.rt_mp);
  }
  outcome.row.dataset = cfg.dataset_name;
  outcome.row.n = full.n();
  outcome.row.q = full.q();
  outcome.row.rmse_mc = aggregate(rmse_mc);
  outcome.row.rmse_mp = aggregate(rmse_mp);
  outcome.row.nll_mc = aggregate(nll_mc);
  outcome.row.nll_mp = aggregate(nll_mp);
  outcome.row.rt_mc = aggregate(rt_mc);
  outcome.row.rt_mp = aggregate(rt_mp);

  if (!cfg.out_dir.empty()) {
    write_split_csv(cfg.out_dir + "/" + cfg.dataset_name + "_splits.csv", outcome.splits);
    write_result_csv(cfg.out_dir + "/" + cfg.dataset_name + "_result.csv", outcome.row);
  }
  return outcome;
}

std::string format_result_table(const ResultRow& row) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %6lld %4lld", row.dataset.c_str(), static_cast<long long>(row.n),
                static_cast<long long>(row.q));
  out << "dataset         N    Q   RMSE MC        RMSE MP        NLL MC         NLL MP         RT[s] MC       RT[s] MP\n";
  out << buf;
  for (const Stat* s : {&row.rmse_mc, &row.rmse_mp, &row.nll_mc, &row.nll_mp, &row.rt_mc, &row.rt_mp}) {
    std::snprintf(buf, sizeof(buf), "  %6.3f unknown", s->mean);
    std::snprintf(buf, sizeof(buf), "  %6.3f ±%5.3f", s->mean, s->se);
    out << buf;
  }
  out << "\n";
  if (row.splits_failed > 0) {
    out << "WARNING: " << row.splits_failed << " of " << (row.splits_ok + row.splits_failed)
        << " splits failed and were excluded\n";
  }
  return out.str();
}

ToyConfig ToyConfig::from_config(const KeyValueConfig& cfg) {
  ToyConfig t;
  t.n_train = cfg.get_int("n_train", t.n_train);
  t.noise_sd = cfg.get_real("noise_sd", t.noise_sd);
  t.x_lo = cfg.get_real("x_lo", t.x_lo);
  t.x_hi = cfg.get_real("x_hi", t.x_hi);
  t.grid_lo = cfg.get_real("grid_lo", t.grid_lo);
  t.grid_hi = cfg.get_real("grid_hi", t.grid_hi);
  t.grid_step = cfg.get_real("grid_step", t.grid_step);
  t.hidden = cfg.get_int("hidden", t.hidden);
  t.depth = static_cast<int>(cfg.get_int("depth", t.depth));
  t.p_star = cfg.get_real("p_star", t.p_star);
  t.T = cfg.get_int("T", t.T);
  t.epochs = static_cast<int>(cfg.get_int("epochs", t.epochs));
  t.batch_size = static_cast<int>(cfg.get_int("batch_size", t.batch_size));
  t.learning_rate = cfg.get_real("learning_rate", t.learning_rate);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(t.seed)));
  return t;
}

double toy_function(double x) { return x * std::sin(x); }

Dataset generate_toy(const ToyConfig& cfg) {
  if (cfg.n_train < 1) throw std::invalid_argument("generate_toy: empty dataset requested");
  if (!(cfg.x_hi > cfg.x_lo)) throw std::invalid_argument("generate_toy: empty x range");
  Rng rng(RngStream{cfg.seed, 10});
  Dataset d;
  d.X.resize(cfg.n_train, 1);
  d.y.resize(cfg.n_train);
  for (Index i = 0; i < cfg.n_train; ++i) {
    const double x = cfg.x_lo + (cfg.x_hi - cfg.x_lo) * rng.uniform();
    d.X(i, 0) = x;
    d.y(i) = toy_function(x) + cfg.noise_sd * rng.normal();
  }
  return d;
}

ToyCurves run_toy_experiment(const ToyConfig& cfg) {
  if (cfg.T < 2) throw std::invalid_argument("toy experiment: T must be >= 2");
  if (cfg.depth < 1) throw std::invalid_argument("toy experiment: depth must be >= 1");
  const Dataset raw = generate_toy(cfg);
  const Scaler scaler = Scaler::fit(raw);
  const Dataset train_std = scaler.transform(raw);

  const std::vector<Index> hidden(static_cast<std::size_t>(cfg.depth), cfg.hidden);
  const auto spec = make_mlp_spec(1, hidden, cfg.p_star, false);
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.seed = RngStream{cfg.seed, 11}.sub(kTrainKey).stream;
  const auto net = momentprop::train(build_network<double>(spec, RngStream{cfg.seed, 11}.sub(kBuildKey).stream),
                                     train_std, tc);
  if (!cfg.save_net_path.empty()) save_network(net, cfg.save_net_path);

  const Index n_grid = static_cast<Index>(std::floor((cfg.grid_hi - cfg.grid_lo) / cfg.grid_step + 1e-9)) + 1;
  ToyCurves curves;
  curves.x.resize(n_grid);
  curves.e_mc.resize(n_grid);
  curves.sd_mc.resize(n_grid);
  curves.e_mp.resize(n_grid);
  curves.sd_mp.resize(n_grid);
  curves.dnn_mu.resize(n_grid);
  curves.train_y_lo = raw.y.minCoeff();
  curves.train_y_hi = raw.y.maxCoeff();

  const RngStream eval_stream = RngStream{cfg.seed, 12};
  for (Index j = 0; j < n_grid; ++j) {
    const double x = cfg.grid_lo + static_cast<double>(j) * cfg.grid_step;
    curves.x(j) = x;
    VectorXd xs(1);
    xs(0) = (x - scaler.x_mean(0)) / scaler.x_scale(0);

    const auto ens = mc_ensemble(net, xs, cfg.T, eval_stream.sub(static_cast<std::uint64_t>(j)));
    const auto emp = empirical_moments(ens);
    curves.e_mc(j) = scaler.original_prediction(emp.mean(0));
    curves.sd_mc(j) = std::sqrt(scaler.original_variance(std::max(emp.var(0), 0.0)));

    const auto mp = propagate_moments(net, xs);
    curves.e_mp(j) = scaler.original_prediction(mp.mean(0));
    curves.sd_mp(j) = std::sqrt(scaler.original_variance(mp.var(0)));

    curves.dnn_mu(j) = scaler.original_prediction(forward_deterministic(net, xs)(0));
  }

  if (!cfg.out_csv.empty()) {
    std::ofstream out(cfg.out_csv);
    if (!out) throw std::runtime_error("cannot open '" + cfg.out_csv + "' for writing");
    out << "x,e_mc,sd_mc,e_mp,sd_mp,dnn_mu\n";
    for (Index j = 0; j < n_grid; ++j) {
      out << format_double(curves.x(j)) << "," << format_double(curves.e_mc(j)) << ","
          << format_double(curves.sd_mc(j)) << "," << format_double(curves.e_mp(j)) << ","
          << format_double(curves.sd_mp(j)) << "," << format_double(curves.dnn_mu(j)) << "\n";
    }
  }
  return curves;
}

}  // namespace momentprop
