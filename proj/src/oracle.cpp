#include "momentprop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "momentprop/dataset.hpp"
#include "momentprop/mc.hpp"
#include "momentprop/moments.hpp"
#include "momentprop/trainer.hpp"

namespace momentprop {

namespace {

// Accumulates per-node mean and variance over batched MC runs without
// storing the runs.
struct MomentAccumulator {
  VectorXd sum;
  VectorXd sumsq;
  Index count = 0;

  explicit MomentAccumulator(Index width) : sum(VectorXd::Zero(width)), sumsq(VectorXd::Zero(width)) {}

  void add(const VectorXd& v) {
    sum += v;
    sumsq += v.cwiseAbs2();
    ++count;
  }

  VectorXd mean() const { return sum / static_cast<double>(count); }
  VectorXd unbiased_var() const {
    const VectorXd m = mean();
    return (sumsq - static_cast<double>(count) * m.cwiseAbs2()) / static_cast<double>(count - 1);
  }
};

}  // namespace

ChainOracleReport run_chain_oracle(const ChainOracleOptions& opt) {
  if (opt.n_nets < 1 || opt.runs < 2) throw std::invalid_argument("chain oracle: need nets and at least two runs");
  ChainOracleReport report;
  const RngStream base{opt.seed, 0};
  for (int k = 0; k < opt.n_nets; ++k) {
    const RngStream net_stream = base.sub(static_cast<std::uint64_t>(k));
    Rng gen(net_stream.sub(0));

    const int n_dense = 1 + static_cast<int>(gen.below(static_cast<std::uint64_t>(opt.max_dense)));
    Index width = 1 + static_cast<Index>(gen.below(static_cast<std::uint64_t>(opt.max_width)));
    std::vector<LayerSpec> specs;
    bool has_dropout = false;
    for (int d = 0; d < n_dense; ++d) {
      const bool with_dropout = d + 1 == n_dense && !has_dropout ? true : gen.uniform() < 0.8;
      if (with_dropout) {
        specs.push_back(LayerSpec::dropout(opt.p_grid[gen.below(opt.p_grid.size())]));
        has_dropout = true;
      }
      const Index next = 1 + static_cast<Index>(gen.below(static_cast<std::uint64_t>(opt.max_width)));
      specs.push_back(LayerSpec::dense(width, next));
      width = next;
    }
    const auto net = build_network<double>(specs, net_stream.sub(1).stream);

    VectorXd x(net.input_dim());
    for (Index i = 0; i < x.size(); ++i) x(i) = 2.0 * gen.normal();

    const MomentVector<double> mp = propagate_moments(net, x);

    // batched MC accumulation: each column is an independent run of the same input
    MomentAccumulator acc(net.output_dim());
    Rng mc_rng(net_stream.sub(2));
    const Index chunk = 4096;
    Index done = 0;
    while (done < opt.runs) {
      const Index b = std::min(chunk, opt.runs - done);
      const MatrixXd X = x.replicate(1, b);
      const MatrixXd Y = mc_forward_batch(net, X, mc_rng);
      for (Index c = 0; c < b; ++c) acc.add(Y.col(c));
      done += b;
    }
    const VectorXd e_mc = acc.mean();
    const VectorXd v_mc = acc.unbiased_var();

    for (Index i = 0; i < net.output_dim(); ++i) {
      const double se = std::sqrt(std::max(v_mc(i), 0.0) / static_cast<double>(opt.runs));
      const double dev = std::abs(e_mc(i) - mp.mean(i));
      report.worst_mean_dev_se = std::max(report.worst_mean_dev_se, se > 0.0 ? dev / se : (dev > 1e-9 ? 1e9 : 0.0));
      if (mp.var(i) > opt.var_cut) {
        report.worst_var_ratio_dev = std::max(report.worst_var_ratio_dev, std::abs(v_mc(i) / mp.var(i) - 1.0));
      }
      ++report.nodes;
    }
    ++report.nets;
  }
  return report;
}

ReluSweepReport run_relu_sweep(const ReluSweepOptions& opt) {
  if (opt.samples < 2) throw std::invalid_argument("relu sweep: need at least two samples");
  ReluSweepReport report;
  Rng rng(RngStream{opt.seed, 0});
  auto tolerance = [&opt](double reference) {
    const double a = std::abs(reference);
    return a < opt.abs_cut ? opt.abs_tol : opt.rel_tol * a;
  };
  for (double var : opt.variances) {
    const double sd = std::sqrt(var);
    for (double r = opt.r_lo; r <= opt.r_hi + 1e-12; r += opt.r_step) {
      const double mean = r * sd;
      double sum = 0.0, sumsq = 0.0;
      for (Index s = 0; s < opt.samples; ++s) {
        const double y = std::max(0.0, mean + sd * rng.normal());
        sum += y;
        sumsq += y * y;
      }
      const double n = static_cast<double>(opt.samples);
      const double emp_mean = sum / n;
      const double emp_var = (sumsq - n * emp_mean * emp_mean) / (n - 1.0);

      const auto mp = rectified_gaussian_moments(mean, var);
      const double mean_err = std::abs(mp.first - emp_mean);
      const double var_err = std::abs(mp.second - emp_var);
      report.worst_mean_abs_err = std::max(report.worst_mean_abs_err, mean_err);
      report.worst_var_abs_err = std::max(report.worst_var_abs_err, var_err);
      report.worst_tolerance_ratio = std::max({report.worst_tolerance_ratio, mean_err / tolerance(emp_mean),
                                               var_err / tolerance(emp_var)});
      ++report.points;
    }
  }
  return report;
}

FullNetSdReport run_fullnet_sd_comparison(const FullNetSdOptions& opt) {
  if (opt.n_nets < 1 || opt.n_inputs < 1 || opt.runs < 2) {
    throw std::invalid_argument("fullnet comparison: degenerate options");
  }
  FullNetSdReport report;
  double sum_abs = 0.0, sum_signed = 0.0;
  const RngStream base{opt.seed, 1};
  for (int k = 0; k < opt.n_nets; ++k) {
    const RngStream net_stream = base.sub(static_cast<std::uint64_t>(k));
    Rng gen(net_stream.sub(0));
    const Index q = 1 + static_cast<Index>(gen.below(8));
    const auto width = [&]() {
      return opt.min_width + static_cast<Index>(gen.below(static_cast<std::uint64_t>(opt.max_width - opt.min_width + 1)));
    };
    const Index h1 = width();
    const Index h2 = width();
    const double p1 = opt.p_grid[gen.below(opt.p_grid.size())];
    const double p2 = opt.p_grid[gen.below(opt.p_grid.size())];
    const std::vector<LayerSpec> specs = {
        LayerSpec::dense(q, h1),  LayerSpec::relu(), LayerSpec::dropout(p1),
        LayerSpec::dense(h1, h2), LayerSpec::relu(), LayerSpec::dropout(p2),
        LayerSpec::dense(h2, 1),
    };
    const auto net = build_network<double>(specs, net_stream.sub(1).stream);

    MatrixXd X(q, opt.n_inputs);
    for (Index c = 0; c < X.cols(); ++c) {
      for (Index r = 0; r < X.rows(); ++r) X(r, c) = gen.normal();
    }

    const auto mp = propagate_moments_batch(net, X);

    VectorXd sum = VectorXd::Zero(opt.n_inputs);
    VectorXd sumsq = VectorXd::Zero(opt.n_inputs);
    Rng mc_rng(net_stream.sub(2));
    for (Index t = 0; t < opt.runs; ++t) {
      const MatrixXd Y = mc_forward_batch(net, X, mc_rng);
      sum += Y.row(0).transpose();
      sumsq += Y.row(0).transpose().cwiseAbs2();
    }
    const double n = static_cast<double>(opt.runs);
    for (int j = 0; j < opt.n_inputs; ++j) {
      const double m = sum(j) / n;
      const double v_mc = (sumsq(j) - n * m * m) / (n - 1.0);
      const double sd_mc = std::sqrt(std::max(v_mc, 0.0));
      const double sd_mp = std::sqrt(std::max(mp.second(0, j), 0.0));
      if (sd_mc <= 0.0) continue;  // dropout guarantees spread; defensive only
      const double dev = sd_mp / sd_mc - 1.0;
      sum_abs += std::abs(dev);
      sum_signed += dev;
      report.worst_abs_rel_dev = std::max(report.worst_abs_rel_dev, std::abs(dev));
      ++report.pairs;
    }
  }
  if (report.pairs > 0) {
    report.mean_abs_rel_dev = sum_abs / report.pairs;
    report.mean_signed_rel_dev = sum_signed / report.pairs;
  }
  return report;
}

NllConsistencyReport run_nll_consistency(const NllConsistencyOptions& opt) {
  NllConsistencyReport report;
  const RngStream base{opt.seed, 2};
  int combo = 0;
  for (double v : opt.model_vars) {
    for (double tau : opt.taus) {
      const RngStream cs = base.sub(static_cast<std::uint64_t>(combo));
      Rng mu_rng(cs.sub(0));
      VectorXd mus(opt.runs);
      const double sd = std::sqrt(v);
      for (Index t = 0; t < opt.runs; ++t) mus(t) = sd * mu_rng.normal();

      Rng y_rng(cs.sub(1));
      const double total_sd = std::sqrt(v + 1.0 / tau);
      double sum_abs = 0.0;
      for (int j = 0; j < opt.n_targets; ++j) {
        const double y = total_sd * y_rng.normal();
        const double mc = mc_nll(mus, y, tau);
        const double mp = mp_nll(PredictiveGaussian<double>{0.0, v, tau}, y);
        sum_abs += std::abs(mc - mp);
      }
      report.worst_mean_abs_diff = std::max(report.worst_mean_abs_diff, sum_abs / opt.n_targets);
      ++report.combos;
      ++combo;
    }
  }
  return report;
}

namespace {

// Smallest |pre-activation| feeding a ReLU during one masked forward pass.
// Used to reject gradcheck cases where finite differencing would step across
// a kink.
double min_relu_preactivation(const Network<double>& net, const MatrixXd& X, const std::vector<MatrixXd>& masks) {
  const auto& layers = net.layers();
  MatrixXd v = X;
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    switch (layers[i].kind) {
      case LayerKind::kDropout:
        v = v.cwiseProduct(masks[i]);
        break;
      case LayerKind::kDense: {
        const auto& d = net.dense(net.dense_slot(i));
        v = ((d.W * v).colwise() + d.b).eval();
        break;
      }
      case LayerKind::kRelu:
        lowest = std::min(lowest, v.cwiseAbs().minCoeff());
        v = v.cwiseMax(0.0);
        break;
    }
  }
  return lowest;
}

}  // namespace

GradcheckSuiteReport run_gradcheck_suite(const GradcheckSuiteOptions& opt) {
  GradcheckSuiteReport report;
  const RngStream base{opt.seed, 3};
  constexpr double kKinkGuard = 1e-3;

  for (int k = 0; k < opt.n_archs; ++k) {
    const bool linear_case = k % 5 == 4;  // every fifth net exercises the exact linear path
    double err = 0.0;
    for (std::uint64_t attempt = 0;; ++attempt) {
      const RngStream cs = base.sub(static_cast<std::uint64_t>(k)).sub(attempt);
      Rng gen(cs.sub(0));
      const Index q = 1 + static_cast<Index>(gen.below(6));
      const Index h1 = 2 + static_cast<Index>(gen.below(15));
      const Index h2 = 2 + static_cast<Index>(gen.below(15));
      const bool with_dropout = !linear_case && gen.uniform() < 0.5;

      std::vector<LayerSpec> specs;
      if (linear_case) {
        specs = {LayerSpec::dense(q, h1), LayerSpec::dense(h1, 1)};
      } else {
        specs.push_back(LayerSpec::dense(q, h1));
        specs.push_back(LayerSpec::relu());
        if (with_dropout) specs.push_back(LayerSpec::dropout(0.2 + 0.3 * gen.uniform()));
        specs.push_back(LayerSpec::dense(h1, h2));
        specs.push_back(LayerSpec::relu());
        specs.push_back(LayerSpec::dense(h2, 1));
      }
      const auto net = build_network<double>(specs, cs.sub(1).stream);

      Dataset batch;
      batch.X.resize(opt.batch, q);
      batch.y.resize(opt.batch);
      for (Index r = 0; r < opt.batch; ++r) {
        for (Index c = 0; c < q; ++c) batch.X(r, c) = gen.normal();
        batch.y(r) = gen.normal();
      }

      if (!linear_case) {
        Rng mask_probe(cs.sub(2));
        const auto masks = draw_inverted_masks(net, opt.batch, mask_probe);
        if (min_relu_preactivation(net, batch.X.transpose(), masks) < kKinkGuard) {
          if (attempt < 50) continue;
          throw std::runtime_error("gradcheck suite: could not find a kink-free case");
        }
      }
      err = finite_difference_gradcheck(net, batch, cs.sub(2));
      break;
    }
    if (linear_case) {
      report.worst_linear_rel_err = std::max(report.worst_linear_rel_err, err);
    }
    report.worst_rel_err = std::max(report.worst_rel_err, err);
    ++report.archs;
  }
  return report;
}

}  // namespace momentprop
