#pragma once

#include <cstdint>
#include <vector>

#include "momentprop/network.hpp"
#include "momentprop/types.hpp"

namespace momentprop {

// Randomized cross-checks of the analytic moment pass against brute-force
// MC dropout sampling. These back both the `oracle`/`gradcheck` CLI
// subcommands and the acceptance suite; thresholds are applied by callers.

// Dropout/dense chains without ReLU, where moment propagation is exact and
// any discrepancy beyond sampling noise is a bug.
struct ChainOracleOptions {
  int n_nets = 50;
  Index runs = 100000;  // MC runs per network
  int max_dense = 3;
  Index max_width = 64;
  std::vector<double> p_grid = {0.1, 0.3, 0.5};
  double var_cut = 1e-6;  // variance ratio checked only where V_mp exceeds this
  std::uint64_t seed = 2024;
};

struct ChainOracleReport {
  int nets = 0;
  Index nodes = 0;
  double worst_mean_dev_se = 0.0;    // max |E_mc - E_mp| / SE over output nodes
  double worst_var_ratio_dev = 0.0;  // max |V_mc / V_mp - 1| where V_mp > var_cut
};

ChainOracleReport run_chain_oracle(const ChainOracleOptions& opt);

// Rectified-Gaussian moment formulas against empirical moments of
// max(0, N(mean, var)).
struct ReluSweepOptions {
  Index samples = 1000000;
  double r_lo = -4.0;
  double r_hi = 4.0;
  double r_step = 0.25;
  std::vector<double> variances = {0.25, 1.0, 4.0};
  // tolerance rule: relative below, absolute where the reference is small
  double rel_tol = 0.01;
  double abs_tol = 0.002;
  double abs_cut = 0.1;
  std::uint64_t seed = 7;
};

struct ReluSweepReport {
  int points = 0;
  double worst_tolerance_ratio = 0.0;  // max |mp - emp| / tol(emp); <= 1 passes
  double worst_mean_abs_err = 0.0;
  double worst_var_abs_err = 0.0;
};

ReluSweepReport run_relu_sweep(const ReluSweepOptions& opt);

// Full two-hidden-layer ReLU networks with dropout: measures how far the
// diagonal Gaussian approximation drifts from MC predictive sd.
struct FullNetSdOptions {
  int n_nets = 20;
  int n_inputs = 100;
  Index runs = 10000;
  Index min_width = 16;
  Index max_width = 64;
  std::vector<double> p_grid = {0.1, 0.3, 0.5};
  std::uint64_t seed = 11;
};

struct FullNetSdReport {
  int pairs = 0;                    // (net, input) pairs measured
  double mean_abs_rel_dev = 0.0;    // mean |sd_mp/sd_mc - 1|
  double mean_signed_rel_dev = 0.0; // mean (sd_mp/sd_mc - 1), the bias
  double worst_abs_rel_dev = 0.0;
};

FullNetSdReport run_fullnet_sd_comparison(const FullNetSdOptions& opt);

// Sampling-based mixture NLL against the collapsed closed form, with
// synthetic ensembles drawn from the collapsed model.
struct NllConsistencyOptions {
  Index runs = 100000;
  int n_targets = 100;
  std::vector<double> model_vars = {0.1, 1.0, 10.0};
  std::vector<double> taus = {0.5, 1.0, 2.0};
  std::uint64_t seed = 5;
};

struct NllConsistencyReport {
  int combos = 0;
  double worst_mean_abs_diff = 0.0;  // max over (V, tau) of mean |mc_nll - mp_nll|
};

NllConsistencyReport run_nll_consistency(const NllConsistencyOptions& opt);

// Finite-difference gradient checks over random small architectures. Cases
// whose ReLU pre-activations sit within the finite-difference step of a kink
// are redrawn; differencing across the kink measures nothing.
struct GradcheckSuiteOptions {
  int n_archs = 20;
  Index batch = 24;
  std::uint64_t seed = 3;
};

struct GradcheckSuiteReport {
  int archs = 0;
  double worst_rel_err = 0.0;
  double worst_linear_rel_err = 0.0;  // purely linear nets, should be near machine precision
};

GradcheckSuiteReport run_gradcheck_suite(const GradcheckSuiteOptions& opt);

}  // namespace momentprop
