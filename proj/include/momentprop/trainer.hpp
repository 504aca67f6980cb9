#pragma once

#include <cstdint>
#include <vector>

#include "momentprop/config.hpp"
#include "momentprop/dataset.hpp"
#include "momentprop/network.hpp"
#include "momentprop/rng.hpp"
#include "momentprop/types.hpp"

namespace momentprop {

struct TrainConfig {
  enum class Optimizer { kSgd, kAdam };

  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::kAdam;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
  static TrainConfig from_config(const KeyValueConfig& cfg);
};

// Gradients of the batch MSE loss with respect to every dense layer.
struct BatchGradients {
  std::vector<MatrixXd> dW;
  std::vector<VectorXd> db;
  double loss = 0.0;
};

// Inverted-dropout mask matrices (entries 0 or 1/(1-p_star)), one per layer
// index; empty for non-dropout layers. Width x batch each.
std::vector<MatrixXd> draw_inverted_masks(const Network<double>& net, Index batch, Rng& rng);

// Mean squared error of the batch (columns of X are samples) under the given
// fixed masks; fills gradients when `grads` is non-null.
double batch_loss(const Network<double>& net, const MatrixXd& X, const VectorXd& y,
                  const std::vector<MatrixXd>& masks, BatchGradients* grads);

// Fits the network with mini-batch gradient descent under MSE loss and
// inverted train-time dropout, so the learned weights feed the deterministic,
// MC, and moment forward passes without rescaling. Returns a new network;
// deterministic for a fixed seed.
Network<double> train(const Network<double>& net, const Dataset& data, const TrainConfig& cfg);

// Compares analytic gradients against central finite differences (step 1e-5)
// on one batch; dropout masks, if any, are drawn once and held fixed across
// all evaluations. Returns the maximum relative error.
double finite_difference_gradcheck(const Network<double>& net, const Dataset& batch, RngStream mask_stream);

}  // namespace momentprop
