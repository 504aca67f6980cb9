#include "momentprop/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace momentprop {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be positive");
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  TrainConfig t;
  t.epochs = static_cast<int>(cfg.get_int("epochs", t.epochs));
  t.batch_size = static_cast<int>(cfg.get_int("batch_size", t.batch_size));
  t.learning_rate = cfg.get_real("learning_rate", t.learning_rate);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  const std::string opt = cfg.get_string("optimizer", "adam");
  if (opt == "adam") {
    t.optimizer = Optimizer::kAdam;
  } else if (opt == "sgd") {
    t.optimizer = Optimizer::kSgd;
  } else {
    throw std::runtime_error("train config: unknown optimizer '" + opt + "'");
  }
  t.validate();
  return t;
}

std::vector<MatrixXd> draw_inverted_masks(const Network<double>& net, Index batch, Rng& rng) {
  const auto& layers = net.layers();
  std::vector<MatrixXd> masks(layers.size());
  Index width = net.input_dim();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::kDense) {
      width = layers[i].out_dim;
      continue;
    }
    if (layers[i].kind != LayerKind::kDropout) continue;
    const double p = layers[i].p_star;
    const double kept = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
    masks[i].resize(width, batch);
    for (Index c = 0; c < batch; ++c) {
      for (Index r = 0; r < width; ++r) {
        masks[i](r, c) = rng.uniform() >= p ? kept : 0.0;
      }
    }
  }
  return masks;
}

double batch_loss(const Network<double>& net, const MatrixXd& X, const VectorXd& y,
                  const std::vector<MatrixXd>& masks, BatchGradients* grads) {
  if (X.rows() != net.input_dim()) throw std::invalid_argument("batch_loss: input width mismatch");
  if (net.output_dim() != 1) throw std::invalid_argument("batch_loss: regression loss expects one output node");
  if (y.size() != X.cols()) throw std::invalid_argument("batch_loss: target length mismatch");
  const auto& layers = net.layers();
  if (masks.size() != layers.size()) throw std::invalid_argument("batch_loss: one mask slot per layer expected");
  const Index B = X.cols();

  std::vector<MatrixXd> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(X);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    switch (layers[i].kind) {
      case LayerKind::kDropout:
        acts.push_back(acts.back().cwiseProduct(masks[i]));
        break;
      case LayerKind::kDense: {
        const auto& d = net.dense(net.dense_slot(i));
        acts.push_back((d.W * acts.back()).colwise() + d.b);
        break;
      }
      case LayerKind::kRelu:
        acts.push_back(acts.back().cwiseMax(0.0));
        break;
    }
  }

  const MatrixXd& out = acts.back();
  const VectorXd resid = out.row(0).transpose() - y;
  const double loss = resid.squaredNorm() / static_cast<double>(B);
  if (grads == nullptr) return loss;

  grads->dW.assign(static_cast<std::size_t>(net.dense_count()), MatrixXd());
  grads->db.assign(static_cast<std::size_t>(net.dense_count()), VectorXd());
  grads->loss = loss;

  MatrixXd g = (2.0 / static_cast<double>(B)) * resid.transpose();
  for (std::size_t ii = layers.size(); ii-- > 0;) {
    switch (layers[ii].kind) {
      case LayerKind::kDropout:
        g = g.cwiseProduct(masks[ii]);
        break;
      case LayerKind::kDense: {
        const auto slot = net.dense_slot(ii);
        const auto& d = net.dense(slot);
        grads->dW[static_cast<std::size_t>(slot)] = g * acts[ii].transpose();
        grads->db[static_cast<std::size_t>(slot)] = g.rowwise().sum();
        g = (d.W.transpose() * g).eval();
        break;
      }
      case LayerKind::kRelu:
        g = g.cwiseProduct((acts[ii].array() > 0.0).cast<double>().matrix());
        break;
    }
  }
  return loss;
}

namespace {

struct AdamState {
  std::vector<MatrixXd> mW, vW;
  std::vector<VectorXd> mb, vb;
  long long t = 0;

  explicit AdamState(const Network<double>& net) {
    for (Index s = 0; s < net.dense_count(); ++s) {
      const auto& d = net.dense(s);
      mW.push_back(MatrixXd::Zero(d.W.rows(), d.W.cols()));
      vW.push_back(MatrixXd::Zero(d.W.rows(), d.W.cols()));
      mb.push_back(VectorXd::Zero(d.b.size()));
      vb.push_back(VectorXd::Zero(d.b.size()));
    }
  }
};

void apply_update(Network<double>& net, const BatchGradients& grads, const TrainConfig& cfg, AdamState& adam) {
  if (cfg.optimizer == TrainConfig::Optimizer::kSgd) {
    for (Index s = 0; s < net.dense_count(); ++s) {
      auto& d = net.mutable_dense(s);
      d.W -= cfg.learning_rate * grads.dW[static_cast<std::size_t>(s)];
      d.b -= cfg.learning_rate * grads.db[static_cast<std::size_t>(s)];
    }
    return;
  }
  ++adam.t;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
  const double step = cfg.learning_rate * std::sqrt(bias2) / bias1;
  for (Index s = 0; s < net.dense_count(); ++s) {
    const auto si = static_cast<std::size_t>(s);
    auto& d = net.mutable_dense(s);
    adam.mW[si] = b1 * adam.mW[si] + (1.0 - b1) * grads.dW[si];
    adam.vW[si] = b2 * adam.vW[si] + (1.0 - b2) * grads.dW[si].cwiseAbs2();
    d.W -= step * (adam.mW[si].array() / (adam.vW[si].cwiseSqrt().array() + cfg.adam_epsilon)).matrix();
    adam.mb[si] = b1 * adam.mb[si] + (1.0 - b1) * grads.db[si];
    adam.vb[si] = b2 * adam.vb[si] + (1.0 - b2) * grads.db[si].cwiseAbs2();
    d.b -= step * (adam.mb[si].array() / (adam.vb[si].cwiseSqrt().array() + cfg.adam_epsilon)).matrix();
  }
}

}  // namespace

Network<double> train(const Network<double>& net, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.check_invariants();
  if (data.q() != net.input_dim()) {
    throw std::invalid_argument("train: dataset has " + std::to_string(data.q()) +
                                " features but network expects " + std::to_string(net.input_dim()));
  }

  Network<double> model = net;
  AdamState adam(model);
  Rng rng(RngStream{cfg.seed, 1});

  const Index n = data.n();
  const MatrixXd Xt = data.X.transpose();  // feature-major, columns are samples
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index i = n - 1; i > 0; --i) {  // Fisher-Yates
      const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index b = std::min<Index>(cfg.batch_size, n - start);
      MatrixXd Xb(data.q(), b);
      VectorXd yb(b);
      for (Index k = 0; k < b; ++k) {
        Xb.col(k) = Xt.col(order[static_cast<std::size_t>(start + k)]);
        yb(k) = data.y(order[static_cast<std::size_t>(start + k)]);
      }
      const auto masks = draw_inverted_masks(model, b, rng);
      BatchGradients grads;
      const double loss = batch_loss(model, Xb, yb, masks, &grads);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch offset " +
                                 std::to_string(start) + "; try a lower learning rate");
      }
      apply_update(model, grads, cfg, adam);
    }
  }
  model.validate_weights();
  return model;
}

double finite_difference_gradcheck(const Network<double>& net, const Dataset& batch, RngStream mask_stream) {
  batch.check_invariants();
  const MatrixXd Xb = batch.X.transpose();
  Rng rng(mask_stream);
  const auto masks = draw_inverted_masks(net, Xb.cols(), rng);

  BatchGradients grads;
  batch_loss(net, Xb, batch.y, masks, &grads);

  constexpr double kStep = 1e-5;
  Network<double> probe = net;
  double max_rel = 0.0;
  auto check_entry = [&](double* param, double analytic) {
    const double saved = *param;
    *param = saved + kStep;
    const double lp = batch_loss(probe, Xb, batch.y, masks, nullptr);
    *param = saved - kStep;
    const double lm = batch_loss(probe, Xb, batch.y, masks, nullptr);
    *param = saved;
    const double numeric = (lp - lm) / (2.0 * kStep);
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
  };

  for (Index s = 0; s < net.dense_count(); ++s) {
    auto& d = probe.mutable_dense(s);
    const auto si = static_cast<std::size_t>(s);
    for (Index r = 0; r < d.W.rows(); ++r) {
      for (Index c = 0; c < d.W.cols(); ++c) {
        check_entry(&d.W(r, c), grads.dW[si](r, c));
      }
    }
    for (Index r = 0; r < d.b.size(); ++r) {
      check_entry(&d.b(r), grads.db[si](r));
    }
  }
  return max_rel;
}

}  // namespace momentprop
