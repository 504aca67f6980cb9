#pragma once

#include <stdexcept>
#include <string>

#include "momentprop/moments.hpp"
#include "momentprop/network.hpp"
#include "momentprop/rng.hpp"
#include "momentprop/types.hpp"

namespace momentprop {

// T sampled network outputs mu_t(x) for one input; column t is one run.
template <class Scalar>
struct McEnsemble {
  MatrixX<Scalar> samples;  // out_dim x T

  Index runs() const { return samples.cols(); }
  Index width() const { return samples.rows(); }
};

// Binary keep mask: each entry is independently 0 with probability p_star,
// 1 otherwise.
template <class Scalar = double>
VectorX<Scalar> sample_mask(Index width, double p_star, Rng& rng) {
  if (!(p_star >= 0.0 && p_star <= 1.0)) {
    throw std::invalid_argument("sample_mask: p_star out of [0, 1]: " + std::to_string(p_star));
  }
  VectorX<Scalar> mask(width);
  for (Index i = 0; i < width; ++i) {
    mask(i) = rng.uniform() >= p_star ? Scalar(1) : Scalar(0);
  }
  return mask;
}

// One stochastic pass: every dropout layer multiplies its input elementwise
// by a fresh raw mask (no 1/(1-p_star) rescaling), dense and ReLU layers run
// as usual. Masks are drawn per node, independently across layers.
template <class Scalar>
VectorX<Scalar> mc_forward(const Network<Scalar>& net, const VectorX<Scalar>& x, Rng& rng) {
  if (x.size() != net.input_dim()) {
    throw std::invalid_argument("mc_forward: input width " + std::to_string(x.size()) +
                                " does not match network input " + std::to_string(net.input_dim()));
  }
  if (!x.allFinite()) throw std::invalid_argument("mc_forward: non-finite input");
  VectorX<Scalar> v = x;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    switch (layers[i].kind) {
      case LayerKind::kDropout:
        v = v.cwiseProduct(sample_mask<Scalar>(v.size(), layers[i].p_star, rng));
        break;
      case LayerKind::kDense: {
        const auto& d = net.dense(net.dense_slot(i));
        v = (d.W * v + d.b).eval();
        break;
      }
      case LayerKind::kRelu:
        v = v.cwiseMax(Scalar(0));
        break;
    }
  }
  return v;
}

template <class Scalar>
VectorX<Scalar> mc_forward(const Network<Scalar>& net, const VectorX<Scalar>& x, RngStream stream) {
  Rng rng(stream);
  return mc_forward(net, x, rng);
}

// T independent runs; run t draws from stream.sub(t), so the ensemble is
// reproducible run by run regardless of evaluation order.
template <class Scalar>
McEnsemble<Scalar> mc_ensemble(const Network<Scalar>& net, const VectorX<Scalar>& x, Index T, RngStream stream) {
  if (T < 1) throw std::invalid_argument("mc_ensemble: T must be >= 1");
  McEnsemble<Scalar> e;
  e.samples.resize(net.output_dim(), T);
  for (Index t = 0; t < T; ++t) {
    e.samples.col(t) = mc_forward(net, x, stream.sub(static_cast<std::uint64_t>(t)));
  }
  return e;
}

// Sample mean and unbiased sample variance per output node.
template <class Scalar>
MomentVector<Scalar> empirical_moments(const McEnsemble<Scalar>& e) {
  const Index T = e.runs();
  if (T < 2) throw std::invalid_argument("empirical_moments: need at least two runs for a variance");
  MomentVector<Scalar> m;
  m.mean = e.samples.rowwise().mean();
  m.var = (e.samples.colwise() - m.mean).cwiseAbs2().rowwise().sum() / static_cast<Scalar>(T - 1);
  return m;
}

// Batched stochastic pass over the columns of X. Masks are drawn per (node,
// column): distinct inputs see independent dropout noise, as in per-point
// mc_forward. One call is one MC run over the whole batch.
template <class Scalar>
MatrixX<Scalar> mc_forward_batch(const Network<Scalar>& net, const MatrixX<Scalar>& X, Rng& rng) {
  if (X.rows() != net.input_dim()) throw std::invalid_argument("mc_forward_batch: input width mismatch");
  MatrixX<Scalar> v = X;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    switch (layers[i].kind) {
      case LayerKind::kDropout: {
        const double p = layers[i].p_star;
        for (Index c = 0; c < v.cols(); ++c) {
          for (Index r = 0; r < v.rows(); ++r) {
            if (rng.uniform() < p) v(r, c) = Scalar(0);
          }
        }
        break;
      }
      case LayerKind::kDense: {
        const auto& d = net.dense(net.dense_slot(i));
        v = ((d.W * v).colwise() + d.b).eval();
        break;
      }
      case LayerKind::kRelu:
        v = v.cwiseMax(Scalar(0));
        break;
    }
  }
  return v;
}

}  // namespace momentprop
