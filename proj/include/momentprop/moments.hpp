#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "momentprop/network.hpp"
#include "momentprop/types.hpp"

namespace momentprop {

// Per-node expectation and variance of the activation signal at one layer
// boundary. Covariances between nodes are not tracked: propagation is
// diagonal-only throughout.
template <class Scalar>
struct MomentVector {
  VectorX<Scalar> mean;
  VectorX<Scalar> var;

  Index size() const { return mean.size(); }

  void check_invariants() const {
    if (mean.size() != var.size()) throw std::invalid_argument("moment vector: mean/var length mismatch");
    if (mean.size() == 0) throw std::invalid_argument("moment vector: empty");
    if (!mean.allFinite() || !var.allFinite()) throw std::invalid_argument("moment vector: non-finite entries");
    if ((var.array() < Scalar(0)).any()) throw std::invalid_argument("moment vector: negative variance");
  }
};

inline constexpr double kVarianceFloor = 1e-12;  // below this, a node is treated as deterministic
inline constexpr double kReluSaturation = 8.0;   // |mean/sd| beyond which the ReLU transform saturates

template <class Scalar>
Scalar standard_normal_pdf(Scalar r) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return static_cast<Scalar>(kInvSqrt2Pi * std::exp(-0.5 * static_cast<double>(r) * static_cast<double>(r)));
}

template <class Scalar>
Scalar standard_normal_cdf(Scalar r) {
  constexpr double kInvSqrt2 = 0.7071067811865476;
  return static_cast<Scalar>(0.5 * std::erfc(-static_cast<double>(r) * kInvSqrt2));
}

// Entry point of a moment pass: a deterministic observation has zero variance.
template <class Scalar>
MomentVector<Scalar> lift(const VectorX<Scalar>& x) {
  if (x.size() == 0) throw std::invalid_argument("lift: empty input");
  if (!x.allFinite()) throw std::invalid_argument("lift: non-finite input");
  return MomentVector<Scalar>{x, VectorX<Scalar>::Zero(x.size())};
}

// Moments after multiplying each node independently by a Bernoulli keep mask
// with drop probability p_star. The variance expands via the product rule for
// independent variables, V(XY) = V(X)V(Y) + V(X)E^2(Y) + E^2(X)V(Y), with
// E(Y) = 1 - p_star and V(Y) = p_star (1 - p_star). This is the only
// transform that creates variance.
template <class Scalar>
MomentVector<Scalar> dropout_moments(const MomentVector<Scalar>& m, double p_star) {
  if (!(p_star >= 0.0 && p_star <= 1.0)) {
    throw std::invalid_argument("dropout_moments: p_star out of [0, 1]: " + std::to_string(p_star));
  }
  const Scalar keep = static_cast<Scalar>(1.0 - p_star);
  const Scalar pq = static_cast<Scalar>(p_star) * keep;
  MomentVector<Scalar> out;
  out.mean = m.mean * keep;
  out.var = m.var * pq + m.var * keep * keep + m.mean.cwiseAbs2() * pq;
  return out;
}

// Moments after an affine map W x + b, assuming independent inputs: the mean
// is mapped exactly by linearity, the variance picks up squared weights.
template <class Scalar>
MomentVector<Scalar> dense_moments(const MomentVector<Scalar>& m, const MatrixX<Scalar>& W,
                                   const VectorX<Scalar>& b) {
  if (m.mean.size() != W.cols()) {
    throw std::invalid_argument("dense_moments: moment width " + std::to_string(m.mean.size()) +
                                " does not match weight columns " + std::to_string(W.cols()));
  }
  if (b.size() != W.rows()) throw std::invalid_argument("dense_moments: bias length mismatch");
  MomentVector<Scalar> out;
  out.mean = W * m.mean + b;
  out.var = W.cwiseAbs2() * m.var;
  return out;
}

// Mean and variance of max(0, X) for X ~ N(mean, var), the rectified-Gaussian
// moments. Degenerate variance falls back to the exact deterministic limit
// (max(mean, 0), 0); beyond |r| = 8 the transform is saturated: identity for
// far-positive means, zero for far-negative ones. The closed form cancels
// catastrophically for large |r|, so the variance is clamped at zero.
template <class Scalar>
std::pair<Scalar, Scalar> rectified_gaussian_moments(Scalar mean, Scalar var) {
  if (!(var >= Scalar(0))) throw std::invalid_argument("rectified_gaussian_moments: negative variance");
  if (var < static_cast<Scalar>(kVarianceFloor)) {
    return {mean > Scalar(0) ? mean : Scalar(0), Scalar(0)};
  }
  const Scalar sd = std::sqrt(var);
  const Scalar r = mean / sd;
  if (r > static_cast<Scalar>(kReluSaturation)) return {mean, var};
  if (r < -static_cast<Scalar>(kReluSaturation)) return {Scalar(0), Scalar(0)};
  const Scalar cdf = standard_normal_cdf(r);
  const Scalar pdf = standard_normal_pdf(r);
  const Scalar out_mean = mean * cdf + sd * pdf;
  Scalar out_var = (mean * mean + var) * cdf + mean * sd * pdf - out_mean * out_mean;
  if (out_var < Scalar(0)) out_var = Scalar(0);
  return {out_mean, out_var};
}

template <class Scalar>
MomentVector<Scalar> relu_moments(const MomentVector<Scalar>& m) {
  MomentVector<Scalar> out;
  out.mean.resize(m.size());
  out.var.resize(m.size());
  for (Index i = 0; i < m.size(); ++i) {
    const auto mv = rectified_gaussian_moments(m.mean(i), m.var(i));
    out.mean(i) = mv.first;
    out.var(i) = mv.second;
  }
  return out;
}

// Single forward pass of the moment approximation: folds the lifted input
// through each layer's transform in network order. No randomness involved.
template <class Scalar>
MomentVector<Scalar> propagate_moments(const Network<Scalar>& net, const VectorX<Scalar>& x) {
  if (x.size() != net.input_dim()) {
    throw std::invalid_argument("propagate_moments: input width " + std::to_string(x.size()) +
                                " does not match network input " + std::to_string(net.input_dim()));
  }
  MomentVector<Scalar> m = lift(x);
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    switch (layers[i].kind) {
      case LayerKind::kDropout:
        m = dropout_moments(m, layers[i].p_star);
        break;
      case LayerKind::kDense: {
        const auto& d = net.dense(net.dense_slot(i));
        m = dense_moments(m, d.W, d.b);
        break;
      }
      case LayerKind::kRelu:
        m = relu_moments(m);
        break;
    }
  }
  return m;
}

// Batched variant: columns of X are independent inputs, propagated together.
// Used by the benchmark harness; column j of the result equals
// propagate_moments(net, X.col(j)).
template <class Scalar>
std::pair<MatrixX<Scalar>, MatrixX<Scalar>> propagate_moments_batch(const Network<Scalar>& net,
                                                                    const MatrixX<Scalar>& X) {
  if (X.rows() != net.input_dim()) throw std::invalid_argument("propagate_moments_batch: input width mismatch");
  MatrixX<Scalar> mean = X;
  MatrixX<Scalar> var = MatrixX<Scalar>::Zero(X.rows(), X.cols());
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    switch (layers[i].kind) {
      case LayerKind::kDropout: {
        const Scalar keep = static_cast<Scalar>(1.0 - layers[i].p_star);
        const Scalar pq = static_cast<Scalar>(layers[i].p_star) * keep;
        var = (var * pq + var * keep * keep + mean.cwiseAbs2() * pq).eval();
        mean *= keep;
        break;
      }
      case LayerKind::kDense: {
        const auto& d = net.dense(net.dense_slot(i));
        mean = ((d.W * mean).colwise() + d.b).eval();
        var = (d.W.cwiseAbs2() * var).eval();
        break;
      }
      case LayerKind::kRelu: {
        for (Index c = 0; c < mean.cols(); ++c) {
          for (Index r = 0; r < mean.rows(); ++r) {
            const auto mv = rectified_gaussian_moments(mean(r, c), var(r, c));
            mean(r, c) = mv.first;
            var(r, c) = mv.second;
          }
        }
        break;
      }
    }
  }
  return {std::move(mean), std::move(var)};
}

}  // namespace momentprop
