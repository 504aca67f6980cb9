#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "momentprop/mc.hpp"
#include "momentprop/types.hpp"

namespace momentprop {

inline constexpr double kLogTwoPi = 1.8378770664093453;

// Collapsed predictive distribution N(mean, var + 1/tau): `var` is the model
// (epistemic) variance of the predicted mean, 1/tau the observation noise.
template <class Scalar>
struct PredictiveGaussian {
  Scalar mean = 0;
  Scalar var = 0;
  Scalar tau = 1;

  void check_invariants() const {
    if (!(var >= Scalar(0))) throw std::invalid_argument("predictive gaussian: negative model variance");
    if (!(tau > Scalar(0))) throw std::invalid_argument("predictive gaussian: tau must be positive");
  }
};

// Negative log-likelihood of y under the equal-weight Gaussian mixture with
// component means mu_t and precision tau, evaluated with log-sum-exp so that
// far-out targets underflow gracefully instead of producing -log(0).
template <class Scalar>
Scalar mc_nll(const VectorX<Scalar>& mus, Scalar y, Scalar tau) {
  if (!(tau > Scalar(0))) throw std::invalid_argument("mc_nll: tau must be positive");
  const Index T = mus.size();
  if (T < 1) throw std::invalid_argument("mc_nll: empty ensemble");
  VectorX<Scalar> exponents = -Scalar(0.5) * tau * (mus.array() - y).square();
  const Scalar m = exponents.maxCoeff();
  const Scalar lse = m + std::log((exponents.array() - m).exp().sum());
  return -(lse - std::log(static_cast<Scalar>(T)) + Scalar(0.5) * std::log(tau) -
           Scalar(0.5) * static_cast<Scalar>(kLogTwoPi));
}

template <class Scalar>
Scalar mc_nll(const McEnsemble<Scalar>& e, Scalar y, Scalar tau) {
  if (e.width() != 1) throw std::invalid_argument("mc_nll: ensemble must have a single output node");
  return mc_nll(VectorX<Scalar>(e.samples.row(0).transpose()), y, tau);
}

// Closed-form negative log-likelihood -log N(y; mean, var + 1/tau).
template <class Scalar>
Scalar mp_nll(const PredictiveGaussian<Scalar>& p, Scalar y) {
  p.check_invariants();
  const Scalar total_var = p.var + Scalar(1) / p.tau;
  const Scalar d = y - p.mean;
  return Scalar(0.5) * (static_cast<Scalar>(kLogTwoPi) + std::log(total_var)) + d * d / (Scalar(2) * total_var);
}

template <class Scalar>
Scalar rmse(const VectorX<Scalar>& predictions, const VectorX<Scalar>& targets) {
  if (predictions.size() != targets.size()) throw std::invalid_argument("rmse: length mismatch");
  if (predictions.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((predictions - targets).squaredNorm() / static_cast<Scalar>(predictions.size()));
}

// Model-uncertainty band mean +/- k * sd. Uses the model variance only; the
// observation noise 1/tau is deliberately not included.
template <class Scalar>
std::pair<Scalar, Scalar> predictive_interval(Scalar mean, Scalar var, Scalar k) {
  if (!(k > Scalar(0))) throw std::invalid_argument("predictive_interval: k must be positive");
  if (!(var >= Scalar(0))) throw std::invalid_argument("predictive_interval: negative variance");
  const Scalar half = k * std::sqrt(var);
  return {mean - half, mean + half};
}

}  // namespace momentprop
