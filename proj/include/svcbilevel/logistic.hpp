#pragma once

#include <cmath>

namespace svcbilevel {

// Branch-stable scalar pieces of the logistic model. None of these evaluates
// e^t for t > 0; everything goes through e^{-|t|} <= 1.

/// log(1 + e^t)
template <typename Scalar>
Scalar softplus(Scalar t) {
  using std::exp;
  using std::log1p;
  return t > Scalar(0) ? t + log1p(exp(-t)) : log1p(exp(t));
}

/// 1 / (1 + e^{-t})
template <typename Scalar>
Scalar sigmoid(Scalar t) {
  using std::exp;
  if (t >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-t));
  const Scalar e = exp(t);
  return e / (Scalar(1) + e);
}

/// (1 - e^{-t}) / (1 + e^{-t}) = tanh(t/2). Odd by construction.
template <typename Scalar>
Scalar h_logistic(Scalar t) {
  using std::exp;
  const Scalar e = exp(-std::abs(t));
  const Scalar v = (Scalar(1) - e) / (Scalar(1) + e);
  return t < Scalar(0) ? -v : v;
}

/// e^t / (1 + e^t)^2 = sigmoid(t) sigmoid(-t). Even in t, lies in (0, 1/4].
template <typename Scalar>
Scalar logistic_curvature(Scalar t) {
  using std::exp;
  const Scalar e = exp(-std::abs(t));
  const Scalar d = Scalar(1) + e;
  return e / (d * d);
}

/// e^{-t}(e^{-t} - 1) / (1 + e^{-t})^3, the derivative of logistic_curvature.
/// Equals -logistic_curvature(t) * h_logistic(t).
template <typename Scalar>
Scalar logistic_curvature_slope(Scalar t) {
  return -logistic_curvature(t) * h_logistic(t);
}

}  // namespace svcbilevel
