#pragma once

#include <cmath>
#include <functional>

#include "spectrai/nn/module.hpp"
#include "spectrai/pipeline/rng.hpp"

namespace spectrai::testing {

using nn::Tensor;

inline Tensor<double> random_tensor(nn::Shape shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = scale * rng.uniform(-1.0, 1.0);
  return t;
}

/// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(const Tensor<double>& a, const Tensor<double>& b) {
  const double diff = (a.flat() - b.flat()).matrix().norm();
  const double den = std::max(a.flat().matrix().norm(), b.flat().matrix().norm());
  return den == 0.0 ? 0.0 : diff / den;
}

struct GradCheck {
  double input_error = 0.0;
  double param_error = 0.0;  // over all trainable parameters stacked
};

/// Scalar loss L = sum(w * f(x)) with fixed random w. Compares the module's
/// backward pass with central differences for the input and every trainable
/// parameter.
inline GradCheck grad_check(nn::Module<double>& m, Tensor<double> x, Rng& rng, double eps = 1e-6) {
  Tensor<double> y = m.forward(x);
  const Tensor<double> w = random_tensor(y.shape(), rng);
  auto loss = [&](const Tensor<double>& in) {
    const Tensor<double> out = m.forward(in);
    return (out.flat() * w.flat()).sum();
  };
  m.zero_grad();
  m.forward(x);
  const Tensor<double> gx = m.backward(w);

  GradCheck r;
  Tensor<double> nx(x.shape());
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x[i];
    x[i] = v + eps;
    const double lp = loss(x);
    x[i] = v - eps;
    const double lm = loss(x);
    x[i] = v;
    nx[i] = (lp - lm) / (2 * eps);
  }
  r.input_error = relative_error(gx, nx);

  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (auto& [name, p] : m.parameters()) {
    if (!p->trainable) continue;
    const Tensor<double> analytic = p->grad;
    for (Index i = 0; i < p->value.size(); ++i) {
      const double v = p->value[i];
      p->value[i] = v + eps;
      const double lp = loss(x);
      p->value[i] = v - eps;
      const double lm = loss(x);
      p->value[i] = v;
      const double numeric = (lp - lm) / (2 * eps);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
  }
  const double den = std::sqrt(std::max(a2, n2));
  r.param_error = den == 0.0 ? 0.0 : std::sqrt(diff2) / den;
  return r;
}

}  // namespace spectrai::testing
