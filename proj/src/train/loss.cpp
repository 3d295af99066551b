#include "spectrai/train/loss.hpp"

#include <cmath>
#include <string>

namespace spectrai::train {

using nn::Tensor;

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("loss: prediction " + nn::shape_string(a.shape()) + " vs target " + nn::shape_string(b.shape()));
}

}  // namespace

template <typename T>
LossResult<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same(pred, target);
  LossResult<T> r{0.0, Tensor<T>(pred.shape())};
  const auto d = (pred.flat() - target.flat()).eval();
  r.value = d.abs().template cast<double>().sum() / static_cast<double>(pred.size());
  r.grad.flat() = d.sign() / T(pred.size());
  return r;
}

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same(pred, target);
  LossResult<T> r{0.0, Tensor<T>(pred.shape())};
  const auto d = (pred.flat() - target.flat()).eval();
  r.value = d.square().template cast<double>().sum() / static_cast<double>(pred.size());
  r.grad.flat() = d * T(2.0 / static_cast<double>(pred.size()));
  return r;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  Tensor<T> out(logits.shape());
  const Index C = logits.channels(), P = logits.plane_size();
  for (Index n = 0; n < logits.batch(); ++n) {
    const auto z = logits.sample(n);
    auto o = out.sample(n);
    for (Index p = 0; p < P; ++p) {
      const T mx = z.col(p).maxCoeff();
      T s = 0;
      for (Index c = 0; c < C; ++c) s += (o(c, p) = std::exp(z(c, p) - mx));
      o.col(p) /= s;
    }
  }
  return out;
}

template <typename T>
LossResult<T> cross_entropy_loss(const Tensor<T>& logits, const std::vector<std::int32_t>& labels,
                                 std::optional<int> ignore) {
  const Index C = logits.channels(), P = logits.plane_size();
  if (static_cast<Index>(labels.size()) != logits.batch() * P)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     nn::shape_string(logits.shape()));
  LossResult<T> r{0.0, softmax_channels(logits)};
  Index support = 0;
  double total = 0.0;
  for (Index n = 0; n < logits.batch(); ++n) {
    const auto z = logits.sample(n);
    auto g = r.grad.sample(n);
    for (Index p = 0; p < P; ++p) {
      const std::int32_t y = labels[static_cast<std::size_t>(n * P + p)];
      if (ignore && y == *ignore) {
        g.col(p).setZero();
        continue;
      }
      if (y < 0 || y >= C) throw LabelError("label " + std::to_string(y) + " outside [0, " + std::to_string(C) + ")");
      const double mx = static_cast<double>(z.col(p).maxCoeff());
      double s = 0;
      for (Index c = 0; c < C; ++c) s += std::exp(static_cast<double>(z(c, p)) - mx);
      total += mx + std::log(s) - static_cast<double>(z(y, p));
      g(y, p) -= T(1);
      ++support;
    }
  }
  if (support == 0) throw LabelError("empty loss support");
  r.value = total / static_cast<double>(support);
  r.grad.flat() /= T(support);
  return r;
}

template <typename T>
LossResult<T> compute_loss(LossKind kind, const Tensor<T>& pred, const Tensor<T>& target,
                           const std::vector<std::int32_t>& labels, std::optional<int> ignore) {
  switch (kind) {
    case LossKind::L1: return l1_loss(pred, target);
    case LossKind::Mse: return mse_loss(pred, target);
    case LossKind::CrossEntropy: return cross_entropy_loss(pred, labels, ignore);
  }
  throw ConfigError("unknown loss");
}

#define SPECTRAI_INSTANTIATE(T)                                                                        \
  template LossResult<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&);                               \
  template LossResult<T> mse_loss<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template LossResult<T> cross_entropy_loss<T>(const Tensor<T>&, const std::vector<std::int32_t>&,     \
                                               std::optional<int>);                                    \
  template LossResult<T> compute_loss<T>(LossKind, const Tensor<T>&, const Tensor<T>&,                 \
                                         const std::vector<std::int32_t>&, std::optional<int>);        \
  template Tensor<T> softmax_channels<T>(const Tensor<T>&);

SPECTRAI_INSTANTIATE(float)
SPECTRAI_INSTANTIATE(double)

#undef SPECTRAI_INSTANTIATE

}  // namespace spectrai::train
