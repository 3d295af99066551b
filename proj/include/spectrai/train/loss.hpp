#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "spectrai/core/gating.hpp"
#include "spectrai/nn/tensor.hpp"

namespace spectrai::train {

template <typename T>
struct LossResult {
  double value = 0.0;
  nn::Tensor<T> grad;  // d value / d prediction
};

/// mean |p - t|
template <typename T>
LossResult<T> l1_loss(const nn::Tensor<T>& pred, const nn::Tensor<T>& target);

/// mean (p - t)^2
template <typename T>
LossResult<T> mse_loss(const nn::Tensor<T>& pred, const nn::Tensor<T>& target);

/// Mean over non-ignored positions of -log softmax(logits)[label]. Logits are
/// (N, C) or (N, C, spatial...); labels hold N * spatial entries in row-major
/// order.
template <typename T>
LossResult<T> cross_entropy_loss(const nn::Tensor<T>& logits, const std::vector<std::int32_t>& labels,
                                 std::optional<int> ignore_label = std::nullopt);

/// Dispatch on the loss kind: regression losses read `target`, cross-entropy
/// reads `labels`.
template <typename T>
LossResult<T> compute_loss(LossKind kind, const nn::Tensor<T>& pred, const nn::Tensor<T>& target,
                           const std::vector<std::int32_t>& labels, std::optional<int> ignore_label);

/// Per-position softmax over the channel axis.
template <typename T>
nn::Tensor<T> softmax_channels(const nn::Tensor<T>& logits);

}  // namespace spectrai::train
