#pragma once

#include <vector>

#include "spectrai/nn/module.hpp"
#include "spectrai/pipeline/rng.hpp"

namespace spectrai::nn {

/// Kaiming-uniform with a = sqrt(5): U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void kaiming_uniform(Tensor<T>& t, Index fan_in, Rng& rng);

/// Stride-1 convolution with zero "same" padding. Kernel dims must be odd.
/// Rank-3 inputs are convolved along their length with kernel_h == 1.
template <typename T>
class Conv2d : public Module<T> {
 public:
  Conv2d(Index in, Index out, Index kernel_h, Index kernel_w, Rng& rng, bool bias = true);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  Index in_channels() const { return in_; }
  Index out_channels() const { return out_; }

 private:
  Index in_, out_, kh_, kw_;
  bool has_bias_;
  Parameter<T> weight_;  // (out, in, kh, kw)
  Parameter<T> bias_;    // (out)
  Tensor<T> input_;
};

/// Transposed convolution with kernel == stride (non-overlapping upsampling).
template <typename T>
class ConvTranspose2d : public Module<T> {
 public:
  ConvTranspose2d(Index in, Index out, Index stride_h, Index stride_w, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Index in_, out_, sh_, sw_;
  Parameter<T> weight_;  // (in, out, sh, sw)
  Parameter<T> bias_;
  Tensor<T> input_;
};

/// Non-overlapping max pooling; trailing rows/columns that do not fill a
/// window are dropped.
template <typename T>
class MaxPool2d : public Module<T> {
 public:
  MaxPool2d(Index kh, Index kw) : kh_(kh), kw_(kw) {}
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Index kh_, kw_;
  Shape in_shape_;
  std::vector<Index> argmax_;
};

template <typename T>
class BatchNorm : public Module<T> {
 public:
  explicit BatchNorm(Index channels, T momentum = T(0.1), T eps = T(1e-5));
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Index channels_;
  T momentum_, eps_;
  Parameter<T> gamma_, beta_;
  Parameter<T> running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  bool used_batch_stats_ = true;
};

template <typename T>
class ReLU : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Tensor<T> output_;
};

/// (N, C*r*r, H, W) -> (N, C, H*r, W*r); out[c, y*r+a, x*r+b] = in[c*r*r + a*r + b, y, x].
template <typename T>
class PixelShuffle : public Module<T> {
 public:
  explicit PixelShuffle(Index factor = 2) : r_(factor) {}
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Index r_;
};

/// Spatial mean: (N, C, ...) -> (N, C).
template <typename T>
class GlobalAvgPool : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Shape in_shape_;
};

/// Fully connected layer on (N, in).
template <typename T>
class Linear : public Module<T> {
 public:
  Linear(Index in, Index out, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Index in_, out_;
  Parameter<T> weight_;  // (out, in)
  Parameter<T> bias_;
  Tensor<T> input_;
};

/// Result of the channel-attention gate: output and the per-channel gate.
template <typename T>
struct GateResult {
  Tensor<T> output;
  Tensor<T> pooled;  // (N, F) spatial means
  Tensor<T> hidden;  // (N, F/r) pre-activation
  Tensor<T> gate;    // (N, F), values in (0, 1)
};

/// y = x * sigmoid(W2 relu(W1 gap(x) + b1) + b2), broadcast per channel.
/// w1 is (F/r, F), w2 is (F, F/r).
template <typename T>
GateResult<T> channel_attention(const Tensor<T>& x, const Tensor<T>& w1, const Tensor<T>& b1,
                                const Tensor<T>& w2, const Tensor<T>& b2);

template <typename T>
class ChannelAttention : public Module<T> {
 public:
  ChannelAttention(Index features, Index reduction, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

  Parameter<T>& w1() { return w1_; }
  Parameter<T>& b1() { return b1_; }
  Parameter<T>& w2() { return w2_; }
  Parameter<T>& b2() { return b2_; }

 private:
  Index features_, squeezed_;
  Parameter<T> w1_, b1_, w2_, b2_;
  Tensor<T> input_;
  GateResult<T> cache_;
};

template <typename T>
class Sequential : public Module<T> {
 public:
  Sequential() = default;
  Sequential& add(ModulePtr<T> m) {
    this->register_module(std::to_string(layers_.size()), m.get());
    layers_.push_back(std::move(m));
    return *this;
  }
  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> y = x;
    for (auto& l : layers_) y = l->forward(y);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> d = g;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
    return d;
  }
  std::size_t size() const { return layers_.size(); }
  Module<T>& operator[](std::size_t i) { return *layers_[i]; }

 private:
  std::vector<ModulePtr<T>> layers_;
};

/// Reflect-pads the bottom/right edges up to the next multiple of `multiple`
/// (mirror without edge repetition; replicate for length-1 axes).
template <typename T>
Tensor<T> reflect_pad(const Tensor<T>& x, Index multiple_h, Index multiple_w);
/// Adjoint of reflect_pad: folds padded gradient back onto the original grid.
template <typename T>
Tensor<T> reflect_pad_backward(const Tensor<T>& grad, const Shape& original);
/// Top-left crop to the spatial size of `like`.
template <typename T>
Tensor<T> crop_to(const Tensor<T>& x, const Shape& like);
/// Adjoint of crop_to: zero-extends the gradient to `padded`.
template <typename T>
Tensor<T> crop_backward(const Tensor<T>& grad, const Shape& padded);

}  // namespace spectrai::nn
