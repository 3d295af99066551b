#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spectrai/core/gating.hpp"
#include "spectrai/nn/layers.hpp"

namespace spectrai::nn {

struct RcanConfig {
  int groups = 5;
  int blocks_per_group = 5;
  int features = 64;
  int reduction = 16;
  int scale = 8;
  friend bool operator==(const RcanConfig&, const RcanConfig&) = default;
};

struct NetworkConfig {
  NetworkFamily family = NetworkFamily::UNet2D;
  Index in_channels = 1;   // bands for cube networks; 1 for spectrum networks
  Index out_channels = 1;  // classes or bands
  int depth = 4;           // UNet family and SpectralCNN1D stages
  int base_channels = 64;
  int kernel = 3;
  /// Reflect-pad UNet inputs up to a multiple of 2^depth and crop back.
  bool pad_input = true;
  RcanConfig rcan;

  /// Counts >= 1, reduction divides features, scale a power of two.
  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Defaults for a family: UNet2D D=4 F=64; ResUNet1D D=4 F=64;
/// HyperRCAN G=5 B=5 F=64 r=16; SpectralCNN1D 4 stages F=64.
NetworkConfig default_network_config(NetworkFamily family, Index in_channels, Index out_channels);

// ---------------------------------------------------------------------------
// Building blocks

/// conv-bn-relu-conv-bn-relu.
template <typename T>
class DoubleConv : public Module<T> {
 public:
  DoubleConv(Index in, Index out, Index kh, Index kw, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override { return body_.forward(x); }
  Tensor<T> backward(const Tensor<T>& g) override { return body_.backward(g); }

 private:
  Sequential<T> body_;
};

/// relu(bn(conv(relu(bn(conv(x))))) + shortcut(x)); the shortcut is a 1x1
/// convolution when channel counts differ.
template <typename T>
class ResidualBlock : public Module<T> {
 public:
  ResidualBlock(Index in, Index out, Index kh, Index kw, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& g) override;

 private:
  Sequential<T> main_;
  std::unique_ptr<Conv2d<T>> shortcut_;
  ReLU<T> out_relu_;
};

/// Residual channel-attention block: x + CA(conv(relu(conv(x)))).
template <typename T>
class Rcab : public Module<T> {
 public:
  Rcab(Index features, Index reduction, Index kernel, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override { return x + body_.forward(x); }
  Tensor<T> backward(const Tensor<T>& g) override { return g + body_.backward(g); }

 private:
  Sequential<T> body_;
};

/// x + conv(RCAB^B(x)).
template <typename T>
class ResidualGroup : public Module<T> {
 public:
  ResidualGroup(Index features, Index reduction, int blocks, Index kernel, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override { return x + body_.forward(x); }
  Tensor<T> backward(const Tensor<T>& g) override { return g + body_.backward(g); }

 private:
  Sequential<T> body_;
};

// ---------------------------------------------------------------------------
// Networks

struct UNetOptions {
  Index in_channels = 1;
  Index out_channels = 1;
  int depth = 4;
  int base_channels = 64;
  int kernel = 3;
  bool one_d = false;            // (N,C,L) inputs with (1,k) kernels
  bool residual_blocks = false;  // ResUNet blocks instead of double convs
  bool classifier = false;       // encoder + global pooling + linear head
  bool global_residual = false;  // add the input to the output
  bool pad_input = true;
};

/// Encoder-decoder with skip concatenation. Serves UNet2D (segmentation,
/// image denoising, image classification via the encoder) and ResUNet1D.
template <typename T>
class UNet : public Module<T> {
 public:
  UNet(const UNetOptions& options, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& g) override;
  Index divisor() const { return Index{1} << options_.depth; }

 private:
  UNetOptions options_;
  std::vector<ModulePtr<T>> encoders_;
  std::vector<std::unique_ptr<MaxPool2d<T>>> pools_;
  std::vector<std::unique_ptr<ConvTranspose2d<T>>> ups_;
  std::vector<ModulePtr<T>> decoders_;
  std::unique_ptr<Conv2d<T>> head_;
  std::unique_ptr<GlobalAvgPool<T>> gap_;
  std::unique_ptr<Linear<T>> fc_;
  Shape input_shape_, padded_shape_;
  std::vector<Index> skip_channels_;
};

/// Hyperspectral RCAN: shallow conv, residual groups with a long skip,
/// log2(S) conv + pixel-shuffle stages, reconstruction conv.
template <typename T>
class HyperRcan : public Module<T> {
 public:
  HyperRcan(Index bands, const RcanConfig& cfg, Index kernel, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& g) override;

  Module<T>& head() { return *head_; }
  Module<T>& body() { return body_; }
  Module<T>& upsampler() { return upsampler_; }
  Module<T>& tail() { return *tail_; }

 private:
  std::unique_ptr<Conv2d<T>> head_;
  Sequential<T> body_;  // groups followed by a conv
  Sequential<T> upsampler_;
  std::unique_ptr<Conv2d<T>> tail_;
};

/// Stacked conv-bn-relu-pool stages, global average pooling, linear head.
template <typename T>
class SpectralCnn : public Module<T> {
 public:
  SpectralCnn(Index classes, int stages, int base_channels, Index kernel, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override { return body_.forward(x); }
  Tensor<T> backward(const Tensor<T>& g) override { return body_.backward(g); }
  int stages() const { return stages_; }

 private:
  int stages_;
  Sequential<T> body_;
};

// ---------------------------------------------------------------------------

/// A built network: the family's module plus its input contract.
template <typename T>
class Network {
 public:
  Network(TaskKind task, NetworkConfig config, std::unique_ptr<Module<T>> root);

  /// Checks the input against the family's contract before running.
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& g) { return root_->backward(g); }

  void set_training(bool on) { root_->set_training(on); }
  bool training() const { return root_->training(); }
  void zero_grad() { root_->zero_grad(); }
  ParameterList<T> parameters() { return root_->parameters(); }
  /// Trainable scalars (buffers excluded).
  Index count_parameters();

  TaskKind task() const { return task_; }
  const NetworkConfig& config() const { return config_; }
  Module<T>& root() { return *root_; }

  /// Output spatial scale (S for HyperRCAN, 1 otherwise).
  int scale() const { return config_.family == NetworkFamily::HyperRCAN ? config_.rcan.scale : 1; }

 private:
  TaskKind task_;
  NetworkConfig config_;
  std::unique_ptr<Module<T>> root_;
};

/// Builds an initialized network; throws GateError when the family is not
/// suitable for the task.
template <typename T>
Network<T> build_network(TaskKind task, const NetworkConfig& config, std::uint64_t seed = 0);

template <typename T>
Index count_parameters(Network<T>& net) {
  return net.count_parameters();
}

}  // namespace spectrai::nn
