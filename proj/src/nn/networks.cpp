#include "spectrai/nn/networks.hpp"

#include <string>

namespace spectrai::nn {

void NetworkConfig::validate() const {
  if (in_channels < 1 || out_channels < 1) throw ConfigError("network channel counts must be >= 1");
  if (depth < 1 || base_channels < 1) throw ConfigError("network depth and base_channels must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("network kernel must be odd and >= 1");
  if (family == NetworkFamily::HyperRCAN) {
    const auto& r = rcan;
    if (r.groups < 1 || r.blocks_per_group < 1 || r.features < 1 || r.reduction < 1)
      throw ConfigError("rcan counts must be >= 1");
    if (r.features % r.reduction != 0)
      throw ConfigError("rcan reduction " + std::to_string(r.reduction) + " must divide features " +
                        std::to_string(r.features));
    if (r.scale != 2 && r.scale != 4 && r.scale != 8) throw ConfigError("rcan scale must be 2, 4 or 8");
  }
}

NetworkConfig default_network_config(NetworkFamily family, Index in_channels, Index out_channels) {
  NetworkConfig c;
  c.family = family;
  c.in_channels = in_channels;
  c.out_channels = out_channels;
  c.depth = 4;
  c.base_channels = 64;
  c.kernel = 3;
  if (family == NetworkFamily::ResUNet1D || family == NetworkFamily::SpectralCNN1D) c.in_channels = 1;
  if (family == NetworkFamily::ResUNet1D) c.out_channels = 1;
  if (family == NetworkFamily::HyperRCAN) c.out_channels = in_channels;
  return c;
}

// ---------------------------------------------------------------------------

template <typename T>
DoubleConv<T>::DoubleConv(Index in, Index out, Index kh, Index kw, Rng& rng) {
  body_.add(std::make_unique<Conv2d<T>>(in, out, kh, kw, rng));
  body_.add(std::make_unique<BatchNorm<T>>(out));
  body_.add(std::make_unique<ReLU<T>>());
  body_.add(std::make_unique<Conv2d<T>>(out, out, kh, kw, rng));
  body_.add(std::make_unique<BatchNorm<T>>(out));
  body_.add(std::make_unique<ReLU<T>>());
  this->register_module("body", &body_);
}

template <typename T>
ResidualBlock<T>::ResidualBlock(Index in, Index out, Index kh, Index kw, Rng& rng) {
  main_.add(std::make_unique<Conv2d<T>>(in, out, kh, kw, rng));
  main_.add(std::make_unique<BatchNorm<T>>(out));
  main_.add(std::make_unique<ReLU<T>>());
  main_.add(std::make_unique<Conv2d<T>>(out, out, kh, kw, rng));
  main_.add(std::make_unique<BatchNorm<T>>(out));
  this->register_module("main", &main_);
  if (in != out) {
    shortcut_ = std::make_unique<Conv2d<T>>(in, out, 1, 1, rng);
    this->register_module("shortcut", shortcut_.get());
  }
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = main_.forward(x);
  y += shortcut_ ? shortcut_->forward(x) : x;
  return out_relu_.forward(y);
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& g) {
  const Tensor<T> gy = out_relu_.backward(g);
  Tensor<T> gx = main_.backward(gy);
  gx += shortcut_ ? shortcut_->backward(gy) : gy;
  return gx;
}

template <typename T>
Rcab<T>::Rcab(Index features, Index reduction, Index kernel, Rng& rng) {
  body_.add(std::make_unique<Conv2d<T>>(features, features, kernel, kernel, rng));
  body_.add(std::make_unique<ReLU<T>>());
  body_.add(std::make_unique<Conv2d<T>>(features, features, kernel, kernel, rng));
  body_.add(std::make_unique<ChannelAttention<T>>(features, reduction, rng));
  this->register_module("body", &body_);
}

template <typename T>
ResidualGroup<T>::ResidualGroup(Index features, Index reduction, int blocks, Index kernel, Rng& rng) {
  for (int b = 0; b < blocks; ++b) body_.add(std::make_unique<Rcab<T>>(features, reduction, kernel, rng));
  body_.add(std::make_unique<Conv2d<T>>(features, features, kernel, kernel, rng));
  this->register_module("body", &body_);
}

// ---------------------------------------------------------------------------
// UNet

template <typename T>
UNet<T>::UNet(const UNetOptions& o, Rng& rng) : options_(o) {
  const Index kh = o.one_d ? 1 : o.kernel, kw = o.kernel;
  const Index ph = o.one_d ? 1 : 2;
  auto block = [&](Index in, Index out) -> ModulePtr<T> {
    if (o.residual_blocks) return std::make_unique<ResidualBlock<T>>(in, out, kh, kw, rng);
    return std::make_unique<DoubleConv<T>>(in, out, kh, kw, rng);
  };
  const Index F = o.base_channels;
  encoders_.push_back(block(o.in_channels, F));
  for (int d = 1; d <= o.depth; ++d) {
    pools_.push_back(std::make_unique<MaxPool2d<T>>(ph, 2));
    encoders_.push_back(block(F << (d - 1), F << d));
  }
  for (int d = 0; d <= o.depth; ++d) this->register_module("enc" + std::to_string(d), encoders_[d].get());
  skip_channels_.resize(static_cast<std::size_t>(o.depth));
  if (o.classifier) {
    gap_ = std::make_unique<GlobalAvgPool<T>>();
    fc_ = std::make_unique<Linear<T>>(F << o.depth, o.out_channels, rng);
    this->register_module("fc", fc_.get());
    return;
  }
  for (int d = 1; d <= o.depth; ++d) {
    ups_.push_back(std::make_unique<ConvTranspose2d<T>>(F << d, F << (d - 1), ph, 2, rng));
    decoders_.push_back(block(F << d, F << (d - 1)));
    this->register_module("up" + std::to_string(d), ups_.back().get());
    this->register_module("dec" + std::to_string(d), decoders_.back().get());
    skip_channels_[static_cast<std::size_t>(d - 1)] = F << (d - 1);
  }
  head_ = std::make_unique<Conv2d<T>>(F, o.out_channels, 1, 1, rng);
  this->register_module("head", head_.get());
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& x) {
  const Index div = divisor();
  input_shape_ = x.shape();
  Tensor<T> xp;
  const bool divisible = (x.height() % (options_.one_d ? 1 : div) == 0) && (x.width() % div == 0);
  if (!divisible && !options_.pad_input)
    throw ShapeError("input spatial dims " + shape_string(x.shape()) + " must be divisible by " +
                     std::to_string(div) + " (padding disabled)");
  xp = divisible ? x : reflect_pad(x, options_.one_d ? 1 : div, div);
  padded_shape_ = xp.shape();

  std::vector<Tensor<T>> skips;
  Tensor<T> h = encoders_[0]->forward(xp);
  for (int d = 1; d <= options_.depth; ++d) {
    if (!options_.classifier) skips.push_back(h);
    h = encoders_[static_cast<std::size_t>(d)]->forward(pools_[static_cast<std::size_t>(d - 1)]->forward(h));
  }
  if (options_.classifier) return fc_->forward(gap_->forward(h));
  for (int d = options_.depth; d >= 1; --d) {
    const auto i = static_cast<std::size_t>(d - 1);
    h = decoders_[i]->forward(concat_channels(ups_[i]->forward(h), skips[i]));
  }
  Tensor<T> out = crop_to(head_->forward(h), input_shape_);
  if (options_.global_residual) out += x;
  return out;
}

template <typename T>
Tensor<T> UNet<T>::backward(const Tensor<T>& g) {
  Tensor<T> gh;
  std::vector<Tensor<T>> skip_grads(static_cast<std::size_t>(options_.depth));
  if (options_.classifier) {
    gh = gap_->backward(fc_->backward(g));
  } else {
    gh = head_->backward(crop_backward(g, padded_shape_));
    for (int d = 1; d <= options_.depth; ++d) {
      const auto i = static_cast<std::size_t>(d - 1);
      Tensor<T> gc = decoders_[i]->backward(gh);
      auto [gu, gs] = split_channels(gc, gc.channels() - skip_channels_[i]);
      skip_grads[i] = std::move(gs);
      gh = ups_[i]->backward(gu);
    }
  }
  for (int d = options_.depth; d >= 1; --d) {
    const auto i = static_cast<std::size_t>(d - 1);
    gh = pools_[i]->backward(encoders_[static_cast<std::size_t>(d)]->backward(gh));
    if (!options_.classifier) gh += skip_grads[i];
  }
  Tensor<T> gx = reflect_pad_backward(encoders_[0]->backward(gh), input_shape_);
  if (options_.global_residual) gx += g;
  return gx;
}

// ---------------------------------------------------------------------------
// HyperRCAN

template <typename T>
HyperRcan<T>::HyperRcan(Index bands, const RcanConfig& cfg, Index kernel, Rng& rng) {
  const Index F = cfg.features;
  head_ = std::make_unique<Conv2d<T>>(bands, F, kernel, kernel, rng);
  for (int g = 0; g < cfg.groups; ++g)
    body_.add(std::make_unique<ResidualGroup<T>>(F, cfg.reduction, cfg.blocks_per_group, kernel, rng));
  body_.add(std::make_unique<Conv2d<T>>(F, F, kernel, kernel, rng));
  for (int s = cfg.scale; s > 1; s /= 2) {
    upsampler_.add(std::make_unique<Conv2d<T>>(F, 4 * F, kernel, kernel, rng));
    upsampler_.add(std::make_unique<PixelShuffle<T>>(2));
  }
  tail_ = std::make_unique<Conv2d<T>>(F, bands, kernel, kernel, rng);
  this->register_module("head", head_.get());
  this->register_module("body", &body_);
  this->register_module("upsampler", &upsampler_);
  this->register_module("tail", tail_.get());
}

template <typename T>
Tensor<T> HyperRcan<T>::forward(const Tensor<T>& x) {
  Tensor<T> shallow = head_->forward(x);
  Tensor<T> deep = body_.forward(shallow);
  deep += shallow;
  return tail_->forward(upsampler_.forward(deep));
}

template <typename T>
Tensor<T> HyperRcan<T>::backward(const Tensor<T>& g) {
  Tensor<T> gdeep = upsampler_.backward(tail_->backward(g));
  Tensor<T> gshallow = body_.backward(gdeep);
  gshallow += gdeep;
  return head_->backward(gshallow);
}

// ---------------------------------------------------------------------------
// SpectralCNN1D

template <typename T>
SpectralCnn<T>::SpectralCnn(Index classes, int stages, int base_channels, Index kernel, Rng& rng)
    : stages_(stages) {
  Index in = 1;
  for (int s = 0; s < stages; ++s) {
    const Index out = Index{base_channels} << std::min(s, 2);
    body_.add(std::make_unique<Conv2d<T>>(in, out, 1, kernel, rng));
    body_.add(std::make_unique<BatchNorm<T>>(out));
    body_.add(std::make_unique<ReLU<T>>());
    body_.add(std::make_unique<MaxPool2d<T>>(1, 2));
    in = out;
  }
  body_.add(std::make_unique<GlobalAvgPool<T>>());
  body_.add(std::make_unique<Linear<T>>(in, classes, rng));
  this->register_module("body", &body_);
}

// ---------------------------------------------------------------------------

template <typename T>
Network<T>::Network(TaskKind task, NetworkConfig config, std::unique_ptr<Module<T>> root)
    : task_(task), config_(std::move(config)), root_(std::move(root)) {}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x) {
  const auto& c = config_;
  const bool one_d = c.family == NetworkFamily::ResUNet1D || c.family == NetworkFamily::SpectralCNN1D;
  const Index rank = one_d ? 3 : 4;
  if (x.rank() != rank || x.channels() != c.in_channels)
    throw ShapeError(std::string(to_string(c.family)) + " expects input (N," + std::to_string(c.in_channels) +
                     (one_d ? ",L)" : ",H,W)") + ", got " + shape_string(x.shape()));
  if (c.family == NetworkFamily::SpectralCNN1D && x.width() < (Index{1} << c.depth))
    throw ShapeError("SpectralCNN1D needs length >= " + std::to_string(Index{1} << c.depth));
  return root_->forward(x);
}

template <typename T>
Index Network<T>::count_parameters() {
  Index n = 0;
  for (auto& [_, p] : root_->parameters())
    if (p->trainable) n += p->value.size();
  return n;
}

template <typename T>
Network<T> build_network(TaskKind task, const NetworkConfig& config, std::uint64_t seed) {
  require_family(task, config.family);
  config.validate();
  Rng rng(seed);
  std::unique_ptr<Module<T>> root;
  switch (config.family) {
    case NetworkFamily::UNet2D: {
      UNetOptions o;
      o.in_channels = config.in_channels;
      o.out_channels = config.out_channels;
      o.depth = config.depth;
      o.base_channels = config.base_channels;
      o.kernel = config.kernel;
      o.pad_input = config.pad_input;
      o.classifier = task == TaskKind::ImageClassification;
      o.global_residual = task == TaskKind::ImageDenoising;
      if (o.global_residual && o.in_channels != o.out_channels)
        throw ConfigError("image denoising needs out_channels == in_channels");
      root = std::make_unique<UNet<T>>(o, rng);
      break;
    }
    case NetworkFamily::ResUNet1D: {
      if (config.in_channels != 1 || config.out_channels != 1)
        throw ConfigError("ResUNet1D takes (N,1,L) spectra: in/out channels must be 1");
      UNetOptions o;
      o.depth = config.depth;
      o.base_channels = config.base_channels;
      o.kernel = config.kernel;
      o.pad_input = config.pad_input;
      o.one_d = true;
      o.residual_blocks = true;
      o.global_residual = true;
      root = std::make_unique<UNet<T>>(o, rng);
      break;
    }
    case NetworkFamily::HyperRCAN:
      if (config.out_channels != config.in_channels)
        throw ConfigError("HyperRCAN maps bands to bands: out_channels must equal in_channels");
      root = std::make_unique<HyperRcan<T>>(config.in_channels, config.rcan, config.kernel, rng);
      break;
    case NetworkFamily::SpectralCNN1D:
      if (config.in_channels != 1) throw ConfigError("SpectralCNN1D takes (N,1,L) spectra: in_channels must be 1");
      root = std::make_unique<SpectralCnn<T>>(config.out_channels, config.depth, config.base_channels,
                                              config.kernel, rng);
      break;
  }
  return Network<T>(task, config, std::move(root));
}

#define SPECTRAI_INSTANTIATE(T)                                                  \
  template class DoubleConv<T>;                                                 \
  template class ResidualBlock<T>;                                              \
  template class Rcab<T>;                                                       \
  template class ResidualGroup<T>;                                              \
  template class UNet<T>;                                                       \
  template class HyperRcan<T>;                                                  \
  template class SpectralCnn<T>;                                                \
  template class Network<T>;                                                    \
  template Network<T> build_network<T>(TaskKind, const NetworkConfig&, std::uint64_t);

SPECTRAI_INSTANTIATE(float)
SPECTRAI_INSTANTIATE(double)

#undef SPECTRAI_INSTANTIATE

}  // namespace spectrai::nn
