#include "spectrai/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spectrai/pipeline/filters.hpp"

namespace spectrai::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

template <typename T>
void kaiming_uniform(Tensor<T>& t, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in, 1)));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
}

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Upper bound on im2col buffer elements per chunk.
constexpr Index kColumnBudget = Index{1} << 23;

template <typename T>
void im2col(const T* x, Index C, Index H, Index W, Index kh, Index kw, T* cols, Index ld) {
  const Index ph = kh / 2, pw = kw / 2;
  for (Index c = 0; c < C; ++c)
    for (Index ky = 0; ky < kh; ++ky)
      for (Index kx = 0; kx < kw; ++kx) {
        T* dst = cols + ((c * kh + ky) * kw + kx) * ld;
        const Index dx = kx - pw;
        const Index lo = std::max<Index>(0, -dx), hi = std::min<Index>(W, W - dx);
        for (Index y = 0; y < H; ++y) {
          T* d = dst + y * W;
          const Index sy = y + ky - ph;
          if (sy < 0 || sy >= H || lo >= hi) {
            std::fill(d, d + W, T(0));
            continue;
          }
          const T* src = x + (c * H + sy) * W;
          std::fill(d, d + lo, T(0));
          std::copy(src + lo + dx, src + hi + dx, d + lo);
          std::fill(d + hi, d + W, T(0));
        }
      }
}

template <typename T>
void col2im(const T* cols, Index ld, Index C, Index H, Index W, Index kh, Index kw, T* dx_out) {
  const Index ph = kh / 2, pw = kw / 2;
  for (Index c = 0; c < C; ++c)
    for (Index ky = 0; ky < kh; ++ky)
      for (Index kx = 0; kx < kw; ++kx) {
        const T* src = cols + ((c * kh + ky) * kw + kx) * ld;
        const Index dx = kx - pw;
        const Index lo = std::max<Index>(0, -dx), hi = std::min<Index>(W, W - dx);
        for (Index y = 0; y < H; ++y) {
          const Index sy = y + ky - ph;
          if (sy < 0 || sy >= H) continue;
          T* d = dx_out + (c * H + sy) * W + dx;
          const T* s = src + y * W;
          for (Index xx = lo; xx < hi; ++xx) d[xx] += s[xx];
        }
      }
}

Shape with_channels(const Shape& s, Index c) {
  Shape out = s;
  out[1] = c;
  return out;
}

template <typename T>
void check_spatial(const Tensor<T>& x, Index channels, const char* who) {
  if (x.rank() != 3 && x.rank() != 4)
    throw ShapeError(std::string(who) + ": expected rank 3 or 4 input, got " + shape_string(x.shape()));
  if (x.channels() != channels)
    throw ShapeError(std::string(who) + ": expected " + std::to_string(channels) + " channels, got " +
                     shape_string(x.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(Index in, Index out, Index kernel_h, Index kernel_w, Rng& rng, bool bias)
    : in_(in), out_(out), kh_(kernel_h), kw_(kernel_w), has_bias_(bias),
      weight_({out, in, kernel_h, kernel_w}), bias_({out}) {
  if (kh_ % 2 == 0 || kw_ % 2 == 0) throw ShapeError("Conv2d kernel dims must be odd");
  const Index fan_in = in * kh_ * kw_;
  kaiming_uniform(weight_.value, fan_in, rng);
  this->register_parameter("weight", &weight_);
  if (has_bias_) {
    kaiming_uniform(bias_.value, fan_in, rng);
    this->register_parameter("bias", &bias_);
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  check_spatial(x, in_, "Conv2d");
  if (x.rank() == 3 && kh_ != 1) throw ShapeError("Conv2d: rank-3 input needs kernel height 1");
  input_ = x;
  const Index N = x.batch(), H = x.height(), W = x.width(), P = H * W, K = in_ * kh_ * kw_;
  Tensor<T> out(with_channels(x.shape(), out_));
  Eigen::Map<const RowMatrix<T>> wmat(weight_.value.data(), out_, K);
  auto bias = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias_.value.data(), out_);

  if (kh_ == 1 && kw_ == 1) {
    for (Index n = 0; n < N; ++n) {
      auto o = out.sample(n);
      o.noalias() = wmat * x.sample(n);
      if (has_bias_) o.colwise() += bias;
    }
    return out;
  }
  const Index chunk = std::clamp<Index>(kColumnBudget / std::max<Index>(K * P, 1), 1, N);
  RowMatrix<T> cols(K, chunk * P);
  RowMatrix<T> y(out_, chunk * P);
  for (Index n0 = 0; n0 < N; n0 += chunk) {
    const Index cnt = std::min(chunk, N - n0);
    for (Index i = 0; i < cnt; ++i)
      im2col(x.data() + (n0 + i) * x.sample_size(), in_, H, W, kh_, kw_, cols.data() + i * P, chunk * P);
    y.noalias() = wmat * cols;
    for (Index i = 0; i < cnt; ++i) {
      auto o = out.sample(n0 + i);
      o = y.middleCols(i * P, P);
      if (has_bias_) o.colwise() += bias;
    }
  }
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& g) {
  const Tensor<T>& x = input_;
  const Index N = x.batch(), H = x.height(), W = x.width(), P = H * W, K = in_ * kh_ * kw_;
  Tensor<T> dx(x.shape());
  Eigen::Map<const RowMatrix<T>> wmat(weight_.value.data(), out_, K);
  Eigen::Map<RowMatrix<T>> dw(weight_.grad.data(), out_, K);
  auto db = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias_.grad.data(), out_);

  if (kh_ == 1 && kw_ == 1) {
    for (Index n = 0; n < N; ++n) {
      dw.noalias() += g.sample(n) * x.sample(n).transpose();
      if (has_bias_) db += g.sample(n).rowwise().sum();
      dx.sample(n).noalias() = wmat.transpose() * g.sample(n);
    }
    return dx;
  }
  const Index chunk = std::clamp<Index>(kColumnBudget / std::max<Index>(K * P, 1), 1, N);
  RowMatrix<T> cols(K, chunk * P);
  RowMatrix<T> gm(out_, chunk * P);
  RowMatrix<T> dcols(K, chunk * P);
  for (Index n0 = 0; n0 < N; n0 += chunk) {
    const Index cnt = std::min(chunk, N - n0);
    if (cnt < chunk) {
      cols.setZero();
      gm.setZero();
    }
    for (Index i = 0; i < cnt; ++i) {
      im2col(x.data() + (n0 + i) * x.sample_size(), in_, H, W, kh_, kw_, cols.data() + i * P, chunk * P);
      gm.middleCols(i * P, P) = g.sample(n0 + i);
    }
    dw.noalias() += gm * cols.transpose();
    if (has_bias_) db += gm.rowwise().sum();
    dcols.noalias() = wmat.transpose() * gm;
    for (Index i = 0; i < cnt; ++i)
      col2im(dcols.data() + i * P, chunk * P, in_, H, W, kh_, kw_, dx.data() + (n0 + i) * x.sample_size());
  }
  return dx;
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(Index in, Index out, Index stride_h, Index stride_w, Rng& rng)
    : in_(in), out_(out), sh_(stride_h), sw_(stride_w), weight_({in, out, stride_h, stride_w}), bias_({out}) {
  kaiming_uniform(weight_.value, in, rng);
  kaiming_uniform(bias_.value, in, rng);
  this->register_parameter("weight", &weight_);
  this->register_parameter("bias", &bias_);
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x) {
  check_spatial(x, in_, "ConvTranspose2d");
  if (x.rank() == 3 && sh_ != 1) throw ShapeError("ConvTranspose2d: rank-3 input needs stride height 1");
  input_ = x;
  const Index N = x.batch(), H = x.height(), W = x.width(), P = H * W, R = out_ * sh_ * sw_;
  Shape s = x.shape();
  s[1] = out_;
  if (x.rank() == 4) {
    s[2] = H * sh_;
    s[3] = W * sw_;
  } else {
    s[2] = W * sw_;
  }
  Tensor<T> out(s);
  Eigen::Map<const RowMatrix<T>> wt(weight_.value.data(), in_, R);
  RowMatrix<T> z(R, P);
  const Index OW = W * sw_;
  for (Index n = 0; n < N; ++n) {
    z.noalias() = wt.transpose() * x.sample(n);
    T* o = out.data() + n * out.sample_size();
    for (Index co = 0; co < out_; ++co)
      for (Index a = 0; a < sh_; ++a)
        for (Index b = 0; b < sw_; ++b) {
          const T* zr = z.data() + ((co * sh_ + a) * sw_ + b) * P;
          for (Index y = 0; y < H; ++y)
            for (Index xx = 0; xx < W; ++xx)
              o[(co * H * sh_ + y * sh_ + a) * OW + xx * sw_ + b] = zr[y * W + xx] + bias_.value[co];
        }
  }
  return out;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& g) {
  const Tensor<T>& x = input_;
  const Index N = x.batch(), H = x.height(), W = x.width(), P = H * W, R = out_ * sh_ * sw_;
  const Index OW = W * sw_;
  Tensor<T> dx(x.shape());
  Eigen::Map<const RowMatrix<T>> wt(weight_.value.data(), in_, R);
  Eigen::Map<RowMatrix<T>> dwt(weight_.grad.data(), in_, R);
  RowMatrix<T> dz(R, P);
  for (Index n = 0; n < N; ++n) {
    const T* gs = g.data() + n * g.sample_size();
    for (Index co = 0; co < out_; ++co)
      for (Index a = 0; a < sh_; ++a)
        for (Index b = 0; b < sw_; ++b) {
          T* zr = dz.data() + ((co * sh_ + a) * sw_ + b) * P;
          for (Index y = 0; y < H; ++y)
            for (Index xx = 0; xx < W; ++xx) {
              const T v = gs[(co * H * sh_ + y * sh_ + a) * OW + xx * sw_ + b];
              zr[y * W + xx] = v;
              bias_.grad[co] += v;
            }
        }
    dwt.noalias() += x.sample(n) * dz.transpose();
    dx.sample(n).noalias() = wt * dz;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2d

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x) {
  if (x.rank() == 3 && kh_ != 1) throw ShapeError("MaxPool2d: rank-3 input needs kernel height 1");
  const Index N = x.batch(), C = x.channels(), H = x.height(), W = x.width();
  const Index OH = H / kh_, OW = W / kw_;
  if (OH < 1 || OW < 1) throw ShapeError("MaxPool2d: input " + shape_string(x.shape()) + " smaller than window");
  in_shape_ = x.shape();
  Shape s = x.shape();
  if (x.rank() == 4) {
    s[2] = OH;
    s[3] = OW;
  } else {
    s[2] = OW;
  }
  Tensor<T> out(s);
  argmax_.assign(static_cast<std::size_t>(out.size()), 0);
  Index o = 0;
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c) {
      const Index base = (n * C + c) * H * W;
      for (Index y = 0; y < OH; ++y)
        for (Index xx = 0; xx < OW; ++xx, ++o) {
          Index best = base + (y * kh_) * W + xx * kw_;
          for (Index a = 0; a < kh_; ++a)
            for (Index b = 0; b < kw_; ++b) {
              const Index idx = base + (y * kh_ + a) * W + xx * kw_ + b;
              if (x[idx] > x[best]) best = idx;
            }
          out[o] = x[best];
          argmax_[static_cast<std::size_t>(o)] = best;
        }
    }
  return out;
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& g) {
  Tensor<T> dx(in_shape_);
  for (Index o = 0; o < g.size(); ++o) dx[argmax_[static_cast<std::size_t>(o)]] += g[o];
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(Index channels, T momentum, T eps)
    : channels_(channels), momentum_(momentum), eps_(eps), gamma_({channels}), beta_({channels}),
      running_mean_({channels}, false), running_var_({channels}, false) {
  gamma_.value.fill(T(1));
  running_var_.value.fill(T(1));
  this->register_parameter("gamma", &gamma_);
  this->register_parameter("beta", &beta_);
  this->register_parameter("running_mean", &running_mean_);
  this->register_parameter("running_var", &running_var_);
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x) {
  check_spatial(x, channels_, "BatchNorm");
  const Index N = x.batch(), C = channels_, P = x.plane_size();
  const Index M = N * P;
  Tensor<T> out(x.shape());
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(static_cast<std::size_t>(C), T(0));
  used_batch_stats_ = this->training();
  for (Index c = 0; c < C; ++c) {
    T mean, var;
    if (used_batch_stats_) {
      double s = 0, ss = 0;
      for (Index n = 0; n < N; ++n) {
        const auto row = x.sample(n).row(c);
        s += static_cast<double>(row.sum());
      }
      const double m = s / static_cast<double>(M);
      for (Index n = 0; n < N; ++n) ss += static_cast<double>((x.sample(n).row(c).array() - static_cast<T>(m)).square().sum());
      const double v = ss / static_cast<double>(M);
      mean = static_cast<T>(m);
      var = static_cast<T>(v);
      const double unbiased = M > 1 ? ss / static_cast<double>(M - 1) : v;
      running_mean_.value[c] = (T(1) - momentum_) * running_mean_.value[c] + momentum_ * mean;
      running_var_.value[c] = (T(1) - momentum_) * running_var_.value[c] + momentum_ * static_cast<T>(unbiased);
    } else {
      mean = running_mean_.value[c];
      var = running_var_.value[c];
    }
    const T inv = T(1) / std::sqrt(var + eps_);
    inv_std_[static_cast<std::size_t>(c)] = inv;
    for (Index n = 0; n < N; ++n) {
      auto xh = xhat_.sample(n).row(c);
      xh = (x.sample(n).row(c).array() - mean) * inv;
      out.sample(n).row(c) = xh.array() * gamma_.value[c] + beta_.value[c];
    }
  }
  return out;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& g) {
  const Index N = g.batch(), C = channels_, P = g.plane_size();
  const T M = static_cast<T>(N * P);
  Tensor<T> dx(g.shape());
  for (Index c = 0; c < C; ++c) {
    T sum_g = 0, sum_gx = 0;
    for (Index n = 0; n < N; ++n) {
      sum_g += g.sample(n).row(c).sum();
      sum_gx += (g.sample(n).row(c).array() * xhat_.sample(n).row(c).array()).sum();
    }
    gamma_.grad[c] += sum_gx;
    beta_.grad[c] += sum_g;
    const T gamma = gamma_.value[c];
    const T inv = inv_std_[static_cast<std::size_t>(c)];
    for (Index n = 0; n < N; ++n) {
      if (used_batch_stats_) {
        dx.sample(n).row(c) = (gamma * inv / M) *
                              (M * g.sample(n).row(c).array() - sum_g - xhat_.sample(n).row(c).array() * sum_gx);
      } else {
        dx.sample(n).row(c) = g.sample(n).row(c) * (gamma * inv);
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Element-wise and reshaping layers

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x) {
  output_ = x;
  output_.flat() = output_.flat().max(T(0));
  return output_;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& g) {
  Tensor<T> dx(g.shape());
  dx.flat() = (output_.flat() > T(0)).select(g.flat(), T(0));
  return dx;
}

template <typename T>
Tensor<T> PixelShuffle<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("PixelShuffle expects (N,C,H,W), got " + shape_string(x.shape()));
  const Index rr = r_ * r_;
  if (x.channels() % rr != 0)
    throw ShapeError("PixelShuffle: channel count " + std::to_string(x.channels()) + " not divisible by " +
                     std::to_string(rr));
  const Index N = x.batch(), C = x.channels() / rr, H = x.height(), W = x.width();
  Tensor<T> out({N, C, H * r_, W * r_});
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c)
      for (Index a = 0; a < r_; ++a)
        for (Index b = 0; b < r_; ++b)
          for (Index y = 0; y < H; ++y)
            for (Index xx = 0; xx < W; ++xx)
              out.at(n, c, y * r_ + a, xx * r_ + b) = x.at(n, c * rr + a * r_ + b, y, xx);
  return out;
}

template <typename T>
Tensor<T> PixelShuffle<T>::backward(const Tensor<T>& g) {
  const Index rr = r_ * r_;
  const Index N = g.batch(), C = g.channels(), H = g.height() / r_, W = g.width() / r_;
  Tensor<T> dx({N, C * rr, H, W});
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c)
      for (Index a = 0; a < r_; ++a)
        for (Index b = 0; b < r_; ++b)
          for (Index y = 0; y < H; ++y)
            for (Index xx = 0; xx < W; ++xx)
              dx.at(n, c * rr + a * r_ + b, y, xx) = g.at(n, c, y * r_ + a, xx * r_ + b);
  return dx;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x) {
  in_shape_ = x.shape();
  Tensor<T> out({x.batch(), x.channels()});
  for (Index n = 0; n < x.batch(); ++n) {
    const auto s = x.sample(n);
    for (Index c = 0; c < x.channels(); ++c) out[n * x.channels() + c] = s.row(c).mean();
  }
  return out;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& g) {
  Tensor<T> dx(in_shape_);
  const T inv = T(1) / static_cast<T>(dx.plane_size());
  for (Index n = 0; n < dx.batch(); ++n) {
    auto s = dx.sample(n);
    for (Index c = 0; c < dx.channels(); ++c) s.row(c).setConstant(g[n * dx.channels() + c] * inv);
  }
  return dx;
}

template <typename T>
Linear<T>::Linear(Index in, Index out, Rng& rng) : in_(in), out_(out), weight_({out, in}), bias_({out}) {
  kaiming_uniform(weight_.value, in, rng);
  kaiming_uniform(bias_.value, in, rng);
  this->register_parameter("weight", &weight_);
  this->register_parameter("bias", &bias_);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(1) != in_)
    throw ShapeError("Linear expects (N," + std::to_string(in_) + "), got " + shape_string(x.shape()));
  input_ = x;
  const Index N = x.batch();
  Tensor<T> out({N, out_});
  Eigen::Map<const RowMatrix<T>> X(x.data(), N, in_);
  Eigen::Map<const RowMatrix<T>> Wm(weight_.value.data(), out_, in_);
  Eigen::Map<RowMatrix<T>> Y(out.data(), N, out_);
  Y.noalias() = X * Wm.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.data(), out_);
  return out;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& g) {
  const Index N = g.batch();
  Eigen::Map<const RowMatrix<T>> G(g.data(), N, out_);
  Eigen::Map<const RowMatrix<T>> X(input_.data(), N, in_);
  Eigen::Map<const RowMatrix<T>> Wm(weight_.value.data(), out_, in_);
  Eigen::Map<RowMatrix<T>>(weight_.grad.data(), out_, in_).noalias() += G.transpose() * X;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.grad.data(), out_) += G.colwise().sum();
  Tensor<T> dx({N, in_});
  Eigen::Map<RowMatrix<T>>(dx.data(), N, in_).noalias() = G * Wm;
  return dx;
}

// ---------------------------------------------------------------------------
// Channel attention

template <typename T>
GateResult<T> channel_attention(const Tensor<T>& x, const Tensor<T>& w1, const Tensor<T>& b1,
                                const Tensor<T>& w2, const Tensor<T>& b2) {
  if (x.rank() != 4 && x.rank() != 3) throw ShapeError("channel_attention expects a feature map");
  const Index N = x.batch(), F = x.channels();
  if (w1.rank() != 2 || w1.dim(1) != F || w2.rank() != 2 || w2.dim(0) != F || w2.dim(1) != w1.dim(0) ||
      b1.size() != w1.dim(0) || b2.size() != F)
    throw ShapeError("channel_attention: weight shapes do not match " + std::to_string(F) + " features");
  const Index S = w1.dim(0);
  GateResult<T> r{Tensor<T>(x.shape()), Tensor<T>({N, F}), Tensor<T>({N, S}), Tensor<T>({N, F})};
  Eigen::Map<const RowMatrix<T>> W1(w1.data(), S, F), W2(w2.data(), F, S);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> B1(b1.data(), S), B2(b2.data(), F);
  for (Index n = 0; n < N; ++n) {
    const auto xs = x.sample(n);
    Eigen::Matrix<T, Eigen::Dynamic, 1> z = xs.rowwise().mean();
    Eigen::Matrix<T, Eigen::Dynamic, 1> a = W1 * z + B1;
    Eigen::Matrix<T, Eigen::Dynamic, 1> s = a.cwiseMax(T(0));
    Eigen::Matrix<T, Eigen::Dynamic, 1> u = W2 * s + B2;
    Eigen::Matrix<T, Eigen::Dynamic, 1> gate = (T(1) / (T(1) + (-u.array()).exp())).matrix();
    for (Index c = 0; c < F; ++c) {
      r.pooled[n * F + c] = z[c];
      r.gate[n * F + c] = gate[c];
    }
    for (Index k = 0; k < S; ++k) r.hidden[n * S + k] = a[k];
    r.output.sample(n) = gate.asDiagonal() * xs;
  }
  return r;
}

template <typename T>
ChannelAttention<T>::ChannelAttention(Index features, Index reduction, Rng& rng)
    : features_(features), squeezed_(reduction > 0 ? features / reduction : 0) {
  if (reduction < 1 || features % reduction != 0 || squeezed_ < 1)
    throw ShapeError("channel attention: reduction " + std::to_string(reduction) + " must divide " +
                     std::to_string(features));
  w1_ = Parameter<T>({squeezed_, features_});
  b1_ = Parameter<T>({squeezed_});
  w2_ = Parameter<T>({features_, squeezed_});
  b2_ = Parameter<T>({features_});
  kaiming_uniform(w1_.value, features_, rng);
  kaiming_uniform(b1_.value, features_, rng);
  kaiming_uniform(w2_.value, squeezed_, rng);
  this->register_parameter("w1", &w1_);
  this->register_parameter("b1", &b1_);
  this->register_parameter("w2", &w2_);
  this->register_parameter("b2", &b2_);
}

template <typename T>
Tensor<T> ChannelAttention<T>::forward(const Tensor<T>& x) {
  input_ = x;
  cache_ = channel_attention(x, w1_.value, b1_.value, w2_.value, b2_.value);
  return cache_.output;
}

template <typename T>
Tensor<T> ChannelAttention<T>::backward(const Tensor<T>& g) {
  const Index N = input_.batch(), F = features_, S = squeezed_;
  const T inv_p = T(1) / static_cast<T>(input_.plane_size());
  Eigen::Map<const RowMatrix<T>> W1(w1_.value.data(), S, F), W2(w2_.value.data(), F, S);
  Eigen::Map<RowMatrix<T>> dW1(w1_.grad.data(), S, F), dW2(w2_.grad.data(), F, S);
  Tensor<T> dx(input_.shape());
  for (Index n = 0; n < N; ++n) {
    const auto xs = input_.sample(n);
    const auto gs = g.sample(n);
    Eigen::Matrix<T, Eigen::Dynamic, 1> gate(F), dgate(F), z(F), a(S);
    for (Index c = 0; c < F; ++c) {
      gate[c] = cache_.gate[n * F + c];
      z[c] = cache_.pooled[n * F + c];
      dgate[c] = gs.row(c).dot(xs.row(c));
    }
    for (Index k = 0; k < S; ++k) a[k] = cache_.hidden[n * S + k];
    const Eigen::Matrix<T, Eigen::Dynamic, 1> du = (dgate.array() * gate.array() * (T(1) - gate.array())).matrix();
    const Eigen::Matrix<T, Eigen::Dynamic, 1> s = a.cwiseMax(T(0));
    dW2.noalias() += du * s.transpose();
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(b2_.grad.data(), F) += du;
    const Eigen::Matrix<T, Eigen::Dynamic, 1> ds = W2.transpose() * du;
    const Eigen::Matrix<T, Eigen::Dynamic, 1> da = (a.array() > T(0)).select(ds.array(), T(0)).matrix();
    dW1.noalias() += da * z.transpose();
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(b1_.grad.data(), S) += da;
    const Eigen::Matrix<T, Eigen::Dynamic, 1> dz = W1.transpose() * da;
    auto dxs = dx.sample(n);
    dxs = gate.asDiagonal() * gs;
    dxs.colwise() += dz * inv_p;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Padding helpers

template <typename T>
Tensor<T> reflect_pad(const Tensor<T>& x, Index multiple_h, Index multiple_w) {
  const Index H = x.height(), W = x.width();
  const Index PH = (H + multiple_h - 1) / multiple_h * multiple_h;
  const Index PW = (W + multiple_w - 1) / multiple_w * multiple_w;
  if (PH == H && PW == W) return x;
  Shape s = x.shape();
  if (x.rank() == 4) {
    s[2] = PH;
    s[3] = PW;
  } else {
    s[2] = PW;
  }
  Tensor<T> out(s);
  for (Index n = 0; n < x.batch(); ++n)
    for (Index c = 0; c < x.channels(); ++c)
      for (Index y = 0; y < PH; ++y)
        for (Index xx = 0; xx < PW; ++xx)
          out.at(n, c, y, xx) = x.at(n, c, mirror_index(y, H), mirror_index(xx, W));
  return out;
}

template <typename T>
Tensor<T> reflect_pad_backward(const Tensor<T>& g, const Shape& original) {
  if (g.shape() == original) return g;
  Tensor<T> dx(original);
  const Index H = dx.height(), W = dx.width();
  for (Index n = 0; n < g.batch(); ++n)
    for (Index c = 0; c < g.channels(); ++c)
      for (Index y = 0; y < g.height(); ++y)
        for (Index xx = 0; xx < g.width(); ++xx)
          dx.at(n, c, mirror_index(y, H), mirror_index(xx, W)) += g.at(n, c, y, xx);
  return dx;
}

template <typename T>
Tensor<T> crop_to(const Tensor<T>& x, const Shape& like) {
  Shape s = x.shape();
  if (x.rank() == 4) {
    s[2] = like[2];
    s[3] = like[3];
  } else {
    s[2] = like[2];
  }
  if (s == x.shape()) return x;
  Tensor<T> out(s);
  for (Index n = 0; n < out.batch(); ++n)
    for (Index c = 0; c < out.channels(); ++c)
      for (Index y = 0; y < out.height(); ++y)
        for (Index xx = 0; xx < out.width(); ++xx) out.at(n, c, y, xx) = x.at(n, c, y, xx);
  return out;
}

template <typename T>
Tensor<T> crop_backward(const Tensor<T>& g, const Shape& padded) {
  Shape s = padded;
  s[1] = g.channels();
  if (s == g.shape()) return g;
  Tensor<T> dx(s);
  for (Index n = 0; n < g.batch(); ++n)
    for (Index c = 0; c < g.channels(); ++c)
      for (Index y = 0; y < g.height(); ++y)
        for (Index xx = 0; xx < g.width(); ++xx) dx.at(n, c, y, xx) = g.at(n, c, y, xx);
  return dx;
}

#define SPECTRAI_INSTANTIATE(T)                                                                   \
  template void kaiming_uniform<T>(Tensor<T>&, Index, Rng&);                                     \
  template class Conv2d<T>;                                                                      \
  template class ConvTranspose2d<T>;                                                             \
  template class MaxPool2d<T>;                                                                   \
  template class BatchNorm<T>;                                                                   \
  template class ReLU<T>;                                                                        \
  template class PixelShuffle<T>;                                                                \
  template class GlobalAvgPool<T>;                                                               \
  template class Linear<T>;                                                                      \
  template class ChannelAttention<T>;                                                            \
  template GateResult<T> channel_attention<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                              const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> reflect_pad<T>(const Tensor<T>&, Index, Index);                             \
  template Tensor<T> reflect_pad_backward<T>(const Tensor<T>&, const Shape&);                    \
  template Tensor<T> crop_to<T>(const Tensor<T>&, const Shape&);                                 \
  template Tensor<T> crop_backward<T>(const Tensor<T>&, const Shape&);

SPECTRAI_INSTANTIATE(float)
SPECTRAI_INSTANTIATE(double)

#undef SPECTRAI_INSTANTIATE

}  // namespace spectrai::nn
