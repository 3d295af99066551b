#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string_view>

#include "spectrai/core/types.hpp"

namespace spectrai {

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

enum class NormalizeMode { MinMax, Max, Area, L2, ZScore };

std::string_view to_string(NormalizeMode mode);
NormalizeMode parse_normalize_mode(std::string_view text);

template <typename T>
struct Normalized {
  T value;
  bool degenerate = false;
};

/// Normalizes one spectrum given as a vector. Degenerate inputs (constant
/// under minmax/zscore, zero norm/sum/peak otherwise) yield zeros.
template <typename Derived>
Normalized<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>> normalize_vector(
    const Eigen::MatrixBase<Derived>& v, NormalizeMode mode) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Array<double, Eigen::Dynamic, 1> x = v.template cast<double>().array();
  const Index n = x.size();
  Eigen::Array<double, Eigen::Dynamic, 1> y;
  bool degenerate = false;
  switch (mode) {
    case NormalizeMode::MinMax: {
      const double lo = x.minCoeff(), hi = x.maxCoeff();
      degenerate = !(hi > lo);
      if (!degenerate) y = (x - lo) / (hi - lo);
      break;
    }
    case NormalizeMode::Max: {
      const double hi = x.maxCoeff();
      degenerate = !(hi > 0);
      if (!degenerate) y = x / hi;
      break;
    }
    case NormalizeMode::Area: {
      const double s = x.sum();
      degenerate = s == 0.0;
      if (!degenerate) y = x / s;
      break;
    }
    case NormalizeMode::L2: {
      const double norm = std::sqrt(x.square().sum());
      degenerate = norm == 0.0;
      if (!degenerate) y = x / norm;
      break;
    }
    case NormalizeMode::ZScore: {
      const double mean = x.mean();
      const double sd = std::sqrt((x - mean).square().sum() / static_cast<double>(n));
      degenerate = !(sd > 0);
      if (!degenerate) y = (x - mean) / sd;
      break;
    }
  }
  if (degenerate) return {Vector::Zero(n), true};
  return {y.matrix().template cast<Scalar>(), false};
}

template <typename Scalar>
Normalized<BasicSpectrum<Scalar>> normalize(const BasicSpectrum<Scalar>& s, NormalizeMode mode) {
  auto r = normalize_vector(s.values(), mode);
  return {BasicSpectrum<Scalar>(std::move(r.value), s.axis()), r.degenerate};
}

/// Cubes are normalized per pixel spectrum; `degenerate` is set if any pixel was.
template <typename Scalar>
Normalized<BasicHypercube<Scalar>> normalize(const BasicHypercube<Scalar>& cube, NormalizeMode mode) {
  typename BasicHypercube<Scalar>::Matrix m(cube.pixel_count(), cube.bands());
  bool degenerate = false;
  for (Index r = 0; r < cube.pixel_count(); ++r) {
    auto out = normalize_vector(cube.pixels().row(r).transpose(), mode);
    degenerate = degenerate || out.degenerate;
    m.row(r) = out.value.transpose();
  }
  return {BasicHypercube<Scalar>(cube.height(), cube.width(), std::move(m), cube.axis(), cube.name()),
          degenerate};
}

/// Whole-cube min-max scaling to [0, 1] (one range for every band).
Hypercube minmax_cube(const Hypercube& cube);

// ---------------------------------------------------------------------------
// Savitzky-Golay
// ---------------------------------------------------------------------------

struct SavGolParams {
  int window = 9;
  int polyorder = 3;
  void validate() const;
};

/// Smoothing weights: the value at the window centre of the least-squares
/// polynomial fit, as a linear combination of the window samples.
Eigen::VectorXd savgol_coefficients(const SavGolParams& params);

/// Mirror index (reflect about the edge samples, edge not repeated).
inline Index mirror_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> savgol_filter(
    const Eigen::MatrixBase<Derived>& signal, const SavGolParams& params) {
  params.validate();
  const Index n = signal.size();
  if (n < params.window) throw RangeError("spectrum shorter than window");
  const Eigen::VectorXd c = savgol_coefficients(params);
  const Index half = params.window / 2;
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out(n);
  for (Index i = 0; i < n; ++i) {
    double acc = 0;
    for (Index k = -half; k <= half; ++k)
      acc += c[k + half] * static_cast<double>(signal(mirror_index(i + k, n)));
    out[i] = static_cast<typename Derived::Scalar>(acc);
  }
  return out;
}

template <typename Scalar>
BasicSpectrum<Scalar> savitzky_golay(const BasicSpectrum<Scalar>& s, const SavGolParams& params) {
  return BasicSpectrum<Scalar>(savgol_filter(s.values(), params), s.axis());
}

// ---------------------------------------------------------------------------
// Bicubic resampling
// ---------------------------------------------------------------------------

/// Catmull-Rom cubic convolution kernel (a = -0.5).
inline double cubic_kernel(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1) return ((a + 2) * t - (a + 3)) * t * t + 1;
  if (t < 2) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
  return 0;
}

struct ResampleTap {
  std::array<Index, 4> index;
  std::array<double, 4> weight;
};

/// Taps for mapping in_size samples onto out_size samples with half-pixel
/// centres (src = (dst + 0.5) * in/out - 0.5), edges clamped.
std::vector<ResampleTap> bicubic_taps(Index in_size, Index out_size);

/// Resizes a 2-D grid to out_h x out_w.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bicubic_resize(
    const Eigen::MatrixBase<Derived>& image, Index out_h, Index out_w) {
  using Scalar = typename Derived::Scalar;
  if (out_h < 1 || out_w < 1) throw RangeError("bicubic_resize: target dims must be >= 1");
  const auto ty = bicubic_taps(image.rows(), out_h);
  const auto tx = bicubic_taps(image.cols(), out_w);
  Eigen::MatrixXd tmp(image.rows(), out_w);
  for (Index y = 0; y < image.rows(); ++y)
    for (Index x = 0; x < out_w; ++x) {
      double acc = 0;
      for (int k = 0; k < 4; ++k) acc += tx[x].weight[k] * static_cast<double>(image(y, tx[x].index[k]));
      tmp(y, x) = acc;
    }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(out_h, out_w);
  for (Index y = 0; y < out_h; ++y)
    for (Index x = 0; x < out_w; ++x) {
      double acc = 0;
      for (int k = 0; k < 4; ++k) acc += ty[y].weight[k] * tmp(ty[y].index[k], x);
      out(y, x) = static_cast<Scalar>(acc);
    }
  return out;
}

/// Band-by-band bicubic resize of a cube.
template <typename Scalar>
BasicHypercube<Scalar> bicubic_resize(const BasicHypercube<Scalar>& cube, Index out_h, Index out_w) {
  if (out_h < 1 || out_w < 1) throw RangeError("bicubic_resize: target dims must be >= 1");
  const Index H = cube.height(), W = cube.width(), B = cube.bands();
  const auto ty = bicubic_taps(H, out_h);
  const auto tx = bicubic_taps(W, out_w);
  const Eigen::MatrixXd src = cube.pixels().template cast<double>();
  Eigen::MatrixXd tmp(H * out_w, B);
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < out_w; ++x) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(B);
      for (int k = 0; k < 4; ++k) acc += tx[x].weight[k] * src.row(y * W + tx[x].index[k]);
      tmp.row(y * out_w + x) = acc;
    }
  typename BasicHypercube<Scalar>::Matrix out(out_h * out_w, B);
  for (Index y = 0; y < out_h; ++y)
    for (Index x = 0; x < out_w; ++x) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(B);
      for (int k = 0; k < 4; ++k) acc += ty[y].weight[k] * tmp.row(ty[y].index[k] * out_w + x);
      out.row(y * out_w + x) = acc.template cast<Scalar>();
    }
  return BasicHypercube<Scalar>(out_h, out_w, std::move(out), cube.axis(), cube.name());
}

/// Rational scale factor num/den; output dims are floor(in * num / den).
struct Scale {
  Index num = 1;
  Index den = 1;
  Index apply(Index n) const { return n * num / den; }
};

template <typename Scalar>
BasicHypercube<Scalar> bicubic_resize(const BasicHypercube<Scalar>& cube, Scale scale) {
  return bicubic_resize(cube, scale.apply(cube.height()), scale.apply(cube.width()));
}

}  // namespace spectrai
