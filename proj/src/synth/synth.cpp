#include "spectrai/synth/synth.hpp"

#include <cmath>

#include "spectrai/pipeline/filters.hpp"

namespace spectrai::synth {

SpectrumPairs gaussian_peak_spectra(Index count, const PeakSpectraOptions& o, Rng& rng) {
  SpectrumPairs out;
  const WavelengthAxis axis =
      WavelengthAxis::linear(500.0, 1300.0 / static_cast<double>(std::max<Index>(o.length - 1, 1)), o.length);
  for (Index i = 0; i < count; ++i) {
    Spectrum::Vector clean = Spectrum::Vector::Zero(o.length);
    const int peaks = o.min_peaks + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.max_peaks - o.min_peaks + 1)));
    for (int k = 0; k < peaks; ++k) {
      const double amp = rng.uniform(o.min_amplitude, o.max_amplitude);
      const double center = rng.uniform(0.05, 0.95) * static_cast<double>(o.length);
      const double width = rng.uniform(o.min_width, o.max_width);
      for (Index b = 0; b < o.length; ++b) {
        const double z = (static_cast<double>(b) - center) / width;
        clean[b] += static_cast<float>(amp * std::exp(-0.5 * z * z));
      }
    }
    Spectrum::Vector noisy = clean;
    for (Index b = 0; b < o.length; ++b) noisy[b] += static_cast<float>(o.noise_sigma * rng.normal());
    out.clean.emplace_back(std::move(clean), axis);
    out.noisy.emplace_back(std::move(noisy), axis);
  }
  return out;
}

namespace {

Eigen::VectorXf smooth_spectrum(Index bands, Rng& rng) {
  Eigen::VectorXf s = Eigen::VectorXf::Constant(bands, 0.1f);
  for (int k = 0; k < 3; ++k) {
    const double c = rng.uniform(-0.2, 1.2) * static_cast<double>(bands), w = rng.uniform(0.15, 0.5) * static_cast<double>(bands);
    const double a = rng.uniform(0.2, 1.0);
    for (Index b = 0; b < bands; ++b) {
      const double z = (static_cast<double>(b) - c) / w;
      s[b] += static_cast<float>(a * std::exp(-0.5 * z * z));
    }
  }
  return s;
}

}  // namespace

Hypercube smooth_cube(Index H, Index W, Index bands, Rng& rng, int endmembers, int blobs) {
  Eigen::MatrixXf E(endmembers, bands);
  for (int k = 0; k < endmembers; ++k) E.row(k) = smooth_spectrum(bands, rng).transpose();
  Eigen::MatrixXf A = Eigen::MatrixXf::Constant(H * W, endmembers, 0.05f);
  for (int k = 0; k < endmembers; ++k)
    for (int j = 0; j < blobs; ++j) {
      const double cy = rng.uniform(0, static_cast<double>(H)), cx = rng.uniform(0, static_cast<double>(W));
      const double r = rng.uniform(0.05, 0.25) * static_cast<double>(std::min(H, W));
      const double soft = rng.uniform(0.3, 1.5), amp = rng.uniform(0.3, 1.0);
      for (Index y = 0; y < H; ++y)
        for (Index x = 0; x < W; ++x) {
          const double d = std::hypot(static_cast<double>(y) + 0.5 - cy, static_cast<double>(x) + 0.5 - cx);
          A(y * W + x, k) += static_cast<float>(amp / (1.0 + std::exp((d - r) / soft)));
        }
    }
  Hypercube::Matrix px = A * E;
  return Hypercube(H, W, std::move(px), WavelengthAxis::linear(450.0, 450.0 / static_cast<double>(std::max<Index>(bands - 1, 1)), bands));
}

Eigen::MatrixXf class_signatures(Index classes, Index bands, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXf S(classes, bands);
  for (Index c = 0; c < classes; ++c) S.row(c) = smooth_spectrum(bands, rng).transpose();
  return S;
}

SegmentationScene segmentation_scene(Index H, Index W, Index bands, const std::vector<std::string>& classes, Rng& rng,
                                     double noise_sigma, int shapes) {
  const Index C = static_cast<Index>(classes.size());
  SegmentationMask::Labels labels = SegmentationMask::Labels::Zero(H, W);
  for (int s = 0; s < shapes; ++s) {
    const auto cls = C > 1 ? static_cast<std::int32_t>(1 + rng.below(static_cast<std::uint64_t>(C - 1))) : 0;
    const double cy = rng.uniform(0, static_cast<double>(H)), cx = rng.uniform(0, static_cast<double>(W));
    const double ry = rng.uniform(0.1, 0.3) * static_cast<double>(H), rx = rng.uniform(0.1, 0.3) * static_cast<double>(W);
    const bool disc = rng.uniform() < 0.5;
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) {
        const double dy = (static_cast<double>(y) - cy) / ry, dx = (static_cast<double>(x) - cx) / rx;
        const bool inside = disc ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (inside) labels(y, x) = cls;
      }
  }
  const Eigen::MatrixXf S = class_signatures(C, bands, 0x5e9ULL);
  Hypercube::Matrix px(H * W, bands);
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x) {
      const float gain = static_cast<float>(rng.uniform(0.8, 1.2));
      for (Index b = 0; b < bands; ++b)
        px(y * W + x, b) = gain * S(labels(y, x), b) + static_cast<float>(noise_sigma * rng.normal());
    }
  return SegmentationScene{
      Hypercube(H, W, std::move(px), WavelengthAxis::linear(400.0, 500.0 / static_cast<double>(std::max<Index>(bands - 1, 1)), bands)),
      SegmentationMask(std::move(labels), classes)};
}

Hypercube downsample(const Hypercube& hr, int scale) {
  if (scale < 1 || hr.height() % scale || hr.width() % scale)
    throw ShapeError("cube dims must be divisible by the scale");
  return bicubic_resize(hr, hr.height() / scale, hr.width() / scale);
}

}  // namespace spectrai::synth
