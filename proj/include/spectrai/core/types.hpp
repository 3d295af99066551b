#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "spectrai/core/error.hpp"

namespace spectrai {

using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Task kinds
// ---------------------------------------------------------------------------

enum class TaskKind {
  SpectrumDenoising,
  ImageDenoising,
  SpectrumClassification,
  ImageClassification,
  Segmentation,
  SuperResolution,
};

inline constexpr TaskKind kAllTasks[] = {
    TaskKind::SpectrumDenoising,      TaskKind::ImageDenoising,
    TaskKind::SpectrumClassification, TaskKind::ImageClassification,
    TaskKind::Segmentation,           TaskKind::SuperResolution,
};

std::string_view to_string(TaskKind task);
TaskKind parse_task(std::string_view text);

/// Image tasks operate on hypercubes and admit spatial augmentation.
bool is_image_task(TaskKind task);

// ---------------------------------------------------------------------------
// Wavelength axis
// ---------------------------------------------------------------------------

/// Strictly increasing, finite, positive sample positions along the spectral
/// dimension. The synthetic unit "index" (0..n-1) relaxes positivity to >= 0.
class WavelengthAxis {
 public:
  WavelengthAxis() = default;
  explicit WavelengthAxis(std::vector<double> values, std::string unit = "nm");

  /// Axis 0..n-1 with unit "index", used when a file carries no wavelengths.
  static WavelengthAxis synthetic(Index n);
  /// Evenly spaced axis first, first+step, ... with n entries.
  static WavelengthAxis linear(double first, double step, Index n, std::string unit = "nm");

  Index size() const { return static_cast<Index>(values_.size()); }
  const std::vector<double>& values() const { return values_; }
  double operator[](Index i) const { return values_[static_cast<std::size_t>(i)]; }
  const std::string& unit() const { return unit_; }

  WavelengthAxis reversed() const;
  WavelengthAxis subset(const std::vector<Index>& keep) const;

  friend bool operator==(const WavelengthAxis&, const WavelengthAxis&) = default;

 private:
  std::vector<double> values_;
  std::string unit_ = "nm";
};

// ---------------------------------------------------------------------------
// Spectrum
// ---------------------------------------------------------------------------

template <typename Scalar>
class BasicSpectrum {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicSpectrum() = default;
  BasicSpectrum(Vector intensities, WavelengthAxis axis)
      : values_(std::move(intensities)), axis_(std::move(axis)) {
    if (values_.size() != axis_.size())
      throw ShapeError("spectrum length " + std::to_string(values_.size()) +
                       " does not match axis length " + std::to_string(axis_.size()));
  }
  /// Spectrum on a synthetic index axis.
  explicit BasicSpectrum(Vector intensities)
      : BasicSpectrum(intensities, WavelengthAxis::synthetic(intensities.size())) {}

  Index size() const { return values_.size(); }
  const Vector& values() const { return values_; }
  Scalar operator[](Index i) const { return values_[i]; }
  const WavelengthAxis& axis() const { return axis_; }

  bool all_finite() const { return values_.allFinite(); }

 private:
  Vector values_;
  WavelengthAxis axis_;
};

using Spectrum = BasicSpectrum<float>;

// ---------------------------------------------------------------------------
// Hypercube
// ---------------------------------------------------------------------------

/// H x W x bands block stored as an (H*W) x bands row-major matrix, so that
/// row (y*W + x) is the spectrum of pixel (y, x). Immutable after construction.
template <typename Scalar>
class BasicHypercube {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BasicHypercube() = default;

  BasicHypercube(Index height, Index width, Matrix pixels, WavelengthAxis axis,
                 std::string name = {})
      : height_(height), width_(width), pixels_(std::move(pixels)), axis_(std::move(axis)),
        name_(std::move(name)) {
    if (height_ < 1 || width_ < 1 || pixels_.cols() < 1)
      throw ShapeError("hypercube dimensions must be >= 1");
    if (pixels_.rows() != height_ * width_)
      throw ShapeError("pixel matrix has " + std::to_string(pixels_.rows()) + " rows, expected " +
                       std::to_string(height_ * width_));
    if (axis_.size() != pixels_.cols())
      throw ShapeError("axis length " + std::to_string(axis_.size()) + " != band count " +
                       std::to_string(pixels_.cols()));
  }

  /// Zero-filled cube on the given axis.
  static BasicHypercube zeros(Index height, Index width, WavelengthAxis axis,
                              std::string name = {}) {
    Matrix m = Matrix::Zero(height * width, axis.size());
    return BasicHypercube(height, width, std::move(m), std::move(axis), std::move(name));
  }

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index bands() const { return pixels_.cols(); }
  Index pixel_count() const { return height_ * width_; }

  Scalar operator()(Index y, Index x, Index b) const { return pixels_(y * width_ + x, b); }

  const Matrix& pixels() const { return pixels_; }
  const WavelengthAxis& axis() const { return axis_; }
  const std::string& name() const { return name_; }

  /// One band as an H x W row-major image.
  Matrix band(Index b) const {
    Matrix img(height_, width_);
    for (Index y = 0; y < height_; ++y)
      for (Index x = 0; x < width_; ++x) img(y, x) = pixels_(y * width_ + x, b);
    return img;
  }

  BasicHypercube with_name(std::string name) const {
    return BasicHypercube(height_, width_, pixels_, axis_, std::move(name));
  }

  friend bool operator==(const BasicHypercube& a, const BasicHypercube& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.axis_ == b.axis_ &&
           a.pixels_.cols() == b.pixels_.cols() && a.pixels_ == b.pixels_;
  }

 private:
  Index height_ = 0;
  Index width_ = 0;
  Matrix pixels_;
  WavelengthAxis axis_;
  std::string name_;
};

using Hypercube = BasicHypercube<float>;

// ---------------------------------------------------------------------------
// Segmentation mask
// ---------------------------------------------------------------------------

class SegmentationMask {
 public:
  using Labels = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  SegmentationMask() = default;
  SegmentationMask(Labels labels, std::vector<std::string> class_table);

  Index height() const { return labels_.rows(); }
  Index width() const { return labels_.cols(); }
  Index class_count() const { return static_cast<Index>(classes_.size()); }
  std::int32_t operator()(Index y, Index x) const { return labels_(y, x); }
  const Labels& labels() const { return labels_; }
  const std::vector<std::string>& class_table() const { return classes_; }

  friend bool operator==(const SegmentationMask&, const SegmentationMask&) = default;

 private:
  Labels labels_;
  std::vector<std::string> classes_;
};

/// Classes used by the AeroRIT scene; index 0 is the unspecified class.
const std::vector<std::string>& aerorit_classes();

// ---------------------------------------------------------------------------
// Sample pairs
// ---------------------------------------------------------------------------

enum class PairKind { SpectrumToSpectrum, CubeToCube, CubeToMask, SpectrumToLabel, CubeToLabel };

std::string_view to_string(PairKind kind);
PairKind parse_pair_kind(std::string_view text);

struct ClassLabel {
  std::int32_t index = 0;
  std::string name;
  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

using SampleInput = std::variant<Spectrum, Hypercube>;
using SampleTarget = std::variant<Spectrum, Hypercube, SegmentationMask, ClassLabel>;

struct SamplePair {
  std::string id;
  SampleInput input;
  SampleTarget target;
  PairKind kind = PairKind::SpectrumToSpectrum;
  std::optional<std::string> group_key;
};

/// Checks the pairing invariants. Spatial dims must agree unless `scale` > 1,
/// in which case the target must be exactly input dims x scale.
void check_pair(const SamplePair& pair, int scale = 1);

/// Pair kind expected for a task's training samples.
PairKind pair_kind_for(TaskKind task);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

struct Violation {
  std::string invariant;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

template <typename Scalar>
ValidationReport validate_hypercube(const BasicHypercube<Scalar>& cube) {
  ValidationReport report;
  if (cube.height() < 1 || cube.width() < 1 || cube.bands() < 1)
    report.violations.push_back({"dims", "H, W and bands must be >= 1"});
  if (cube.axis().size() != cube.bands())
    report.violations.push_back({"axis", "axis length != band count"});
  const auto& ax = cube.axis().values();
  for (std::size_t i = 0; i < ax.size(); ++i) {
    const bool positive = cube.axis().unit() == "index" ? ax[i] >= 0 : ax[i] > 0;
    if (!std::isfinite(ax[i]) || !positive || (i > 0 && !(ax[i] > ax[i - 1]))) {
      report.violations.push_back({"axis", "axis invalid at " + std::to_string(i)});
      break;
    }
  }
  const auto& px = cube.pixels();
  for (Index r = 0; r < px.rows(); ++r) {
    for (Index b = 0; b < px.cols(); ++b) {
      if (!std::isfinite(static_cast<double>(px(r, b)))) {
        report.violations.push_back(
            {"finite", "non-finite at (" + std::to_string(r / cube.width()) + "," +
                           std::to_string(r % cube.width()) + "," + std::to_string(b) + ")"});
        return report;
      }
    }
  }
  return report;
}

template <typename Scalar>
BasicSpectrum<Scalar> pixel_spectrum(const BasicHypercube<Scalar>& cube, Index y, Index x) {
  if (y < 0 || y >= cube.height() || x < 0 || x >= cube.width())
    throw IndexError("pixel (" + std::to_string(y) + "," + std::to_string(x) +
                     ") outside " + std::to_string(cube.height()) + "x" +
                     std::to_string(cube.width()));
  typename BasicSpectrum<Scalar>::Vector v = cube.pixels().row(y * cube.width() + x).transpose();
  return BasicSpectrum<Scalar>(std::move(v), cube.axis());
}

/// Inverse of pixel_spectrum: spectra in row-major pixel order.
template <typename Scalar>
BasicHypercube<Scalar> assemble_cube(Index height, Index width,
                                     const std::vector<BasicSpectrum<Scalar>>& spectra) {
  if (static_cast<Index>(spectra.size()) != height * width || spectra.empty())
    throw ShapeError("need exactly H*W spectra to assemble a cube");
  const Index bands = spectra.front().size();
  typename BasicHypercube<Scalar>::Matrix m(height * width, bands);
  for (Index r = 0; r < height * width; ++r) {
    const auto& s = spectra[static_cast<std::size_t>(r)];
    if (s.size() != bands) throw ShapeError("spectra differ in length");
    m.row(r) = s.values().transpose();
  }
  return BasicHypercube<Scalar>(height, width, std::move(m), spectra.front().axis());
}

template <typename Scalar>
BasicHypercube<Scalar> band_select(const BasicHypercube<Scalar>& cube, double min_nm,
                                   double max_nm) {
  if (min_nm > max_nm) throw RangeError("band_select: min > max");
  std::vector<Index> keep;
  for (Index b = 0; b < cube.bands(); ++b)
    if (cube.axis()[b] >= min_nm && cube.axis()[b] <= max_nm) keep.push_back(b);
  if (keep.empty()) throw RangeError("no bands in range");
  typename BasicHypercube<Scalar>::Matrix m(cube.pixel_count(), static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) m.col(static_cast<Index>(k)) = cube.pixels().col(keep[k]);
  return BasicHypercube<Scalar>(cube.height(), cube.width(), std::move(m), cube.axis().subset(keep),
                                cube.name());
}

template <typename Scalar>
BasicHypercube<Scalar> crop(const BasicHypercube<Scalar>& cube, Index y0, Index x0, Index h,
                            Index w) {
  if (h < 1 || w < 1 || y0 < 0 || x0 < 0 || y0 + h > cube.height() || x0 + w > cube.width())
    throw RangeError("crop window (" + std::to_string(y0) + "," + std::to_string(x0) + "," +
                     std::to_string(h) + "," + std::to_string(w) + ") outside " +
                     std::to_string(cube.height()) + "x" + std::to_string(cube.width()));
  typename BasicHypercube<Scalar>::Matrix m(h * w, cube.bands());
  for (Index i = 0; i < h; ++i)
    m.middleRows(i * w, w) = cube.pixels().middleRows((y0 + i) * cube.width() + x0, w);
  return BasicHypercube<Scalar>(h, w, std::move(m), cube.axis(), cube.name());
}

SegmentationMask crop(const SegmentationMask& mask, Index y0, Index x0, Index h, Index w);

}  // namespace spectrai
