#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spectrai/core/types.hpp"

namespace spectrai::metrics {

// ---------------------------------------------------------------------------
// Segmentation

/// Rows are reference classes, columns predicted classes.
class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ConfusionMatrix(Index classes = 0) : m_(Counts::Zero(classes, classes)) {}

  template <typename DP, typename DR>
  void add(const Eigen::MatrixBase<DP>& pred, const Eigen::MatrixBase<DR>& ref,
           std::optional<int> ignore_label = std::nullopt) {
    if (pred.rows() != ref.rows() || pred.cols() != ref.cols())
      throw ShapeError("prediction " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                       " vs reference " + std::to_string(ref.rows()) + "x" + std::to_string(ref.cols()));
    const Index C = classes();
    for (Index i = 0; i < pred.rows(); ++i)
      for (Index j = 0; j < pred.cols(); ++j) {
        const auto r = static_cast<Index>(ref(i, j)), p = static_cast<Index>(pred(i, j));
        if (ignore_label && r == *ignore_label) continue;
        if (r < 0 || r >= C || p < 0 || p >= C)
          throw LabelError("label outside [0, " + std::to_string(C) + ")");
        ++m_(r, p);
      }
  }

  Index classes() const { return m_.rows(); }
  std::int64_t total() const { return m_.sum(); }
  std::int64_t operator()(Index r, Index p) const { return m_(r, p); }
  const Counts& counts() const { return m_; }

 private:
  Counts m_;
};

struct SegmentationScores {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::vector<std::optional<double>> iou;  // empty for classes absent from the reference
  double mean_iou = 0.0;                   // over classes present in the reference
  std::optional<double> mean_iou_without_0;
};

SegmentationScores scores_from(const ConfusionMatrix& m);

template <typename DP, typename DR>
SegmentationScores confusion_and_scores(const Eigen::MatrixBase<DP>& pred, const Eigen::MatrixBase<DR>& ref,
                                        Index classes, std::optional<int> ignore_label = std::nullopt) {
  ConfusionMatrix m(classes);
  m.add(pred, ref, ignore_label);
  return scores_from(m);
}

SegmentationScores confusion_and_scores(const SegmentationMask& pred, const SegmentationMask& ref,
                                        std::optional<int> ignore_label = std::nullopt);

// ---------------------------------------------------------------------------
// Reconstruction

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// 10 log10(max^2 / mse), +inf when mse == 0.
inline double psnr(double mse, double max_value) {
  if (!(max_value > 0)) throw RangeError("max_value must be > 0");
  return mse == 0.0 ? kInfinity : 10.0 * std::log10(max_value * max_value / mse);
}

struct ReconstructionMetrics {
  double mse = 0.0;
  double mae = 0.0;
  double psnr = 0.0;
  double sam = 0.0;  // radians, mean over pixels with non-zero norms
  double sam_degrees = 0.0;
  Index sam_pixels = 0;
  Index sam_skipped = 0;  // zero-norm pixels
  bool sam_undefined = false;
};

struct ReconstructionReport {
  double max_value = 0.0;
  ReconstructionMetrics model;
  std::optional<ReconstructionMetrics> baseline;
};

/// Streaming accumulator over (pixels x bands) blocks; rows are pixels or
/// spectra. Sums are kept in double.
class ReconstructionAccumulator {
 public:
  template <typename DP, typename DR>
  void add(const Eigen::MatrixBase<DP>& pred, const Eigen::MatrixBase<DR>& ref) {
    if (pred.rows() != ref.rows() || pred.cols() != ref.cols())
      throw ShapeError("prediction and reference shapes differ");
    const Eigen::MatrixXd p = pred.template cast<double>(), r = ref.template cast<double>();
    const Eigen::ArrayXXd d = (p - r).array();
    sq_ += d.square().sum();
    abs_ += d.abs().sum();
    n_ += d.size();
    ref_max_ = std::max(ref_max_, r.maxCoeff());
    for (Index i = 0; i < p.rows(); ++i) {
      const double np = p.row(i).norm(), nr = r.row(i).norm();
      if (np == 0.0 || nr == 0.0) {
        ++skipped_;
        continue;
      }
      // acos of the cosine loses half the digits near zero angle
      const Eigen::RowVectorXd u = p.row(i) / np, v = r.row(i) / nr;
      angle_ += 2.0 * std::atan2((u - v).norm(), (u + v).norm());
      ++pixels_;
    }
  }

  double reference_max() const { return ref_max_; }

  /// max_value defaults to the largest reference value seen.
  ReconstructionMetrics finish(std::optional<double> max_value = std::nullopt) const;

 private:
  double sq_ = 0.0, abs_ = 0.0, angle_ = 0.0;
  Index n_ = 0, pixels_ = 0, skipped_ = 0;
  double ref_max_ = -kInfinity;
};

template <typename DP, typename DR>
ReconstructionMetrics reconstruction_metrics(const Eigen::MatrixBase<DP>& pred, const Eigen::MatrixBase<DR>& ref,
                                             std::optional<double> max_value = std::nullopt) {
  ReconstructionAccumulator acc;
  acc.add(pred, ref);
  return acc.finish(max_value);
}

ReconstructionReport reconstruction_report(const Hypercube& pred, const Hypercube& ref,
                                           std::optional<double> max_value = std::nullopt,
                                           const Hypercube* baseline = nullptr);

/// 10 log10(mse(noisy, clean) / mse(denoised, clean)); +inf when the
/// denoised signal is exact.
template <typename A, typename B, typename C>
double snr_gain(const Eigen::MatrixBase<A>& noisy, const Eigen::MatrixBase<B>& denoised,
                const Eigen::MatrixBase<C>& clean) {
  if (noisy.size() != clean.size() || denoised.size() != clean.size()) throw ShapeError("snr_gain: length mismatch");
  const double before = (noisy.template cast<double>() - clean.template cast<double>()).squaredNorm();
  const double after = (denoised.template cast<double>() - clean.template cast<double>()).squaredNorm();
  if (after == 0.0) return kInfinity;
  return 10.0 * std::log10(before / after);
}

/// JSON number, with "+inf"/"-inf"/"nan" strings for non-finite values.
nlohmann::json json_number(double v);
nlohmann::json to_json(const ReconstructionMetrics& m);
nlohmann::json to_json(const SegmentationScores& s, const std::vector<std::string>& class_names = {});

}  // namespace spectrai::metrics
