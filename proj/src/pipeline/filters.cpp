#include "spectrai/pipeline/filters.hpp"

#include <algorithm>

namespace spectrai {

std::string_view to_string(NormalizeMode mode) {
  switch (mode) {
    case NormalizeMode::MinMax: return "minmax";
    case NormalizeMode::Max: return "max";
    case NormalizeMode::Area: return "area";
    case NormalizeMode::L2: return "l2";
    case NormalizeMode::ZScore: return "zscore";
  }
  return "minmax";
}

NormalizeMode parse_normalize_mode(std::string_view text) {
  for (auto m : {NormalizeMode::MinMax, NormalizeMode::Max, NormalizeMode::Area, NormalizeMode::L2,
                 NormalizeMode::ZScore})
    if (to_string(m) == text) return m;
  throw ParseError("unknown normalization mode '" + std::string(text) + "'");
}

Hypercube minmax_cube(const Hypercube& cube) {
  const float lo = cube.pixels().minCoeff();
  const float hi = cube.pixels().maxCoeff();
  Hypercube::Matrix m = cube.pixels();
  if (hi > lo) m = (m.array() - lo) / (hi - lo);
  else m.setZero();
  return Hypercube(cube.height(), cube.width(), std::move(m), cube.axis(), cube.name());
}

void SavGolParams::validate() const {
  if (window < 3 || window % 2 == 0) throw RangeError("Savitzky-Golay window must be odd and >= 3");
  if (polyorder < 0 || polyorder >= window)
    throw RangeError("Savitzky-Golay polyorder must satisfy 0 <= p < window");
}

Eigen::VectorXd savgol_coefficients(const SavGolParams& params) {
  params.validate();
  const int half = params.window / 2;
  Eigen::MatrixXd design(params.window, params.polyorder + 1);
  for (int i = 0; i < params.window; ++i) {
    double v = 1.0;
    for (int k = 0; k <= params.polyorder; ++k) {
      design(i, k) = v;
      v *= static_cast<double>(i - half);
    }
  }
  // Centre value of the fit is the constant term: row 0 of pinv(design).
  const Eigen::MatrixXd pinv = design.completeOrthogonalDecomposition().pseudoInverse();
  return pinv.row(0).transpose();
}

std::vector<ResampleTap> bicubic_taps(Index in_size, Index out_size) {
  std::vector<ResampleTap> taps(static_cast<std::size_t>(out_size));
  const double ratio = static_cast<double>(in_size) / static_cast<double>(out_size);
  for (Index o = 0; o < out_size; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const double base = std::floor(src);
    const double frac = src - base;
    auto& t = taps[static_cast<std::size_t>(o)];
    for (int k = 0; k < 4; ++k) {
      const auto idx = static_cast<Index>(base) - 1 + k;
      t.index[k] = std::clamp<Index>(idx, 0, in_size - 1);
      t.weight[k] = cubic_kernel(frac - static_cast<double>(k - 1));
    }
  }
  return taps;
}

}  // namespace spectrai
