#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spectrai/nn/tensor.hpp"
#include "spectrai/pipeline/filters.hpp"

namespace spectrai::train {

using nn::Tensor;

/// (1, L) for a spectrum, (bands, H, W) for a cube, without the batch axis.
nn::Shape sample_shape(const SampleInput& input);

/// Writes one sample into slot n of a batch tensor.
void write_input(const SampleInput& input, Tensor<float>& batch, Index n);
Tensor<float> to_tensor(const Spectrum& s);  // (1, 1, L)
Tensor<float> to_tensor(const Hypercube& c);  // (1, bands, H, W)
Spectrum spectrum_from(const Tensor<float>& t, Index n, const WavelengthAxis& axis);
Hypercube cube_from(const Tensor<float>& t, Index n, const WavelengthAxis& axis, std::string name = {});

/// Per-sample affine map x -> (x - offset) / scale, applied to a regression
/// target with the input's statistics.
struct Affine {
  float offset = 0.0f;
  float scale = 1.0f;
};

struct Batch {
  Tensor<float> input;
  Tensor<float> target;               // regression tasks
  std::vector<std::int32_t> labels;   // label tasks, N * spatial entries
  std::vector<Affine> affine;         // per sample (identity when off)
  std::vector<std::string> ids;
};

/// Input normalization for a sample. Label tasks normalize each spectrum
/// (or pixel spectrum) with `mode`; regression tasks use a whole-sample
/// min-max map that is also applied to the target.
SampleInput normalize_input(const SampleInput& input, std::optional<NormalizeMode> mode, bool regression,
                            Affine* affine = nullptr);

Batch make_batch(const std::vector<const SamplePair*>& samples, std::optional<NormalizeMode> mode,
                 bool regression);

}  // namespace spectrai::train
