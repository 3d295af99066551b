#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spectrai/nn/networks.hpp"
#include "spectrai/train/config.hpp"

namespace spectrai::train {

/// A network restored from a checkpoint directory together with the config
/// and class table it was trained with.
struct Model {
  nn::Network<float> net;
  ExperimentConfig config;
  std::vector<std::string> class_names;
  /// Input length seen in training, for spectrum networks.
  std::optional<Index> spectrum_length;
};

/// Loads <dir>/weights and <dir>/meta.json. When `task` is given and differs
/// from the checkpoint's, throws GateError.
Model load_model(const std::filesystem::path& checkpoint_dir, std::optional<TaskKind> task = std::nullopt);

struct InferenceOptions {
  Index tile = 0;      // 0: whole input in one forward call
  Index overlap = 16;  // tile overlap at input resolution
};

/// Forward in inference mode. With tiling, windows of `tile` pixels overlap
/// by `overlap` and are blended with linear ramps across overlaps.
nn::Tensor<float> tiled_forward(nn::Network<float>& net, const nn::Tensor<float>& input, Index tile, Index overlap,
                                int scale = 1);

/// Tile origins along one axis: stride tile - overlap, last aligned to the end.
std::vector<Index> tile_starts(Index size, Index tile, Index overlap);

struct Prediction {
  std::optional<Spectrum> spectrum;
  std::optional<Hypercube> cube;
  std::optional<SegmentationMask> mask;
  std::optional<ClassLabel> label;
  nn::Tensor<float> scores;  // softmax scores for label tasks
};

/// Runs one sample through the model, applying the training normalization
/// and inverting it for regression outputs. Throws ShapeError when the
/// sample does not match the network's input contract.
Prediction predict(Model& model, const SampleInput& input, const InferenceOptions& options = {});

}  // namespace spectrai::train
