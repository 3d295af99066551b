#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spectrai/core/types.hpp"

namespace spectrai {

struct PatchOrigin {
  Index y = 0;
  Index x = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

struct Patch {
  Hypercube cube;
  std::optional<SegmentationMask> mask;
  PatchOrigin origin;
};

/// Row-major origins (i*stride, j*stride) of every window fully inside H x W.
std::vector<PatchOrigin> patch_origins(Index height, Index width, Index size, Index stride);

/// Streams patches one at a time so large scenes need not be duplicated.
void for_each_patch(const Hypercube& cube, const SegmentationMask* mask, Index size, Index stride,
                    const std::function<void(const Patch&)>& visit);

std::vector<Patch> extract_patches(const Hypercube& cube, const std::optional<SegmentationMask>& mask,
                                   Index size, Index stride);

// ---------------------------------------------------------------------------

struct SplitSpec {
  double train = 0.85;
  double val = 0.10;
  double test = 0.05;
  std::uint64_t seed = 0;
  bool group_aware = false;

  /// Throws ConfigError unless ratios are non-negative and sum to 1 (1e-9).
  void validate() const;
};

/// Parses "85:10:5" (percentages) or "0.85:0.1:0.05" (fractions).
SplitSpec parse_split_ratios(const std::string& text);

struct SplitResult {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
  std::vector<std::string> warnings;
};

/// Deterministic partition of [0, n). Val and test receive floor(n*r); the
/// remainder goes to train. With group_aware, items sharing a non-empty key
/// always land in the same split.
SplitResult split_dataset(Index n, const SplitSpec& spec,
                          const std::vector<std::optional<std::string>>& group_keys = {});

}  // namespace spectrai
