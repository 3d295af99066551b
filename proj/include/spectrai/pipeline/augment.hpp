#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spectrai/core/types.hpp"

namespace spectrai {

enum class AugmentKind { SpectralFlip, SpectralShift, GaussianNoise, HFlip, VFlip, Rot90, RandomCrop };

inline constexpr AugmentKind kAllAugmentations[] = {
    AugmentKind::SpectralFlip, AugmentKind::SpectralShift, AugmentKind::GaussianNoise,
    AugmentKind::HFlip,        AugmentKind::VFlip,         AugmentKind::Rot90,
    AugmentKind::RandomCrop,
};

std::string_view to_string(AugmentKind kind);
AugmentKind parse_augment_kind(std::string_view text);

/// Gating table. Spectral transforms are safe everywhere; spatial ones need
/// an image. Intensity transforms (brightness, contrast) have no kind at all.
bool augmentation_permitted(TaskKind task, AugmentKind kind);
std::vector<AugmentKind> permitted_augmentations(TaskKind task);

struct AugmentationSpec {
  AugmentKind kind = AugmentKind::SpectralFlip;
  double probability = 1.0;
  int shift = 0;          // spectral_shift, in bands (may be negative)
  double sigma = 0.0;     // gaussian_noise
  Index crop_h = 1;       // random_crop (input resolution)
  Index crop_w = 1;

  void validate() const;
  friend bool operator==(const AugmentationSpec&, const AugmentationSpec&) = default;
};

/// "spectral_shift shift=2 p=0.5" style text form used by config files.
AugmentationSpec parse_augmentation_spec(std::string_view text);
std::string format_augmentation_spec(const AugmentationSpec& spec);

struct AugmentationPolicy {
  TaskKind task = TaskKind::SpectrumDenoising;
  std::vector<AugmentationSpec> specs;

  /// Throws GateError for kinds not permitted for the task.
  void validate() const;
};

/// Applies each spec with its probability. The random stream of spec k is
/// seeded from (seed, sample_id, k) only, so results never depend on
/// iteration order or worker count.
SamplePair apply_augmentation(const SamplePair& sample, const AugmentationPolicy& policy,
                              std::uint64_t seed, std::string_view sample_id);

// Individual transforms, exposed for composition and testing.
template <typename Scalar>
BasicSpectrum<Scalar> spectral_flip(const BasicSpectrum<Scalar>& s) {
  typename BasicSpectrum<Scalar>::Vector v = s.values().reverse();
  return BasicSpectrum<Scalar>(std::move(v), s.axis().reversed());
}

/// out[b] = in[b - shift], vacated bands zero; axis unchanged.
template <typename Scalar>
BasicSpectrum<Scalar> spectral_shift(const BasicSpectrum<Scalar>& s, int shift) {
  const Index n = s.size();
  if (std::abs(shift) >= n) throw RangeError("shift exceeds band count");
  typename BasicSpectrum<Scalar>::Vector v = BasicSpectrum<Scalar>::Vector::Zero(n);
  for (Index b = 0; b < n; ++b)
    if (b - shift >= 0 && b - shift < n) v[b] = s[b - shift];
  return BasicSpectrum<Scalar>(std::move(v), s.axis());
}

Hypercube spectral_flip(const Hypercube& cube);
Hypercube spectral_shift(const Hypercube& cube, int shift);
Hypercube hflip(const Hypercube& cube);
Hypercube vflip(const Hypercube& cube);
/// Quarter turn counter-clockwise: out(y, x) = in(x, W-1-y).
Hypercube rot90(const Hypercube& cube);
SegmentationMask hflip(const SegmentationMask& mask);
SegmentationMask vflip(const SegmentationMask& mask);
SegmentationMask rot90(const SegmentationMask& mask);

}  // namespace spectrai
