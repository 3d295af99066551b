#pragma once

#include <vector>

#include "spectrai/core/types.hpp"
#include "spectrai/pipeline/rng.hpp"

// Synthetic stand-in data for the three experiment families.
namespace spectrai::synth {

struct PeakSpectraOptions {
  Index length = 512;
  int min_peaks = 3;
  int max_peaks = 6;
  double min_width = 3.0;  // Gaussian std, in bands
  double max_width = 20.0;
  double min_amplitude = 0.2;
  double max_amplitude = 1.0;
  double noise_sigma = 0.05;
};

struct SpectrumPairs {
  std::vector<Spectrum> noisy;
  std::vector<Spectrum> clean;
};

/// Sums of Gaussian peaks; the noisy copy adds white Gaussian noise.
SpectrumPairs gaussian_peak_spectra(Index count, const PeakSpectraOptions& options, Rng& rng);

/// Linear mixture of `endmembers` smooth spectra with smooth abundance maps
/// (sums of soft-edged blobs).
Hypercube smooth_cube(Index height, Index width, Index bands, Rng& rng, int endmembers = 3, int blobs = 6);

struct SegmentationScene {
  Hypercube cube;
  SegmentationMask mask;
};

/// Regions drawn as random rectangles and discs over a background class;
/// each class has its own spectral signature plus noise.
SegmentationScene segmentation_scene(Index height, Index width, Index bands, const std::vector<std::string>& classes,
                                     Rng& rng, double noise_sigma = 0.05, int shapes = 12);

/// Class signatures used by segmentation_scene, one row per class.
Eigen::MatrixXf class_signatures(Index classes, Index bands, std::uint64_t seed);

/// Low-resolution input made by bicubic downsampling.
Hypercube downsample(const Hypercube& hr, int scale);

}  // namespace spectrai::synth
