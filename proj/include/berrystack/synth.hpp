#pragma once

#include <cstdint>
#include <vector>

#include "berrystack/dataset.hpp"
#include "berrystack/spectral.hpp"

// Synthetic fixtures: bispectral berry images with a planted 700/770 nm
// intensity-ratio signal, stereo captures for the preparation pipeline, and
// hyperspectral cubes with planted class differences.

namespace berrystack::synth {

struct BispectralSpec {
  std::size_t samples = 400;
  double unripe_fraction = 0.2;
  double noise = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Already prepared 32x32x3 samples. Ripe berries are dark at 700 nm and
/// bright at 770 nm; unripe berries reflect both about equally. Each sample
/// gets its own illumination level, berry size, position and texture phase.
data::LabeledDataset bispectral_dataset(const BispectralSpec& spec);

struct StereoCapture {
  data::StereoFrame frame;  // left 700 nm, right 770 nm
  data::BBox bbox;          // berry location within each half
  int label = data::ripe;
};

/// Raw side-by-side captures of `side` x `side` per band, berry roughly
/// centred, for exercising split / crop / equalize.
std::vector<StereoCapture> stereo_captures(const BispectralSpec& spec, std::size_t side = 48);

struct SpectralFixture {
  spectral::HyperspectralCube raw, white, dark;
  std::vector<spectral::SegmentationMask> masks;  // masks[c] covers class c
};

/// Five ripeness classes in vertical stripes over 600..975 nm (5 nm steps).
/// Every class shares a sigmoid-shaped base spectrum; class c adds a bump of
/// height 0.05*c at 700 nm and class 3 alone adds a bump at 770 nm, so the
/// expected selection is (700, 770).
SpectralFixture spectral_fixture(std::uint64_t seed, std::size_t width = 50,
                                 std::size_t height = 20, double noise = 0.005);

/// Noise-free class reflectance used by spectral_fixture.
double planted_reflectance(int ripeness_class, double nm);

}  // namespace berrystack::synth
