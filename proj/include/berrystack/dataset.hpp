#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "berrystack/image.hpp"

// Sample preparation and resampling for bispectral (700 nm / 770 nm) berry
// images.

namespace berrystack::data {

inline constexpr std::size_t kSampleSide = 32;
inline constexpr std::size_t kSampleChannels = 3;

// Positive class is unripe.
enum Label : int { ripe = 0, unripe = 1 };

enum class Farm { A, B, synthetic };
std::string_view to_string(Farm f);
Farm farm_from_string(std::string_view s);

/// Side-by-side stereo capture: left half is the 700 nm band, right half the
/// 770 nm band.
struct StereoFrame {
  Gray8 pixels;
  std::string berry_id;
};

struct BispectralSample {
  Image band700;  // 32x32x3
  Image band770;  // 32x32x3
  int label = ripe;
  std::string berry_id;
  Farm farm = Farm::synthetic;

  // Throws ArgumentError unless both bands are 32x32x3 and label is binary.
  void validate() const;
};

struct LabeledDataset {
  std::vector<BispectralSample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::array<std::size_t, 2> class_counts() const;
  std::vector<double> labels() const;
};

struct BBox {
  std::size_t x = 0, y = 0, width = 0, height = 0;
};

std::pair<Gray8, Gray8> split_stereo(const StereoFrame& frame);

/// Bilinear resample of the crop to 32x32 (pixel-centre aligned).
Image crop_resize(const Image& image, const BBox& bbox);

/// CDF remapping over 256 levels, applied per channel. Constant channels are
/// returned unchanged.
Image hist_equalize(const Image& image);

/// Replicates a single-channel 32x32 band into three identical channels.
Image pseudo_colour(const Image& band);

/// Full preparation of one capture: crop/resize each band, equalize the
/// 770 nm band, then pseudo-colour both.
BispectralSample prepare_sample(const Image& band700, const Image& band770,
                                const BBox& bbox, int label, std::string berry_id,
                                Farm farm);

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
};

struct Splits {
  LabeledDataset train, validation, test;
};

/// Per class: seeded shuffle, floor(train*n) to train, floor(validation*n) to
/// validation, the remainder to test. Within each split, samples keep their
/// input order.
Splits stratified_split(const LabeledDataset& dataset, std::uint64_t seed,
                        SplitRatios ratios = {});

/// Duplicates randomly chosen minority samples until both classes are equal
/// in size. Originals come first, in input order.
LabeledDataset random_oversample(const LabeledDataset& dataset, std::uint64_t seed);
/// Same rule over a label vector: 0..n-1 followed by the duplicated indices.
std::vector<std::size_t> oversample_indices(const std::vector<double>& labels, std::uint64_t seed);

/// N uniform draws with replacement from [0, n).
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed);
LabeledDataset bootstrap_subset(const LabeledDataset& dataset, std::uint64_t seed);

struct AugmentationSpec {
  double max_rotation_deg = 0.0;
  std::array<double, 2> zoom_range{1.0, 1.0};
  std::array<double, 2> brightness_range{1.0, 1.0};
  std::uint64_t seed = 0;

  void validate() const;
  bool is_identity() const;
  // Rotation 10 deg, zoom [0.2, 1.0], brightness [0.2, 1.0].
  static AugmentationSpec rotation_zoom_brightness(std::uint64_t seed);
  static AugmentationSpec rotation_zoom(std::uint64_t seed);
};

struct AugmentParams {
  double rotation_deg = 0.0;
  double zoom = 1.0;
  double brightness = 1.0;
};

AugmentParams sample_augmentation(const AugmentationSpec& spec, std::uint64_t seed);

/// Rotation about the image centre and zoom (zoom < 1 crops the centre,
/// zoom > 1 pads with replicated edges), resampled bilinearly, then
/// brightness as a clamped multiplication.
Image apply_augmentation(const Image& image, const AugmentParams& params);

/// Samples one parameter set and applies it to both bands.
BispectralSample augment(const BispectralSample& sample, const AugmentationSpec& spec,
                         std::uint64_t seed, AugmentParams* applied = nullptr);

LabeledDataset augment_dataset(const LabeledDataset& dataset, const AugmentationSpec& spec);

// ---------------------------------------------------------------------------
// Manifest: tab-separated, header
//   berry_id  farm  label  path_700  path_770
// Relative paths resolve against the manifest's directory. When path_770 is
// "-", path_700 names a stereo frame to be split.

struct ManifestRow {
  std::string berry_id;
  Farm farm = Farm::synthetic;
  int label = ripe;
  std::string path_700;
  std::string path_770;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);

/// Loads a manifest of already prepared 32x32 band images (stored as single
/// channel PGMs) into pseudo-coloured samples.
LabeledDataset load_prepared(const std::filesystem::path& manifest);

/// Writes the 700/770 bands of every sample as PGMs under `dir` and a
/// manifest next to them. Returns the manifest path.
std::filesystem::path save_prepared(const LabeledDataset& dataset,
                                    const std::filesystem::path& dir,
                                    const std::string& manifest_name);

}  // namespace berrystack::data
