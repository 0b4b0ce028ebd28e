#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

// Hyperspectral cube handling and the choice of the two acquisition
// wavelengths from class-mean reflectance spectra.

namespace berrystack::spectral {

struct WavelengthLimits {
  double lo = 600.0;
  double hi = 975.0;
};

/// Reflectance per (x, y, band), stored band-sequentially:
/// index = band * width * height + y * width + x.
struct HyperspectralCube {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> wavelengths;  // nm, strictly increasing
  std::vector<double> reflectance;

  std::size_t bands() const { return wavelengths.size(); }
  std::size_t pixels() const { return width * height; }
  double at(std::size_t x, std::size_t y, std::size_t band) const {
    return reflectance[band * pixels() + y * width + x];
  }
  double& at(std::size_t x, std::size_t y, std::size_t band) {
    return reflectance[band * pixels() + y * width + x];
  }

  // Throws FormatError on any broken invariant.
  void validate(std::optional<WavelengthLimits> limits = WavelengthLimits{}) const;
};

struct SegmentationMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> member;  // nonzero = inside

  std::size_t count() const;
};

/// Ripeness classes 0..4: raw, unripe, near ripe, ripe, overripe.
struct ClassSpectrum {
  int ripeness_class = 0;
  std::vector<double> wavelengths;
  std::vector<double> values;
  bool normalized = false;
};

struct WavelengthPair {
  double visible_nm = 0.0;
  double nir_nm = 0.0;
};

/// Half-open [lo, hi) unless `include_hi`.
struct WavelengthRange {
  double lo = 0.0;
  double hi = 0.0;
  bool include_hi = false;

  bool contains(double nm) const { return nm >= lo && (include_hi ? nm <= hi : nm < hi); }
};

inline constexpr WavelengthRange kDefaultVisible{600.0, 750.0, false};
inline constexpr WavelengthRange kDefaultNir{750.0, 975.0, true};
inline constexpr int kNearRipe = 2;
inline constexpr int kRipe = 3;

/// Header: key = value lines with width, height, bands, wavelengths
/// (comma separated), byte_order = little-endian, dtype = float32.
HyperspectralCube load_cube(const std::filesystem::path& header_path,
                            const std::filesystem::path& data_path,
                            std::optional<WavelengthLimits> limits = WavelengthLimits{});
void save_cube(const HyperspectralCube& cube, const std::filesystem::path& header_path,
               const std::filesystem::path& data_path);

SegmentationMask load_mask(const std::filesystem::path& path);
void save_mask(const SegmentationMask& mask, const std::filesystem::path& path);

/// R = (raw - dark) / (white - dark), or 0 where white == dark.
HyperspectralCube calibrate(const HyperspectralCube& raw, const HyperspectralCube& white,
                            const HyperspectralCube& dark);

ClassSpectrum mean_spectrum(const HyperspectralCube& cube, const SegmentationMask& mask,
                            int ripeness_class);

/// Min-max scaling of one spectrum to [0, 1].
ClassSpectrum normalize_spectrum(const ClassSpectrum& spectrum);

/// |R_a - R_b| per wavelength.
std::vector<double> class_separation(const std::vector<ClassSpectrum>& spectra, int class_a,
                                     int class_b);

/// NIR: argmax of the near-ripe vs ripe separation. Visible: argmax of the
/// smallest pairwise separation over all class pairs. Ties go to the lower
/// wavelength.
WavelengthPair select_wavelengths(const std::vector<ClassSpectrum>& spectra,
                                  WavelengthRange visible = kDefaultVisible,
                                  WavelengthRange nir = kDefaultNir);

}  // namespace berrystack::spectral
