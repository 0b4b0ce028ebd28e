#include "berrystack/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "berrystack/errors.hpp"
#include "berrystack/image.hpp"
#include "berrystack/io_util.hpp"

namespace berrystack::spectral {

namespace fs = std::filesystem;

void HyperspectralCube::validate(std::optional<WavelengthLimits> limits) const {
  if (width == 0 || height == 0 || wavelengths.empty()) {
    throw FormatError("cube dimensions and band count must be positive");
  }
  if (reflectance.size() != width * height * wavelengths.size()) {
    throw FormatError(fmt::format("cube holds {} values, expected {}", reflectance.size(),
                                  width * height * wavelengths.size()));
  }
  for (std::size_t i = 1; i < wavelengths.size(); ++i) {
    if (!(wavelengths[i] > wavelengths[i - 1])) {
      throw FormatError(fmt::format("wavelengths must be strictly increasing ({} after {})",
                                    wavelengths[i], wavelengths[i - 1]));
    }
  }
  if (limits) {
    for (double nm : wavelengths) {
      if (nm < limits->lo || nm > limits->hi) {
        throw FormatError(fmt::format("wavelength {} nm outside instrument range [{}, {}]", nm,
                                      limits->lo, limits->hi));
      }
    }
  }
  for (double v : reflectance) {
    if (!std::isfinite(v)) throw FormatError("cube holds non-finite values");
  }
}

std::size_t SegmentationMask::count() const {
  return static_cast<std::size_t>(std::count_if(member.begin(), member.end(),
                                                [](std::uint8_t m) { return m != 0; }));
}

HyperspectralCube load_cube(const fs::path& header_path, const fs::path& data_path,
                            std::optional<WavelengthLimits> limits) {
  std::map<std::string, std::string> kv;
  std::istringstream in(io::read_text(header_path));
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = io::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError(fmt::format("{}: line '{}' is not key = value", header_path.string(), t));
    }
    kv[io::trim(t.substr(0, eq))] = io::trim(t.substr(eq + 1));
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw FormatError(fmt::format("{}: missing '{}'", header_path.string(), key));
    }
    return it->second;
  };
  if (auto it = kv.find("byte_order"); it != kv.end() && it->second != "little-endian") {
    throw FormatError(fmt::format("unsupported byte order '{}'", it->second));
  }
  if (auto it = kv.find("dtype"); it != kv.end() && it->second != "float32") {
    throw FormatError(fmt::format("unsupported dtype '{}'", it->second));
  }

  HyperspectralCube cube;
  std::size_t bands = 0;
  try {
    cube.width = std::stoul(need("width"));
    cube.height = std::stoul(need("height"));
    bands = std::stoul(need("bands"));
    for (const auto& tok : io::split(need("wavelengths"), ',')) {
      cube.wavelengths.push_back(std::stod(io::trim(tok)));
    }
  } catch (const std::invalid_argument&) {
    throw FormatError(fmt::format("{}: malformed numeric field", header_path.string()));
  } catch (const std::out_of_range&) {
    throw FormatError(fmt::format("{}: numeric field out of range", header_path.string()));
  }
  if (cube.wavelengths.size() != bands) {
    throw FormatError(fmt::format("header declares {} bands but lists {} wavelengths", bands,
                                  cube.wavelengths.size()));
  }

  const auto bytes = io::read_bytes(data_path);
  const std::size_t expected = cube.width * cube.height * bands * 4;
  if (bytes.size() != expected) {
    throw FormatError(fmt::format("{}: expected {} bytes, found {}", data_path.string(),
                                  expected, bytes.size()));
  }
  cube.reflectance.resize(expected / 4);
  for (std::size_t i = 0; i < cube.reflectance.size(); ++i) {
    cube.reflectance[i] = io::get_f32(bytes, i * 4);
  }
  cube.validate(limits);
  return cube;
}

void save_cube(const HyperspectralCube& cube, const fs::path& header_path,
               const fs::path& data_path) {
  cube.validate(std::nullopt);
  std::string wl;
  for (std::size_t i = 0; i < cube.wavelengths.size(); ++i) {
    wl += (i ? "," : "") + fmt::format("{}", cube.wavelengths[i]);
  }
  io::write_atomic(header_path,
                   fmt::format("width = {}\nheight = {}\nbands = {}\nwavelengths = {}\n"
                               "byte_order = little-endian\ndtype = float32\n",
                               cube.width, cube.height, cube.bands(), wl));
  std::vector<std::uint8_t> bytes;
  bytes.reserve(cube.reflectance.size() * 4);
  for (double v : cube.reflectance) io::put_f32(bytes, static_cast<float>(v));
  io::write_atomic(data_path, bytes);
}

SegmentationMask load_mask(const fs::path& path) {
  if (!fs::exists(path)) throw FormatError(fmt::format("mask '{}' not found", path.string()));
  Gray8 g = read_pgm(path);
  return SegmentationMask{g.width, g.height, std::move(g.pixels)};
}

void save_mask(const SegmentationMask& mask, const fs::path& path) {
  Gray8 g{mask.width, mask.height, mask.member};
  for (auto& m : g.pixels) m = m ? 255 : 0;
  write_pgm(g, path);
}

HyperspectralCube calibrate(const HyperspectralCube& raw, const HyperspectralCube& white,
                            const HyperspectralCube& dark) {
  for (const auto* ref : {&white, &dark}) {
    if (ref->width != raw.width || ref->height != raw.height ||
        ref->wavelengths != raw.wavelengths) {
      throw ArgumentError("calibration cubes must share dimensions and wavelengths");
    }
  }
  HyperspectralCube out = raw;
  for (std::size_t i = 0; i < raw.reflectance.size(); ++i) {
    const double span = white.reflectance[i] - dark.reflectance[i];
    out.reflectance[i] = span == 0.0 ? 0.0 : (raw.reflectance[i] - dark.reflectance[i]) / span;
  }
  return out;
}

ClassSpectrum mean_spectrum(const HyperspectralCube& cube, const SegmentationMask& mask,
                            int ripeness_class) {
  if (mask.width != cube.width || mask.height != cube.height) {
    throw ArgumentError(fmt::format("mask {}x{} does not match cube {}x{}", mask.width,
                                    mask.height, cube.width, cube.height));
  }
  if (ripeness_class < 0 || ripeness_class > 4) {
    throw ArgumentError(fmt::format("ripeness class {} outside 0..4", ripeness_class));
  }
  const std::size_t n = mask.count();
  if (n == 0) throw ArgumentError("mean_spectrum: mask selects no pixels");
  ClassSpectrum s{ripeness_class, cube.wavelengths, std::vector<double>(cube.bands(), 0.0), false};
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    double sum = 0.0;
    for (std::size_t p = 0; p < cube.pixels(); ++p) {
      if (mask.member[p]) sum += cube.reflectance[b * cube.pixels() + p];
    }
    s.values[b] = sum / static_cast<double>(n);
  }
  return s;
}

ClassSpectrum normalize_spectrum(const ClassSpectrum& spectrum) {
  if (spectrum.values.empty()) throw DegenerateInputError("cannot normalize an empty spectrum");
  const auto [lo, hi] = std::minmax_element(spectrum.values.begin(), spectrum.values.end());
  if (*lo == *hi) {
    throw DegenerateInputError("cannot normalize a constant spectrum");
  }
  ClassSpectrum out = spectrum;
  const double min = *lo;
  const double range = *hi - *lo;
  for (double& v : out.values) v = std::clamp((v - min) / range, 0.0, 1.0);
  out.normalized = true;
  return out;
}

namespace {

const ClassSpectrum& find_class(const std::vector<ClassSpectrum>& spectra, int cls) {
  for (const auto& s : spectra) {
    if (s.ripeness_class == cls) return s;
  }
  throw ArgumentError(fmt::format("no spectrum for ripeness class {}", cls));
}

// Indices of bands in `range`, or ArgumentError if there are none.
std::vector<std::size_t> bands_in(const std::vector<double>& wavelengths,
                                  const WavelengthRange& range, const char* name) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < wavelengths.size(); ++i) {
    if (range.contains(wavelengths[i])) idx.push_back(i);
  }
  if (idx.empty()) {
    throw ArgumentError(fmt::format("{} range [{}, {}] contains no cube wavelength", name,
                                    range.lo, range.hi));
  }
  return idx;
}

bool overlaps(const WavelengthRange& a, const WavelengthRange& b) {
  const double lo = std::max(a.lo, b.lo);
  for (const auto* r : {&a, &b}) {
    if (r->hi < lo || (r->hi == lo && !r->include_hi)) return false;
  }
  return true;
}

std::size_t argmax_lowest(const std::vector<std::size_t>& candidates,
                          const std::vector<double>& score) {
  std::size_t best = candidates.front();
  for (std::size_t i : candidates) {
    if (score[i] > score[best]) best = i;
  }
  return best;
}

}  // namespace

std::vector<double> class_separation(const std::vector<ClassSpectrum>& spectra, int class_a,
                                     int class_b) {
  const ClassSpectrum& a = find_class(spectra, class_a);
  const ClassSpectrum& b = find_class(spectra, class_b);
  if (a.wavelengths != b.wavelengths) {
    throw ArgumentError("spectra are not on a common wavelength grid");
  }
  std::vector<double> score(a.values.size());
  for (std::size_t i = 0; i < score.size(); ++i) score[i] = std::abs(a.values[i] - b.values[i]);
  return score;
}

WavelengthPair select_wavelengths(const std::vector<ClassSpectrum>& spectra,
                                  WavelengthRange visible, WavelengthRange nir) {
  if (spectra.size() < 2) throw ArgumentError("need spectra for at least two classes");
  if (overlaps(visible, nir)) {
    throw ArgumentError("visible and NIR ranges overlap");
  }
  const auto& grid = spectra.front().wavelengths;
  for (const auto& s : spectra) {
    if (s.wavelengths != grid || s.values.size() != grid.size()) {
      throw ArgumentError("spectra are not on a common wavelength grid");
    }
  }
  const auto vis_idx = bands_in(grid, visible, "visible");
  const auto nir_idx = bands_in(grid, nir, "NIR");

  const auto nir_score = class_separation(spectra, kNearRipe, kRipe);

  std::vector<double> min_pair(grid.size(), INFINITY);
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    for (std::size_t j = i + 1; j < spectra.size(); ++j) {
      for (std::size_t b = 0; b < grid.size(); ++b) {
        min_pair[b] = std::min(min_pair[b], std::abs(spectra[i].values[b] - spectra[j].values[b]));
      }
    }
  }
  return WavelengthPair{grid[argmax_lowest(vis_idx, min_pair)],
                        grid[argmax_lowest(nir_idx, nir_score)]};
}

}  // namespace berrystack::spectral
