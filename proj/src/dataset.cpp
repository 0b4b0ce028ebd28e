#include "berrystack/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "berrystack/errors.hpp"
#include "berrystack/io_util.hpp"

namespace berrystack::data {

namespace fs = std::filesystem;

std::string_view to_string(Farm f) {
  switch (f) {
    case Farm::A: return "A";
    case Farm::B: return "B";
    case Farm::synthetic: return "synthetic";
  }
  return "?";
}

Farm farm_from_string(std::string_view s) {
  if (s == "A") return Farm::A;
  if (s == "B") return Farm::B;
  if (s == "synthetic") return Farm::synthetic;
  throw FormatError(fmt::format("unknown farm '{}'", s));
}

void BispectralSample::validate() const {
  for (const Image* img : {&band700, &band770}) {
    if (img->width != kSampleSide || img->height != kSampleSide ||
        img->channels != kSampleChannels) {
      throw ArgumentError(fmt::format("sample '{}': bands must be 32x32x3, got {}x{}x{}",
                                      berry_id, img->width, img->height, img->channels));
    }
  }
  if (label != ripe && label != unripe) {
    throw ArgumentError(fmt::format("sample '{}': label must be 0 or 1", berry_id));
  }
}

std::array<std::size_t, 2> LabeledDataset::class_counts() const {
  std::array<std::size_t, 2> counts{0, 0};
  for (const auto& s : samples) ++counts[static_cast<std::size_t>(s.label)];
  return counts;
}

std::vector<double> LabeledDataset::labels() const {
  std::vector<double> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.label);
  return y;
}

std::pair<Gray8, Gray8> split_stereo(const StereoFrame& frame) {
  const Gray8& px = frame.pixels;
  if (px.width % 2 != 0) {
    throw FormatError(fmt::format("stereo frame '{}' has odd width {}", frame.berry_id,
                                  px.width));
  }
  const std::size_t half = px.width / 2;
  Gray8 left{half, px.height, std::vector<std::uint8_t>(half * px.height)};
  Gray8 right = left;
  for (std::size_t y = 0; y < px.height; ++y) {
    for (std::size_t x = 0; x < half; ++x) {
      left.at(x, y) = px.at(x, y);
      right.at(x, y) = px.at(x + half, y);
    }
  }
  return {std::move(left), std::move(right)};
}

Image crop_resize(const Image& image, const BBox& bbox) {
  if (bbox.width == 0 || bbox.height == 0 || bbox.x + bbox.width > image.width ||
      bbox.y + bbox.height > image.height) {
    throw ArgumentError(fmt::format("bbox ({}, {}, {}x{}) outside {}x{} image", bbox.x,
                                    bbox.y, bbox.width, bbox.height, image.width,
                                    image.height));
  }
  Image out(kSampleSide, kSampleSide, image.channels);
  const double sx = static_cast<double>(bbox.width) / kSampleSide;
  const double sy = static_cast<double>(bbox.height) / kSampleSide;
  // Sample within the crop only, so the border replicates crop edges.
  Image crop(bbox.width, bbox.height, image.channels);
  for (std::size_t y = 0; y < bbox.height; ++y)
    for (std::size_t x = 0; x < bbox.width; ++x)
      for (std::size_t c = 0; c < image.channels; ++c)
        crop.at(x, y, c) = image.at(bbox.x + x, bbox.y + y, c);
  for (std::size_t y = 0; y < kSampleSide; ++y) {
    const double srcy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    for (std::size_t x = 0; x < kSampleSide; ++x) {
      const double srcx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      for (std::size_t c = 0; c < image.channels; ++c) {
        out.at(x, y, c) = std::clamp(crop.sample(srcx, srcy, c), 0.0, 1.0);
      }
    }
  }
  return out;
}

Image hist_equalize(const Image& image) {
  Image out = image;
  const std::size_t n = image.width * image.height;
  for (std::size_t c = 0; c < image.channels; ++c) {
    std::array<std::size_t, 256> hist{};
    std::vector<int> level(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = std::clamp(image.data[i * image.channels + c], 0.0, 1.0);
      level[i] = static_cast<int>(std::lround(v * 255.0));
      ++hist[static_cast<std::size_t>(level[i])];
    }
    std::array<std::size_t, 256> cdf{};
    std::partial_sum(hist.begin(), hist.end(), cdf.begin());
    std::size_t cdf_min = 0;
    for (std::size_t v = 0; v < 256; ++v) {
      if (hist[v]) {
        cdf_min = cdf[v];
        break;
      }
    }
    if (cdf_min == n) continue;  // constant channel
    const double denom = static_cast<double>(n - cdf_min);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::size_t>(level[i]);
      const double mapped =
          std::round(static_cast<double>(cdf[v] - cdf_min) / denom * 255.0);
      out.data[i * image.channels + c] = mapped / 255.0;
    }
  }
  return out;
}

Image pseudo_colour(const Image& band) {
  if (band.channels != 1 || band.width != kSampleSide || band.height != kSampleSide) {
    throw ArgumentError(fmt::format("pseudo_colour expects a 32x32 single band, got {}x{}x{}",
                                    band.width, band.height, band.channels));
  }
  Image out(kSampleSide, kSampleSide, kSampleChannels);
  for (std::size_t i = 0; i < band.data.size(); ++i) {
    for (std::size_t c = 0; c < kSampleChannels; ++c) out.data[i * kSampleChannels + c] = band.data[i];
  }
  return out;
}

BispectralSample prepare_sample(const Image& band700, const Image& band770,
                                const BBox& bbox, int label, std::string berry_id,
                                Farm farm) {
  BispectralSample s;
  s.band700 = pseudo_colour(crop_resize(band700, bbox));
  s.band770 = pseudo_colour(hist_equalize(crop_resize(band770, bbox)));
  s.label = label;
  s.berry_id = std::move(berry_id);
  s.farm = farm;
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

namespace {

std::array<std::vector<std::size_t>, 2> indices_by_class(const LabeledDataset& ds) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const int label = ds.samples[i].label;
    if (label != ripe && label != unripe) {
      throw ArgumentError(fmt::format("sample {} has non-binary label {}", i, label));
    }
    by_class[static_cast<std::size_t>(label)].push_back(i);
  }
  return by_class;
}

LabeledDataset take(const LabeledDataset& ds, std::vector<std::size_t> idx, bool sort) {
  if (sort) std::sort(idx.begin(), idx.end());
  LabeledDataset out;
  out.samples.reserve(idx.size());
  for (std::size_t i : idx) out.samples.push_back(ds.samples[i]);
  return out;
}

}  // namespace

Splits stratified_split(const LabeledDataset& dataset, std::uint64_t seed,
                        SplitRatios ratios) {
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.train + ratios.validation < 1)) {
    throw ArgumentError("split ratios must be positive and leave room for a test split");
  }
  auto by_class = indices_by_class(dataset);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train, val, test;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 3) {
      throw ArgumentError(fmt::format("class {} has {} samples; at least 3 are needed",
                                      c, idx.size()));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const double n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.validation * n + 1e-9));
    train.insert(train.end(), idx.begin(), idx.begin() + n_train);
    val.insert(val.end(), idx.begin() + n_train, idx.begin() + n_train + n_val);
    test.insert(test.end(), idx.begin() + n_train + n_val, idx.end());
  }
  return Splits{take(dataset, train, true), take(dataset, val, true), take(dataset, test, true)};
}

std::vector<std::size_t> oversample_indices(const std::vector<double>& labels,
                                            std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw ArgumentError(fmt::format("sample {} has non-binary label {}", i, labels[i]));
    }
    by_class[labels[i] == 1.0 ? 1 : 0].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) {
    throw ArgumentError("random oversampling needs both classes present");
  }
  std::vector<std::size_t> out(labels.size());
  std::iota(out.begin(), out.end(), std::size_t{0});
  const std::size_t minority = by_class[0].size() < by_class[1].size() ? 0 : 1;
  const auto& pool = by_class[minority];
  const std::size_t deficit = by_class[1 - minority].size() - pool.size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::size_t i = 0; i < deficit; ++i) out.push_back(pool[pick(rng)]);
  return out;
}

LabeledDataset random_oversample(const LabeledDataset& dataset, std::uint64_t seed) {
  return take(dataset, oversample_indices(dataset.labels(), seed), false);
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("bootstrap of an empty dataset");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

LabeledDataset bootstrap_subset(const LabeledDataset& dataset, std::uint64_t seed) {
  return take(dataset, bootstrap_indices(dataset.size(), seed), false);
}

// ---------------------------------------------------------------------------

void AugmentationSpec::validate() const {
  if (!(max_rotation_deg >= 0.0)) throw ArgumentError("max_rotation_deg must be >= 0");
  for (const auto* r : {&zoom_range, &brightness_range}) {
    if (!((*r)[0] > 0.0 && (*r)[1] <= 2.0 && (*r)[0] <= (*r)[1])) {
      throw ArgumentError(fmt::format("augmentation range [{}, {}] must satisfy 0 < lo <= hi <= 2",
                                      (*r)[0], (*r)[1]));
    }
  }
}

bool AugmentationSpec::is_identity() const {
  return max_rotation_deg == 0.0 && zoom_range[0] == 1.0 && zoom_range[1] == 1.0 &&
         brightness_range[0] == 1.0 && brightness_range[1] == 1.0;
}

AugmentationSpec AugmentationSpec::rotation_zoom_brightness(std::uint64_t seed) {
  return AugmentationSpec{10.0, {0.2, 1.0}, {0.2, 1.0}, seed};
}

AugmentationSpec AugmentationSpec::rotation_zoom(std::uint64_t seed) {
  return AugmentationSpec{10.0, {0.2, 1.0}, {1.0, 1.0}, seed};
}

AugmentParams sample_augmentation(const AugmentationSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  AugmentParams p;
  p.rotation_deg = draw(-spec.max_rotation_deg, spec.max_rotation_deg);
  p.zoom = draw(spec.zoom_range[0], spec.zoom_range[1]);
  p.brightness = draw(spec.brightness_range[0], spec.brightness_range[1]);
  return p;
}

Image apply_augmentation(const Image& image, const AugmentParams& params) {
  Image out(image.width, image.height, image.channels);
  const double cx = (static_cast<double>(image.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(image.height) - 1.0) / 2.0;
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const bool geometric = params.rotation_deg != 0.0 || params.zoom != 1.0;
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      double sx = static_cast<double>(x);
      double sy = static_cast<double>(y);
      if (geometric) {
        // Inverse map: output pixel -> source position.
        const double dx = (sx - cx) * params.zoom;
        const double dy = (sy - cy) * params.zoom;
        sx = cx + cs * dx + sn * dy;
        sy = cy - sn * dx + cs * dy;
      }
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double v = geometric ? image.sample(sx, sy, c) : image.at(x, y, c);
        out.at(x, y, c) = std::clamp(v * params.brightness, 0.0, 1.0);
      }
    }
  }
  return out;
}

BispectralSample augment(const BispectralSample& sample, const AugmentationSpec& spec,
                         std::uint64_t seed, AugmentParams* applied) {
  const AugmentParams p = sample_augmentation(spec, seed);
  BispectralSample out = sample;
  out.band700 = apply_augmentation(sample.band700, p);
  out.band770 = apply_augmentation(sample.band770, p);
  if (applied) *applied = p;
  return out;
}

LabeledDataset augment_dataset(const LabeledDataset& dataset, const AugmentationSpec& spec) {
  LabeledDataset out;
  out.samples.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out.samples.push_back(augment(dataset.samples[i], spec, spec.seed + i));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  if (!fs::exists(path)) {
    throw FormatError(fmt::format("manifest '{}' not found", path.string()));
  }
  std::istringstream in(io::read_text(path));
  std::string line;
  std::vector<ManifestRow> rows;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty() || line[0] == '#') continue;
    auto cols = io::split(line, '\t');
    for (auto& c : cols) c = io::trim(c);
    if (header) {
      header = false;
      if (cols.size() != 5 || cols[0] != "berry_id") {
        throw FormatError(fmt::format("{}: expected header 'berry_id farm label path_700 path_770'",
                                      path.string()));
      }
      continue;
    }
    if (cols.size() != 5) {
      throw FormatError(fmt::format("{}:{}: expected 5 columns, found {}", path.string(),
                                    line_no, cols.size()));
    }
    ManifestRow row;
    row.berry_id = cols[0];
    row.farm = farm_from_string(cols[1]);
    if (cols[2] != "0" && cols[2] != "1") {
      throw FormatError(fmt::format("{}:{}: label must be 0 or 1", path.string(), line_no));
    }
    row.label = cols[2] == "1" ? unripe : ripe;
    row.path_700 = cols[3];
    row.path_770 = cols[4];
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_manifest(const std::vector<ManifestRow>& rows, const fs::path& path) {
  std::string out = "berry_id\tfarm\tlabel\tpath_700\tpath_770\n";
  for (const auto& r : rows) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", r.berry_id, to_string(r.farm), r.label,
                       r.path_700, r.path_770);
  }
  io::write_atomic(path, out);
}

LabeledDataset load_prepared(const fs::path& manifest) {
  const auto rows = read_manifest(manifest);
  const fs::path base = manifest.parent_path();
  LabeledDataset ds;
  for (const auto& r : rows) {
    BispectralSample s;
    s.band700 = pseudo_colour(to_image(read_pgm(base / r.path_700)));
    s.band770 = pseudo_colour(to_image(read_pgm(base / r.path_770)));
    s.label = r.label;
    s.berry_id = r.berry_id;
    s.farm = r.farm;
    ds.samples.push_back(std::move(s));
  }
  if (ds.empty()) throw FormatError(fmt::format("manifest '{}' lists no samples", manifest.string()));
  return ds;
}

fs::path save_prepared(const LabeledDataset& dataset, const fs::path& dir,
                       const std::string& manifest_name) {
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.samples[i];
    const std::string stem = fmt::format("{}_{:04d}_{}", manifest_name, i, s.berry_id);
    const std::string p700 = "images/" + stem + "_700.pgm";
    const std::string p770 = "images/" + stem + "_770.pgm";
    write_pgm(to_gray8(s.band700), dir / p700);
    write_pgm(to_gray8(s.band770), dir / p770);
    rows.push_back({s.berry_id, s.farm, s.label, p700, p770});
  }
  const fs::path manifest = dir / (manifest_name + ".tsv");
  write_manifest(rows, manifest);
  return manifest;
}

}  // namespace berrystack::data
