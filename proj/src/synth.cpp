#include "berrystack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "berrystack/errors.hpp"

namespace berrystack::synth {

void BispectralSpec::validate() const {
  if (samples < 2) throw ArgumentError("synthetic dataset needs at least 2 samples");
  if (!(unripe_fraction > 0.0 && unripe_fraction < 1.0)) {
    throw ArgumentError("unripe_fraction must lie in (0, 1)");
  }
  if (!(noise >= 0.0)) throw ArgumentError("noise must be >= 0");
}

namespace {

std::vector<int> shuffled_labels(const BispectralSpec& spec, std::mt19937_64& rng) {
  const auto n_unripe = static_cast<std::size_t>(
      std::lround(spec.unripe_fraction * static_cast<double>(spec.samples)));
  std::vector<int> labels(spec.samples, data::ripe);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_unripe), data::unripe);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

// One berry rendered into two single-channel bands of side x side.
std::pair<Image, Image> render_berry(int label, std::size_t side, double noise,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const double s = static_cast<double>(side);
  const double light = 0.35 + 0.65 * u(rng);
  const double cx = (s - 1.0) / 2.0 + 1.5 * (s / 32.0) * jitter(rng);
  const double cy = (s - 1.0) / 2.0 + 1.5 * (s / 32.0) * jitter(rng);
  const double radius = (9.0 + 4.0 * u(rng)) * s / 32.0;
  const double freq = (0.8 + 0.3 * u(rng)) * 32.0 / s;  // drupelet spacing
  const double phx = 2.0 * std::numbers::pi * u(rng);
  const double phy = 2.0 * std::numbers::pi * u(rng);

  double r700 = label == data::ripe ? 0.15 : 0.55;
  double r770 = label == data::ripe ? 0.75 : 0.60;
  r700 *= 0.85 + 0.3 * u(rng);
  r770 *= 0.85 + 0.3 * u(rng);
  const double background = 0.25;

  Image b700(side, side, 1), b770(side, side, 1);
  std::normal_distribution<double> pixel_noise(0.0, noise);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      const double berry = std::clamp((radius - d) / 1.5 + 0.5, 0.0, 1.0);
      const double tex = 0.5 + 0.5 * std::cos(freq * x + phx) * std::cos(freq * y + phy);
      const double shade = 0.8 + 0.2 * tex;
      const double v700 = background * (1.0 - berry) + berry * r700 * shade;
      const double v770 = background * (1.0 - berry) + berry * r770 * shade;
      b700.at(x, y) = std::clamp(light * v700 + pixel_noise(rng), 0.0, 1.0);
      b770.at(x, y) = std::clamp(light * v770 + pixel_noise(rng), 0.0, 1.0);
    }
  }
  return {std::move(b700), std::move(b770)};
}

}  // namespace

data::LabeledDataset bispectral_dataset(const BispectralSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto labels = shuffled_labels(spec, rng);
  data::LabeledDataset ds;
  ds.samples.reserve(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    auto [b700, b770] = render_berry(labels[i], data::kSampleSide, spec.noise, rng);
    data::BispectralSample s;
    s.band700 = data::pseudo_colour(b700);
    s.band770 = data::pseudo_colour(b770);
    s.label = labels[i];
    s.berry_id = fmt::format("S{:05d}", i);
    s.farm = data::Farm::synthetic;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::vector<StereoCapture> stereo_captures(const BispectralSpec& spec, std::size_t side) {
  spec.validate();
  if (side < data::kSampleSide) {
    throw ArgumentError(fmt::format("stereo half must be at least {} pixels", data::kSampleSide));
  }
  std::mt19937_64 rng(spec.seed);
  const auto labels = shuffled_labels(spec, rng);
  std::vector<StereoCapture> out;
  for (std::size_t i = 0; i < spec.samples; ++i) {
    auto [b700, b770] = render_berry(labels[i], side, spec.noise, rng);
    StereoCapture cap;
    cap.label = labels[i];
    cap.frame.berry_id = fmt::format("S{:05d}", i);
    cap.frame.pixels = Gray8{2 * side, side, std::vector<std::uint8_t>(2 * side * side)};
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        cap.frame.pixels.at(x, y) = static_cast<std::uint8_t>(std::lround(b700.at(x, y) * 255.0));
        cap.frame.pixels.at(x + side, y) =
            static_cast<std::uint8_t>(std::lround(b770.at(x, y) * 255.0));
      }
    }
    const std::size_t margin = side / 8;
    cap.bbox = data::BBox{margin, margin, side - 2 * margin, side - 2 * margin};
    out.push_back(std::move(cap));
  }
  return out;
}

double planted_reflectance(int ripeness_class, double nm) {
  auto gauss = [](double x, double mu, double sigma) {
    return std::exp(-(x - mu) * (x - mu) / (2.0 * sigma * sigma));
  };
  double r = 0.1 + 0.8 / (1.0 + std::exp(-(nm - 720.0) / 25.0)) + 0.1 * (nm - 600.0) / 375.0;
  r += 0.05 * ripeness_class * gauss(nm, 700.0, 12.0);
  if (ripeness_class == spectral::kRipe) r += 0.1 * gauss(nm, 770.0, 12.0);
  return r;
}

SpectralFixture spectral_fixture(std::uint64_t seed, std::size_t width, std::size_t height,
                                 double noise) {
  if (width < 5 || height < 1) throw ArgumentError("spectral fixture needs width >= 5");
  std::vector<double> wl;
  for (double nm = 600.0; nm <= 975.0; nm += 5.0) wl.push_back(nm);

  SpectralFixture f;
  for (auto* cube : {&f.raw, &f.white, &f.dark}) {
    cube->width = width;
    cube->height = height;
    cube->wavelengths = wl;
    cube->reflectance.assign(width * height * wl.size(), 0.0);
  }
  const std::size_t stripe = width / 5;
  auto class_of = [&](std::size_t x) { return static_cast<int>(std::min<std::size_t>(x / stripe, 4)); };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (std::size_t b = 0; b < wl.size(); ++b) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double white = 0.9 + 0.02 * std::sin(0.3 * x + 0.01 * wl[b]);
        const double dark = 0.05;
        const double r = planted_reflectance(class_of(x), wl[b]) + noise * n01(rng);
        f.white.at(x, y, b) = white;
        f.dark.at(x, y, b) = dark;
        f.raw.at(x, y, b) = dark + r * (white - dark);
      }
    }
  }
  for (int c = 0; c < 5; ++c) {
    spectral::SegmentationMask m{width, height, std::vector<std::uint8_t>(width * height, 0)};
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) m.member[y * width + x] = class_of(x) == c;
    f.masks.push_back(std::move(m));
  }
  return f;
}

}  // namespace berrystack::synth
