#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "berrystack/errors.hpp"
#include "berrystack/spectral.hpp"
#include "berrystack/synth.hpp"

using namespace berrystack;
using namespace berrystack::spectral;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "berrystack_test_spectral";
  fs::create_directories(dir);
  return dir / name;
}

HyperspectralCube small_cube() {
  HyperspectralCube c;
  c.width = 2;
  c.height = 2;
  c.wavelengths = {650, 700, 770};
  for (int i = 0; i < 12; ++i) c.reflectance.push_back(0.05 * i);
  return c;
}

HyperspectralCube filled(const HyperspectralCube& shape, double v) {
  HyperspectralCube c = shape;
  std::fill(c.reflectance.begin(), c.reflectance.end(), v);
  return c;
}

ClassSpectrum spec(int cls, std::vector<double> wl, std::vector<double> v) {
  return ClassSpectrum{cls, std::move(wl), std::move(v), true};
}

}  // namespace

TEST_CASE("cube files") {
  const auto hdr = scratch("c.hdr");
  const auto dat = scratch("c.raw");
  SUBCASE("round trip keeps band-sequential order") {
    const auto cube = small_cube();
    save_cube(cube, hdr, dat);
    const auto back = load_cube(hdr, dat);
    REQUIRE(back.reflectance.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(back.reflectance[i] == doctest::Approx(cube.reflectance[i]).epsilon(1e-7));
    }
    CHECK(back.at(1, 0, 2) == doctest::Approx(0.05 * 9).epsilon(1e-7));
  }
  SUBCASE("truncated data names both byte counts") {
    save_cube(small_cube(), hdr, dat);
    fs::resize_file(dat, 40);
    try {
      load_cube(hdr, dat);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("48") != std::string::npos);
      CHECK(msg.find("40") != std::string::npos);
    }
  }
  SUBCASE("duplicate wavelength") {
    save_cube(small_cube(), hdr, dat);
    std::ofstream(hdr) << "width = 2\nheight = 2\nbands = 3\nwavelengths = 650,700,700\n";
    CHECK_THROWS_AS(load_cube(hdr, dat), FormatError);
  }
  SUBCASE("outside the instrument range") {
    auto c = small_cube();
    c.wavelengths = {500, 700, 770};
    save_cube(c, hdr, dat);
    CHECK_THROWS_AS(load_cube(hdr, dat), FormatError);
    CHECK_NOTHROW(load_cube(hdr, dat, WavelengthLimits{400, 1000}));
  }
}

TEST_CASE("calibrate") {
  const auto shape = small_cube();
  const auto white = filled(shape, 0.9);
  const auto dark = filled(shape, 0.1);
  for (double v : calibrate(white, white, dark).reflectance) CHECK(v == 1.0);
  for (double v : calibrate(dark, white, dark).reflectance) CHECK(v == 0.0);
  for (double v : calibrate(filled(shape, 0.5), white, dark).reflectance) {
    CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
  }
  for (double v : calibrate(filled(shape, 0.5), dark, dark).reflectance) CHECK(v == 0.0);

  auto other = small_cube();
  other.wavelengths[0] = 640;
  CHECK_THROWS_AS(calibrate(shape, other, dark), ArgumentError);

  SUBCASE("affine invariance") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto raw = shape, w = shape, d = shape;
    for (std::size_t i = 0; i < raw.reflectance.size(); ++i) {
      d.reflectance[i] = 0.1 * u(rng);
      w.reflectance[i] = 0.6 + 0.4 * u(rng);
      raw.reflectance[i] = u(rng);
    }
    const auto base = calibrate(raw, w, d);
    for (double k : {0.01, 3.0, 1234.5}) {
      auto rs = raw, ws = w, ds = d;
      for (auto* c : {&rs, &ws, &ds})
        for (double& v : c->reflectance) v *= k;
      const auto scaled = calibrate(rs, ws, ds);
      for (std::size_t i = 0; i < base.reflectance.size(); ++i) {
        CHECK(std::abs(scaled.reflectance[i] - base.reflectance[i]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("mean_spectrum") {
  const auto cube = small_cube();
  SegmentationMask one{2, 2, {0, 0, 1, 0}};
  const auto s = mean_spectrum(cube, one, 1);
  for (std::size_t b = 0; b < 3; ++b) CHECK(s.values[b] == cube.at(0, 1, b));

  HyperspectralCube two = filled(cube, 0.0);
  for (std::size_t b = 0; b < 3; ++b) {
    two.at(0, 0, b) = 0.2;
    two.at(1, 0, b) = 0.4;
  }
  for (double v : mean_spectrum(two, SegmentationMask{2, 2, {1, 1, 0, 0}}, 0).values) {
    CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
  }
  for (double v : mean_spectrum(filled(cube, 0.7), SegmentationMask{2, 2, {1, 1, 1, 1}}, 0).values) {
    CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
  }
  CHECK_THROWS_AS(mean_spectrum(cube, SegmentationMask{2, 2, {0, 0, 0, 0}}, 0), ArgumentError);
  CHECK_THROWS_AS(mean_spectrum(cube, SegmentationMask{1, 2, {1, 1}}, 0), ArgumentError);

  SUBCASE("union of disjoint masks is the count-weighted mean") {
    const auto f = synth::spectral_fixture(3);
    std::mt19937_64 rng(8);
    SegmentationMask a{f.raw.width, f.raw.height, std::vector<std::uint8_t>(f.raw.pixels())};
    SegmentationMask b = a, both = a;
    for (std::size_t p = 0; p < f.raw.pixels(); ++p) {
      const auto r = rng() % 3;
      a.member[p] = r == 0;
      b.member[p] = r == 1;
      both.member[p] = r != 2;
    }
    const auto sa = mean_spectrum(f.raw, a, 0);
    const auto sb = mean_spectrum(f.raw, b, 0);
    const auto su = mean_spectrum(f.raw, both, 0);
    const double na = static_cast<double>(a.count()), nb = static_cast<double>(b.count());
    for (std::size_t i = 0; i < su.values.size(); ++i) {
      CHECK(std::abs(su.values[i] - (na * sa.values[i] + nb * sb.values[i]) / (na + nb)) <= 1e-12);
    }
  }
}

TEST_CASE("normalize_spectrum") {
  auto n = normalize_spectrum(spec(0, {1, 2, 3}, {0.1, 0.5, 0.9}));
  CHECK(n.normalized);
  CHECK(n.values[0] == 0.0);
  CHECK(n.values[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(n.values[2] == 1.0);
  auto again = normalize_spectrum(n);
  CHECK(again.values.front() == 0.0);
  CHECK(again.values.back() == 1.0);
  CHECK_THROWS_AS(normalize_spectrum(spec(0, {1, 2}, {0.4, 0.4})), DegenerateInputError);
  CHECK_THROWS_AS(normalize_spectrum(spec(0, {}, {})), DegenerateInputError);
}

TEST_CASE("class_separation") {
  const std::vector<double> wl{700, 750, 800};
  std::vector<ClassSpectrum> same{spec(2, wl, {0.1, 0.2, 0.3}), spec(3, wl, {0.1, 0.2, 0.3})};
  for (double v : class_separation(same, 2, 3)) CHECK(v == 0.0);

  std::vector<ClassSpectrum> one{spec(2, wl, {0.1, 0.2, 0.3}), spec(3, wl, {0.1, 0.5, 0.3})};
  const auto s = class_separation(one, 2, 3);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(s[2] == 0.0);
  CHECK(class_separation(one, 3, 2) == s);
  CHECK_THROWS_AS(class_separation(one, 2, 4), ArgumentError);
}

TEST_CASE("select_wavelengths") {
  SUBCASE("planted fixture selects 700 and 770") {
    const auto f = synth::spectral_fixture(11);
    const auto cal = calibrate(f.raw, f.white, f.dark);
    std::vector<ClassSpectrum> spectra;
    for (int c = 0; c < 5; ++c) spectra.push_back(normalize_spectrum(mean_spectrum(cal, f.masks[c], c)));
    const auto sep = class_separation(spectra, 2, 3);
    const auto peak = std::max_element(sep.begin(), sep.end()) - sep.begin();
    CHECK(cal.wavelengths[static_cast<std::size_t>(peak)] == 770.0);
    const auto pair = select_wavelengths(spectra);
    CHECK(pair.visible_nm == 700.0);
    CHECK(pair.nir_nm == 770.0);

    // Adding a common constant to every spectrum leaves the choice unchanged.
    for (auto& s : spectra)
      for (double& v : s.values) v += 0.25;
    const auto shifted = select_wavelengths(spectra);
    CHECK(shifted.visible_nm == 700.0);
    CHECK(shifted.nir_nm == 770.0);
  }
  SUBCASE("single band per range") {
    const std::vector<double> wl{650, 800};
    std::vector<ClassSpectrum> s{spec(2, wl, {0, 1}), spec(3, wl, {1, 0})};
    const auto pair = select_wavelengths(s);
    CHECK(pair.visible_nm == 650.0);
    CHECK(pair.nir_nm == 800.0);
  }
  SUBCASE("NIR tie goes to the lower wavelength") {
    const std::vector<double> wl{700, 760, 780};
    std::vector<ClassSpectrum> s{spec(2, wl, {0, 0.2, 0.2}), spec(3, wl, {1, 0.5, 0.5})};
    CHECK(select_wavelengths(s).nir_nm == 760.0);
  }
  SUBCASE("argument errors") {
    const std::vector<double> wl{650, 800};
    std::vector<ClassSpectrum> s{spec(2, wl, {0, 1}), spec(3, wl, {1, 0})};
    CHECK_THROWS_AS(select_wavelengths(s, {600, 700}, {650, 900, true}), ArgumentError);
    CHECK_THROWS_AS(select_wavelengths(s, {600, 640}, {750, 975, true}), ArgumentError);
    CHECK_THROWS_AS(select_wavelengths({s[0]}), ArgumentError);
  }
}

TEST_CASE("mask files") {
  const auto path = scratch("m.pgm");
  SegmentationMask m{3, 2, {1, 0, 0, 0, 1, 1}};
  save_mask(m, path);
  const auto back = load_mask(path);
  CHECK(back.count() == 3);
  CHECK(back.member[4] != 0);
  CHECK(back.member[1] == 0);
  CHECK_THROWS_AS(load_mask(scratch("nope.pgm")), FormatError);
}
