#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace berrystack {

/// 8-bit grayscale raster, row-major.
struct Gray8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
};

/// Real-valued image, row-major with interleaved channels (HWC).
/// Intensities are expected in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, double fill = 0.0)
      : width(w), height(h), channels(c), data(w * h * c, fill) {}

  double at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return data[(y * width + x) * channels + c];
  }
  double& at(std::size_t x, std::size_t y, std::size_t c = 0) {
    return data[(y * width + x) * channels + c];
  }

  // Bilinear sample at continuous pixel-centre coordinates; coordinates
  // outside the image are clamped to the border (edge replication).
  double sample(double x, double y, std::size_t c = 0) const;

  friend bool operator==(const Image&, const Image&) = default;
};

Image to_image(const Gray8& g);
// Rounds to the nearest 8-bit level after clamping to [0, 1]. Single channel.
Gray8 to_gray8(const Image& img, std::size_t channel = 0);

// Binary PGM (P5, maxval 255).
Gray8 read_pgm(const std::filesystem::path& path);
void write_pgm(const Gray8& img, const std::filesystem::path& path);

}  // namespace berrystack
