#include "berrystack/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "berrystack/errors.hpp"
#include "berrystack/io_util.hpp"

namespace berrystack {

double Image::sample(double x, double y, std::size_t c) const {
  const double maxx = static_cast<double>(width - 1);
  const double maxy = static_cast<double>(height - 1);
  x = std::clamp(x, 0.0, maxx);
  y = std::clamp(y, 0.0, maxy);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, width - 1);
  const std::size_t y1 = std::min(y0 + 1, height - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = at(x0, y0, c) + (at(x1, y0, c) - at(x0, y0, c)) * fx;
  const double bottom = at(x0, y1, c) + (at(x1, y1, c) - at(x0, y1, c)) * fx;
  return top + (bottom - top) * fy;
}

Image to_image(const Gray8& g) {
  Image img(g.width, g.height, 1);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) img.data[i] = g.pixels[i] / 255.0;
  return img;
}

Gray8 to_gray8(const Image& img, std::size_t channel) {
  Gray8 g{img.width, img.height, std::vector<std::uint8_t>(img.width * img.height)};
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const double v = std::clamp(img.data[i * img.channels + channel], 0.0, 1.0);
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return g;
}

Gray8 read_pgm(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  // Header: "P5" <ws> width <ws> height <ws> maxval <single ws> data.
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok += static_cast<char>(bytes[pos++]);
    return tok;
  };
  if (next_token() != "P5") {
    throw FormatError(fmt::format("'{}' is not a binary PGM", path.string()));
  }
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw FormatError(fmt::format("'{}': malformed PGM header", path.string()));
  }
  if (maxval != 255 || w == 0 || h == 0) {
    throw FormatError(fmt::format("'{}': only 8-bit PGM is supported", path.string()));
  }
  ++pos;  // single whitespace before raster
  if (bytes.size() < pos + w * h) {
    throw FormatError(fmt::format("'{}': expected {} raster bytes, found {}",
                                  path.string(), w * h, bytes.size() - std::min(pos, bytes.size())));
  }
  Gray8 g{w, h, std::vector<std::uint8_t>(bytes.begin() + pos, bytes.begin() + pos + w * h)};
  return g;
}

void write_pgm(const Gray8& img, const std::filesystem::path& path) {
  std::string out = fmt::format("P5\n{} {}\n255\n", img.width, img.height);
  out.append(img.pixels.begin(), img.pixels.end());
  io::write_atomic(path, out);
}

}  // namespace berrystack
