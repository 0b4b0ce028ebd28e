#include "berrystack/weight_file.hpp"

#include <cmath>

#include <fmt/format.h>

#include "berrystack/errors.hpp"
#include "berrystack/io_util.hpp"

namespace berrystack::nn {

namespace {
constexpr char kMagic[4] = {'B', 'S', 'T', 'K'};
}

std::vector<std::uint8_t> encode_network(const Network& net) {
  net.validate();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  io::put_u32(out, kWeightFormatVersion);
  io::put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    io::put_u32(out, static_cast<std::uint32_t>(layer.out_width()));
    io::put_u32(out, static_cast<std::uint32_t>(layer.in_width()));
    out.push_back(layer.frozen ? 1 : 0);
    out.push_back(static_cast<std::uint8_t>(layer.activation));
    for (double w : layer.weights.values()) io::put_f32(out, static_cast<float>(w));
    for (double b : layer.bias.values()) io::put_f32(out, static_cast<float>(b));
  }
  return out;
}

Network decode_network(const std::vector<std::uint8_t>& bytes) {
  std::span<const std::uint8_t> in(bytes);
  if (in.size() < 12 || !std::equal(kMagic, kMagic + 4, in.begin())) {
    throw FormatError("not a BSTK weight file");
  }
  const std::uint32_t version = io::get_u32(in, 4);
  if (version != kWeightFormatVersion) {
    throw FormatError(fmt::format("unsupported weight format version {}", version));
  }
  const std::uint32_t count = io::get_u32(in, 8);
  std::size_t pos = 12;
  Network net;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t rows = io::get_u32(in, pos);
    const std::uint32_t cols = io::get_u32(in, pos + 4);
    pos += 8;
    if (pos + 2 > in.size()) throw FormatError("truncated layer header");
    if (rows == 0 || cols == 0) {
      throw FormatError(fmt::format("layer {} has an empty dimension", l));
    }
    const std::uint8_t frozen = in[pos];
    if (frozen > 1) throw FormatError(fmt::format("layer {}: bad frozen flag", l));
    const Activation act = activation_from_code(in[pos + 1]);
    pos += 2;
    const std::size_t needed =
        (static_cast<std::size_t>(rows) * cols + rows) * 4;
    if (pos + needed > in.size()) {
      throw FormatError(fmt::format("layer {}: expected {} bytes of parameters, {} left",
                                    l, needed, in.size() - pos));
    }
    DenseLayer layer = DenseLayer::zeros(cols, rows, act);
    layer.frozen = frozen == 1;
    for (double& w : layer.weights.values()) {
      w = io::get_f32(in, pos);
      pos += 4;
    }
    for (double& b : layer.bias.values()) {
      b = io::get_f32(in, pos);
      pos += 4;
    }
    if (!layer.weights.all_finite() || !layer.bias.all_finite()) {
      throw FormatError(fmt::format("layer {} holds non-finite parameters", l));
    }
    net.layers.push_back(std::move(layer));
  }
  if (pos != in.size()) {
    throw FormatError(fmt::format("{} trailing bytes after last layer", in.size() - pos));
  }
  net.validate();
  return net;
}

void save_network(const Network& net, const std::filesystem::path& path) {
  io::write_atomic(path, encode_network(net));
}

Network load_network(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw FormatError(fmt::format("weight file '{}' not found", path.string()));
  }
  return decode_network(io::read_bytes(path));
}

}  // namespace berrystack::nn
