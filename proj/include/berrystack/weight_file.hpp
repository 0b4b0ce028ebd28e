#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "berrystack/nnkernel.hpp"

// Binary network weight file.
//
//   bytes 0..3   magic "BSTK"
//   u32          format version (currently 1)
//   u32          layer count
//   per layer:
//     u32        rows (output width)
//     u32        cols (input width)
//     u8         frozen flag (0 / 1)
//     u8         activation code (0 none, 1 relu, 2 sigmoid)
//     f32[rows*cols]  weights, row-major
//     f32[rows]       bias
//
// All integers and floats are little-endian. Convolutional feature
// extractors are stored with each convolution unrolled into its equivalent
// dense matrix.

namespace berrystack::nn {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

std::vector<std::uint8_t> encode_network(const Network& net);
Network decode_network(const std::vector<std::uint8_t>& bytes);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace berrystack::nn
