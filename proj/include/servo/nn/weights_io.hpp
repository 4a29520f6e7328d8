#ifndef SERVO_NN_WEIGHTS_IO_HPP
#define SERVO_NN_WEIGHTS_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "servo/nn/network.hpp"

namespace servo::nn {

// On-disk weights format, bit-exact:
//   magic "VSNN", format version u32, record count u32, then one record per
//   parameter tensor: owning-layer kind tag u8, shape rank u32, extents u32
//   each, payload as little-endian 64-bit floats in row-major order.
//   Trailing CRC32 of all preceding bytes.
inline constexpr std::uint32_t kWeightsFormatVersion = 1;

std::uint32_t crc32(const std::uint8_t* data, std::size_t len);

std::vector<std::uint8_t> encode_weights(const Network& network);

// Loads into an already-built network; tags, ranks and extents must match
// the network's parameter sequence. Throws IoFailure on a corrupt file and
// ShapeMismatch when the file does not fit the network.
void decode_weights(Network& network, const std::vector<std::uint8_t>& bytes);

void save_weights(const Network& network, const std::string& path);
void load_weights(Network& network, const std::string& path);

}  // namespace servo::nn

#endif
