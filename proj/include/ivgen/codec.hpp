#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ivgen/tensor.hpp"

namespace ivgen {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);  // throws ValidationError

std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Little-endian IEEE-754 bytes of every value.
std::vector<std::uint8_t> tensor_bytes(const Tensor& t);
Tensor tensor_from_bytes(const Shape& shape, std::span<const std::uint8_t> bytes);

// SHA-256 over the shape and the little-endian value bytes.
std::string tensor_digest(const Tensor& t);

// Lossless 16-bit PNG of a [C,H,W] image in [0,1] (C = 1 gray, 3 RGB).
// Values are quantized to 1/65535 steps; the PNG stores that quantization exactly.
std::vector<std::uint8_t> encode_png(const Tensor& image);
Tensor decode_png(std::span<const std::uint8_t> png);

}  // namespace ivgen
