#include "ivgen/codec.hpp"

#include <png.h>
#include <openssl/evp.h>
#include <openssl/sha.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "ivgen/error.hpp"

namespace ivgen {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ValidationError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ValidationError("invalid base64 data");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() > 1 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(bytes.data(), bytes.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

std::vector<std::uint8_t> tensor_bytes(const Tensor& t) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  std::vector<std::uint8_t> out(t.size() * sizeof(double));
  if (!out.empty()) std::memcpy(out.data(), t.values().data(), out.size());
  return out;
}

Tensor tensor_from_bytes(const Shape& shape, std::span<const std::uint8_t> bytes) {
  const std::size_t n = shape_size(shape);
  if (bytes.size() != n * sizeof(double)) {
    throw ValidationError("byte count " + std::to_string(bytes.size()) + " does not match shape " +
                          shape_to_string(shape));
  }
  std::vector<double> values(n);
  if (n) std::memcpy(values.data(), bytes.data(), bytes.size());
  return Tensor(shape, std::move(values));
}

std::string tensor_digest(const Tensor& t) {
  std::vector<std::uint8_t> bytes;
  for (std::size_t d : t.shape()) {
    const auto v = static_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  const auto values = tensor_bytes(t);
  bytes.insert(bytes.end(), values.begin(), values.end());
  return sha256_hex(bytes);
}

namespace {

struct PngWriteBuffer {
  std::vector<std::uint8_t>* out;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->out->insert(buf->out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngReadBuffer {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
  if (buf->offset + length > buf->data.size()) png_error(png, "truncated PNG");
  std::memcpy(out, buf->data.data() + buf->offset, length);
  buf->offset += length;
}

void png_warning_silent(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Tensor& image) {
  require_pixel_image(image, "png");
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  if (channels != 1 && channels != 3) throw ValidationError("PNG export supports 1 or 3 channels", "png");

  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> row(width * channels * 2);
  PngWriteBuffer buffer{&out};
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_silent);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ValidationError("PNG encoding failed", "png");
  }
  {
    png_set_write_fn(png, &buffer, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t c = 0; c < channels; ++c) {
          const auto v = static_cast<std::uint16_t>(std::lround(image.at(c, y, x) * 65535.0));
          row[(x * channels + c) * 2] = static_cast<std::uint8_t>(v >> 8);  // PNG is big-endian
          row[(x * channels + c) * 2 + 1] = static_cast<std::uint8_t>(v & 0xFF);
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Tensor decode_png(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) throw ValidationError("not a PNG stream", "png");
  PngReadBuffer buffer{data};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_silent);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("corrupt PNG stream", "png");
  }
  png_set_read_fn(png, &buffer, png_read_from_span);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info), height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth != 16 || (color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_GRAY)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("expected a 16-bit gray or RGB PNG", "png");
  }
  const std::size_t channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
  Tensor out({channels, height, width});
  std::vector<std::uint8_t> row(width * channels * 2);
  {
    for (std::size_t y = 0; y < height; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t c = 0; c < channels; ++c) {
          const std::uint16_t v = static_cast<std::uint16_t>((row[(x * channels + c) * 2] << 8) |
                                                             row[(x * channels + c) * 2 + 1]);
          out.at(c, y, x) = v / 65535.0;
        }
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace ivgen
