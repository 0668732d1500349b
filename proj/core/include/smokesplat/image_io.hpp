#pragma once

#include "smokesplat/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace smokesplat {

/// Round-half-up 8-bit quantization: floor(v * 255 + 0.5), saturated.
std::uint8_t quantize_channel(double v) noexcept;

/// Loads an 8-bit PNG (RGB, RGBA or gray) or a binary PPM (P6). Alpha is dropped.
/// Throws IoError with a kind identifying missing files, unknown formats and
/// malformed headers or payloads.
Image load_image(const std::filesystem::path& path);

/// Writes `.ppm` files as P6 and everything else as 8-bit RGB PNG.
void save_image(const Image& img, const std::filesystem::path& path);

/// In-memory codecs, used for the enhancement wire format and pipes.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_image(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

std::vector<std::uint8_t> encode_ppm(const Image& img);

}  // namespace smokesplat
