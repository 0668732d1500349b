#include "smokesplat/image_io.hpp"

#include "smokesplat/error.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace smokesplat {
namespace {

bool has_png_signature(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    return bytes.size() >= 8 && std::memcmp(bytes.data(), kSig, 8) == 0;
}

bool has_ppm_signature(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6';
}

Image decode_png(std::span<const std::uint8_t> bytes, const std::string& origin) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IoError(IoErrorKind::corrupt_header, origin, msg);
    }
    if (image.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&image);
        throw IoError(IoErrorKind::unsupported_format, origin, "16-bit PNG");
    }
    // Read alpha along and discard it; asking for RGB would composite onto black.
    const bool alpha = image.format & PNG_FORMAT_FLAG_ALPHA;
    image.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    const int w = static_cast<int>(image.width);
    const int h = static_cast<int>(image.height);
    std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IoError(IoErrorKind::corrupt_data, origin, msg);
    }
    const std::size_t stride = alpha ? 4 : 3;
    std::vector<double> data(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t p = 0; p < data.size() / 3; ++p) {
        for (std::size_t c = 0; c < 3; ++c) data[3 * p + c] = raw[stride * p + c] / 255.0;
    }
    return Image(w, h, std::move(data));
}

// Reads the next whitespace-delimited integer token of a PPM header, skipping
// '#' comments. Returns -1 on malformed input.
long read_ppm_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    for (;;) {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        value = value * 10 + (bytes[pos] - '0');
        if (value > 1'000'000) return -1;
        ++pos;
        ++digits;
    }
    return digits == 0 ? -1 : value;
}

Image decode_ppm(std::span<const std::uint8_t> bytes, const std::string& origin) {
    std::size_t pos = 2;
    const long w = read_ppm_token(bytes, pos);
    const long h = read_ppm_token(bytes, pos);
    const long maxval = read_ppm_token(bytes, pos);
    if (w <= 0 || h <= 0 || maxval <= 0 || pos >= bytes.size() || !std::isspace(bytes[pos])) {
        throw IoError(IoErrorKind::corrupt_header, origin, "malformed P6 header");
    }
    if (maxval > 255) throw IoError(IoErrorKind::unsupported_format, origin, "16-bit PPM");
    ++pos;
    const std::size_t n = static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() - pos < n) throw IoError(IoErrorKind::corrupt_data, origin, "truncated P6 payload");
    std::vector<double> data(n);
    const double scale = static_cast<double>(maxval);
    for (std::size_t i = 0; i < n; ++i) data[i] = bytes[pos + i] / scale;
    return Image(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

std::vector<std::uint8_t> quantize(const Image& img) {
    const auto d = img.data();
    std::vector<std::uint8_t> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = quantize_channel(d[i]);
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw IoError(IoErrorKind::missing_file, path.string(), "");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::missing_file, path.string(), "cannot open");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::unwritable, path.string(), "");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoErrorKind::unwritable, path.string(), "write failed");
}

}  // namespace

std::uint8_t quantize_channel(double v) noexcept {
    const double q = std::floor(v * 255.0 + 0.5);
    if (!(q > 0.0)) return 0;
    if (q >= 255.0) return 255;
    return static_cast<std::uint8_t>(q);
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.empty()) throw InvalidArgument("cannot encode an empty image");
    const auto raw = quantize(img);
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, raw.data(), 0, nullptr)) {
        throw Error(std::string("png encode failed: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, raw.data(), 0, nullptr)) {
        throw Error(std::string("png encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
    const std::string header =
        "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const auto raw = quantize(img);
    out.insert(out.end(), raw.begin(), raw.end());
    return out;
}

Image decode_image(std::span<const std::uint8_t> bytes, const std::string& origin) {
    if (has_png_signature(bytes)) return decode_png(bytes, origin);
    if (has_ppm_signature(bytes)) return decode_ppm(bytes, origin);
    throw IoError(IoErrorKind::unsupported_format, origin, "expected PNG or binary PPM");
}

Image load_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return decode_image(bytes, path.string());
}

void save_image(const Image& img, const std::filesystem::path& path) {
    const auto parent = path.parent_path();
    std::error_code ec;
    if (!parent.empty() && !std::filesystem::is_directory(parent, ec)) {
        throw IoError(IoErrorKind::unwritable, path.string(), "parent directory does not exist");
    }
    const auto ext = path.extension().string();
    write_file(path, (ext == ".ppm" || ext == ".PPM") ? encode_ppm(img) : encode_png(img));
}

}  // namespace smokesplat
