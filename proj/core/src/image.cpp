#include "smokesplat/image.hpp"

#include "smokesplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace smokesplat {

const char* to_string(IoErrorKind kind) {
    switch (kind) {
        case IoErrorKind::missing_file: return "missing file";
        case IoErrorKind::unsupported_format: return "unsupported format";
        case IoErrorKind::corrupt_header: return "corrupt header";
        case IoErrorKind::corrupt_data: return "corrupt data";
        case IoErrorKind::unwritable: return "unwritable path";
    }
    return "io error";
}

Image::Image(int width, int height) : Image(width, height, 0.0, 0.0, 0.0) {}

Image::Image(int width, int height, double r, double g, double b) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InvalidArgument("image dimensions must be non-negative");
    data_.resize(pixel_count() * kChannels);
    const double rgb[3] = {std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0)};
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] = rgb[i % 3];
}

Image::Image(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0) throw InvalidArgument("image dimensions must be non-negative");
    if (data_.size() != pixel_count() * kChannels) {
        throw InvalidArgument("image data length " + std::to_string(data_.size()) + " does not match " +
                              std::to_string(width) + "x" + std::to_string(height) + "x3");
    }
    for (double& v : data_) {
        if (!std::isfinite(v)) throw InvalidArgument("image data contains a non-finite value");
        v = std::clamp(v, 0.0, 1.0);
    }
}

void Image::set(int x, int y, int c, double v) {
    if (!std::isfinite(v)) throw InvalidArgument("non-finite channel value");
    data_[index(x, y, c)] = std::clamp(v, 0.0, 1.0);
}

GrayMap luminance(const Image& img) {
    GrayMap out(img.width(), img.height());
    const auto d = img.data();
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = kLumaR * d[3 * i] + kLumaG * d[3 * i + 1] + kLumaB * d[3 * i + 2];
    }
    return out;
}

Image gray_to_image(const GrayMap& map) {
    std::vector<double> data(map.values.size() * 3);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const double v = std::isfinite(map.values[i]) ? std::clamp(map.values[i], 0.0, 1.0) : 0.0;
        data[3 * i] = data[3 * i + 1] = data[3 * i + 2] = v;
    }
    return Image(map.width, map.height, std::move(data));
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.width()) + "x" +
                                std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                                std::to_string(b.height()));
    }
}

}  // namespace smokesplat
