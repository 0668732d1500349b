#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace smokesplat {

/// Row-major RGB raster with channels in [0, 1], top-left origin.
///
/// Storage is interleaved (r, g, b) per pixel. Constructors reject data of the
/// wrong length or with non-finite values; values outside [0, 1] are clamped.
class Image {
public:
    static constexpr int kChannels = 3;

    Image() = default;
    Image(int width, int height);
    Image(int width, int height, double r, double g, double b);
    Image(int width, int height, std::vector<double> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const noexcept { return data_.empty(); }

    double at(int x, int y, int c) const { return data_[index(x, y, c)]; }
    void set(int x, int y, int c, double v);

    std::span<const double> data() const noexcept { return data_; }
    std::span<const double> pixel(int x, int y) const {
        return std::span<const double>(data_).subspan(index(x, y, 0), kChannels);
    }

    bool same_shape(const Image& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// Single-channel real map with the same layout conventions as Image.
/// Values are not range-restricted.
struct GrayMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    GrayMap() = default;
    GrayMap(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

    double& operator()(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    bool same_shape(const GrayMap& o) const noexcept { return width == o.width && height == o.height; }

    friend bool operator==(const GrayMap&, const GrayMap&) = default;
};

/// Rec.601 luma: 0.299 R + 0.587 G + 0.114 B.
GrayMap luminance(const Image& img);

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Clamps a gray map into [0, 1] and replicates it into three channels.
Image gray_to_image(const GrayMap& map);

void require_same_shape(const Image& a, const Image& b, const char* what);

}  // namespace smokesplat
