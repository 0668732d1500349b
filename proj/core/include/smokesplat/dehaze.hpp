#pragma once

#include "smokesplat/image.hpp"

#include <array>

namespace smokesplat::dehaze {

/// Dark-channel-prior parameters. Defaults are the classical settings.
struct DehazeParams {
    int patch_radius = 7;
    double omega = 0.95;
    double airlight_fraction = 0.001;
    double t_floor = 0.1;
    int guided_radius = 30;
    double guided_eps = 1e-3;

    void validate() const;
};

/// Per-pixel transmission in [0, 1].
struct TransmissionMap {
    GrayMap t;

    int width() const noexcept { return t.width; }
    int height() const noexcept { return t.height; }
};

/// Atmospheric light, every channel in [1e-3, 1].
struct Airlight {
    std::array<double, 3> a{1.0, 1.0, 1.0};
};

inline constexpr double kAirlightFloor = 1e-3;

/// Windowed minimum over the (2r+1)^2 neighbourhood (clamped at the borders)
/// of the per-pixel channel minimum.
GrayMap dark_channel(const Image& img, int patch_radius);

/// Mean colour of the ceil(fraction * N) pixels with the brightest dark
/// channel; ties go to the lower row-major index.
Airlight estimate_airlight(const Image& img, const GrayMap& dark, double fraction);

/// t = 1 - omega * dark_channel(min(img / A, 1)), clamped to [0, 1].
TransmissionMap estimate_transmission(const Image& img, const Airlight& a, double omega, int patch_radius);

/// Mean over the border-truncated (2r+1)^2 window: pixels outside the raster
/// are excluded and the divisor is the in-bounds count.
GrayMap box_mean(const GrayMap& src, int radius);

/// Guided filter with a single-channel guide.
GrayMap guided_filter(const GrayMap& guide, const GrayMap& src, int radius, double eps);

/// J = (I - A) / max(t, t_floor) + A, clamped to [0, 1].
Image recover_radiance(const Image& img, const Airlight& a, const TransmissionMap& t, double t_floor);

/// Un-clamped recovery, for round-trip checks against the forward model.
std::vector<double> recover_radiance_raw(const Image& img, const Airlight& a, const TransmissionMap& t,
                                         double t_floor);

/// Forward haze model: I = J t + A (1 - t).
Image apply_haze(const Image& clean, const TransmissionMap& t, const Airlight& a);

struct DehazeResult {
    Image image;
    Airlight airlight;
    TransmissionMap raw_transmission;
    TransmissionMap refined_transmission;
};

DehazeResult dehaze_detailed(const Image& img, const DehazeParams& params);
Image dehaze(const Image& img, const DehazeParams& params);

}  // namespace smokesplat::dehaze
