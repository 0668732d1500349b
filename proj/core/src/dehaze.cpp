#include "smokesplat/dehaze.hpp"

#include "smokesplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace smokesplat::dehaze {
namespace {

// Separable min filter with clamp-to-edge windows. The minimum over a
// rectangle equals the minimum of per-row minima, so two 1-D passes are exact.
GrayMap min_filter(const GrayMap& src, int r) {
    if (r <= 0) return src;
    const int w = src.width;
    const int h = src.height;
    GrayMap rows(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double m = src(x, y);
            for (int k = std::max(0, x - r); k <= std::min(w - 1, x + r); ++k) m = std::min(m, src(k, y));
            rows(x, y) = m;
        }
    }
    GrayMap out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double m = rows(x, y);
            for (int k = std::max(0, y - r); k <= std::min(h - 1, y + r); ++k) m = std::min(m, rows(x, k));
            out(x, y) = m;
        }
    }
    return out;
}

GrayMap channel_min(const Image& img) {
    GrayMap out(img.width(), img.height());
    const auto d = img.data();
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = std::min({d[3 * i], d[3 * i + 1], d[3 * i + 2]});
    }
    return out;
}

void require_shape(const GrayMap& m, const Image& img, const char* what) {
    if (m.width != img.width() || m.height != img.height()) {
        throw DimensionMismatch(std::string(what) + ": map and image dimensions differ");
    }
}

}  // namespace

void DehazeParams::validate() const {
    if (patch_radius < 0) throw InvalidArgument("dehaze: patch_radius must be >= 0");
    if (!(omega > 0.0 && omega <= 1.0)) throw InvalidArgument("dehaze: omega must be in (0, 1]");
    if (!(airlight_fraction > 0.0 && airlight_fraction <= 1.0)) {
        throw InvalidArgument("dehaze: airlight_fraction must be in (0, 1]");
    }
    if (!(t_floor > 0.0 && t_floor < 1.0)) throw InvalidArgument("dehaze: t_floor must be in (0, 1)");
    if (guided_radius < 0) throw InvalidArgument("dehaze: guided_radius must be >= 0");
    if (!(guided_eps > 0.0)) throw InvalidArgument("dehaze: guided_eps must be > 0");
}

GrayMap dark_channel(const Image& img, int patch_radius) {
    return min_filter(channel_min(img), patch_radius);
}

Airlight estimate_airlight(const Image& img, const GrayMap& dark, double fraction) {
    require_shape(dark, img, "estimate_airlight");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("estimate_airlight: fraction must be in (0, 1]");
    const std::size_t n = dark.values.size();
    Airlight out;
    if (n == 0) return out;
    const auto count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))), 1, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto brighter = [&](std::size_t a, std::size_t b) {
        if (dark.values[a] != dark.values[b]) return dark.values[a] > dark.values[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), brighter);

    const auto d = img.data();
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < count; ++k) {
        for (int c = 0; c < 3; ++c) sum[c] += d[3 * order[k] + c];
    }
    for (int c = 0; c < 3; ++c) out.a[c] = std::clamp(sum[c] / static_cast<double>(count), kAirlightFloor, 1.0);
    return out;
}

TransmissionMap estimate_transmission(const Image& img, const Airlight& a, double omega, int patch_radius) {
    GrayMap normalized_min(img.width(), img.height());
    const auto d = img.data();
    for (std::size_t i = 0; i < normalized_min.values.size(); ++i) {
        double m = 1.0;
        for (int c = 0; c < 3; ++c) m = std::min(m, std::min(d[3 * i + c] / a.a[c], 1.0));
        normalized_min.values[i] = m;
    }
    TransmissionMap out{min_filter(normalized_min, patch_radius)};
    for (double& v : out.t.values) v = std::clamp(1.0 - omega * v, 0.0, 1.0);
    return out;
}

GrayMap box_mean(const GrayMap& src, int radius) {
    const int w = src.width;
    const int h = src.height;
    GrayMap rows(w, h);
    std::vector<double> prefix(static_cast<std::size_t>(std::max(w, h)) + 1);
    for (int y = 0; y < h; ++y) {
        prefix[0] = 0.0;
        for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + src(x, y);
        for (int x = 0; x < w; ++x) {
            const int lo = std::max(0, x - radius);
            const int hi = std::min(w - 1, x + radius);
            rows(x, y) = prefix[hi + 1] - prefix[lo];
        }
    }
    GrayMap out(w, h);
    for (int x = 0; x < w; ++x) {
        prefix[0] = 0.0;
        for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + rows(x, y);
        const int nx = std::min(w - 1, x + radius) - std::max(0, x - radius) + 1;
        for (int y = 0; y < h; ++y) {
            const int lo = std::max(0, y - radius);
            const int hi = std::min(h - 1, y + radius);
            out(x, y) = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(nx * (hi - lo + 1));
        }
    }
    return out;
}

GrayMap guided_filter(const GrayMap& guide, const GrayMap& src, int radius, double eps) {
    if (!guide.same_shape(src)) throw DimensionMismatch("guided_filter: guide and source dimensions differ");
    if (!(eps > 0.0)) throw InvalidArgument("guided_filter: eps must be > 0");
    const std::size_t n = src.values.size();

    GrayMap guide_sq(guide.width, guide.height);
    GrayMap guide_src(guide.width, guide.height);
    for (std::size_t i = 0; i < n; ++i) {
        guide_sq.values[i] = guide.values[i] * guide.values[i];
        guide_src.values[i] = guide.values[i] * src.values[i];
    }
    const GrayMap mean_i = box_mean(guide, radius);
    const GrayMap mean_p = box_mean(src, radius);
    const GrayMap corr_ii = box_mean(guide_sq, radius);
    const GrayMap corr_ip = box_mean(guide_src, radius);

    GrayMap a(src.width, src.height);
    GrayMap b(src.width, src.height);
    for (std::size_t i = 0; i < n; ++i) {
        const double var = corr_ii.values[i] - mean_i.values[i] * mean_i.values[i];
        const double cov = corr_ip.values[i] - mean_i.values[i] * mean_p.values[i];
        a.values[i] = cov / (var + eps);
        b.values[i] = mean_p.values[i] - a.values[i] * mean_i.values[i];
    }
    const GrayMap mean_a = box_mean(a, radius);
    const GrayMap mean_b = box_mean(b, radius);
    GrayMap out(src.width, src.height);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = mean_a.values[i] * guide.values[i] + mean_b.values[i];
    return out;
}

std::vector<double> recover_radiance_raw(const Image& img, const Airlight& a, const TransmissionMap& t,
                                         double t_floor) {
    require_shape(t.t, img, "recover_radiance");
    const auto d = img.data();
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < t.t.values.size(); ++i) {
        const double denom = std::max(t.t.values[i], t_floor);
        for (int c = 0; c < 3; ++c) out[3 * i + c] = (d[3 * i + c] - a.a[c]) / denom + a.a[c];
    }
    return out;
}

Image recover_radiance(const Image& img, const Airlight& a, const TransmissionMap& t, double t_floor) {
    return Image(img.width(), img.height(), recover_radiance_raw(img, a, t, t_floor));
}

Image apply_haze(const Image& clean, const TransmissionMap& t, const Airlight& a) {
    require_shape(t.t, clean, "apply_haze");
    const auto d = clean.data();
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < t.t.values.size(); ++i) {
        const double ti = t.t.values[i];
        for (int c = 0; c < 3; ++c) out[3 * i + c] = d[3 * i + c] * ti + a.a[c] * (1.0 - ti);
    }
    return Image(clean.width(), clean.height(), std::move(out));
}

DehazeResult dehaze_detailed(const Image& img, const DehazeParams& params) {
    params.validate();
    const GrayMap dark = dark_channel(img, params.patch_radius);
    const Airlight a = estimate_airlight(img, dark, params.airlight_fraction);
    TransmissionMap raw = estimate_transmission(img, a, params.omega, params.patch_radius);
    TransmissionMap refined{guided_filter(luminance(img), raw.t, params.guided_radius, params.guided_eps)};
    for (double& v : refined.t.values) v = std::clamp(v, 0.0, 1.0);
    Image out = recover_radiance(img, a, refined, params.t_floor);
    return DehazeResult{std::move(out), a, std::move(raw), std::move(refined)};
}

Image dehaze(const Image& img, const DehazeParams& params) { return dehaze_detailed(img, params).image; }

}  // namespace smokesplat::dehaze
