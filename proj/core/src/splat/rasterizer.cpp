#include "smokesplat/splat/rasterizer.hpp"

#include "smokesplat/error.hpp"
#include "smokesplat/splat/loss.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace smokesplat::splat {
namespace {

struct Projected {
    std::size_t index = 0;
    Splat2D splat;
    Eigen::Matrix2d conic;
    double opacity = 0.0;
    // Below this exponent opacity * exp(power) is certainly under alpha_min.
    double min_power = 0.0;
};

// Depth-sorted visible splats and, per pixel, the splats whose cutoff box
// covers the pixel centre, in compositing order (CSR layout).
struct Binning {
    std::vector<Projected> splats;
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> entries;
};

Binning bin_splats(const GaussianScene& scene, const CameraView& cam, const RenderSettings& settings) {
    Binning b;
    b.splats.reserve(scene.gaussians.size());
    for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
        const Gaussian& g = scene.gaussians[i];
        Projected p;
        p.index = i;
        p.splat = project_gaussian(g, cam, settings);
        if (p.splat.culled) continue;
        const double det = p.splat.cov2d.determinant();
        if (!(det > 0.0) || !std::isfinite(det)) continue;
        p.conic = p.splat.cov2d.inverse();
        p.opacity = g.opacity();
        p.min_power = std::log(settings.alpha_min / p.opacity) - 1e-9;
        b.splats.push_back(p);
    }
    std::stable_sort(b.splats.begin(), b.splats.end(), [](const Projected& a, const Projected& c) {
        if (a.splat.depth != c.splat.depth) return a.splat.depth < c.splat.depth;
        return a.index < c.index;
    });

    const int w = cam.width;
    const int h = cam.height;
    struct Box {
        int x0, x1, y0, y1;
    };
    std::vector<Box> boxes(b.splats.size());
    std::vector<std::size_t> counts(static_cast<std::size_t>(w) * h + 1, 0);
    for (std::size_t k = 0; k < b.splats.size(); ++k) {
        const auto& s = b.splats[k].splat;
        const double tr = 0.5 * (s.cov2d(0, 0) + s.cov2d(1, 1));
        const double disc = std::sqrt(std::max(0.0, tr * tr - s.cov2d.determinant()));
        // Beyond sqrt(2 ln(o / alpha_min)) standard deviations alpha is below
        // the skip threshold anyway, so the box may shrink to that radius.
        const Projected& pk = b.splats[k];
        const double reach = std::sqrt(std::max(0.0, 2.0 * std::log(pk.opacity / settings.alpha_min))) + 1e-9;
        const double radius = std::min(settings.cutoff_sigma, reach) * std::sqrt(tr + disc);
        // Pixel i is covered when its centre i + 0.5 lies within mean +- radius.
        Box box{static_cast<int>(std::ceil(s.mean2d.x() - radius - 0.5)),
                static_cast<int>(std::floor(s.mean2d.x() + radius - 0.5)),
                static_cast<int>(std::ceil(s.mean2d.y() - radius - 0.5)),
                static_cast<int>(std::floor(s.mean2d.y() + radius - 0.5))};
        if (!std::isfinite(radius) || box.x1 < 0 || box.y1 < 0 || box.x0 >= w || box.y0 >= h) {
            box = {1, 0, 1, 0};
        } else {
            box = {std::max(box.x0, 0), std::min(box.x1, w - 1), std::max(box.y0, 0), std::min(box.y1, h - 1)};
        }
        boxes[k] = box;
        for (int y = box.y0; y <= box.y1; ++y)
            for (int x = box.x0; x <= box.x1; ++x) ++counts[static_cast<std::size_t>(y) * w + x + 1];
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    b.offsets = counts;
    b.entries.resize(counts.back());
    std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
    for (std::size_t k = 0; k < b.splats.size(); ++k) {
        const Box& box = boxes[k];
        for (int y = box.y0; y <= box.y1; ++y)
            for (int x = box.x0; x <= box.x1; ++x)
                b.entries[cursor[static_cast<std::size_t>(y) * w + x]++] = static_cast<std::uint32_t>(k);
    }
    return b;
}

struct Contribution {
    std::uint32_t splat;
    double alpha;
    double gauss;
    double transmittance;
    bool clamped;
    Eigen::Vector2d delta;
};

// Evaluates one pixel front to back; records every composited splat.
template <typename Sink>
double composite_pixel(const Binning& b, std::size_t pixel, const Eigen::Vector2d& center,
                       const RenderSettings& settings, Sink&& sink) {
    double t = 1.0;
    for (std::size_t e = b.offsets[pixel]; e < b.offsets[pixel + 1]; ++e) {
        const std::uint32_t k = b.entries[e];
        const Projected& p = b.splats[k];
        const Eigen::Vector2d d = center - p.splat.mean2d;
        const double power = -0.5 * d.dot(p.conic * d);
        if (power < p.min_power) continue;
        const double gauss = std::exp(power);
        const double raw = p.opacity * gauss;
        const bool clamped = raw > settings.alpha_max;
        const double alpha = clamped ? settings.alpha_max : raw;
        if (alpha < settings.alpha_min) continue;
        sink(Contribution{k, alpha, gauss, t, clamped, d});
        t *= 1.0 - alpha;
    }
    return t;
}

}  // namespace

RenderOutput render_detailed(const GaussianScene& scene, const CameraView& cam, const RenderSettings& settings,
                             double background_depth) {
    const int w = cam.width;
    const int h = cam.height;
    const Binning b = bin_splats(scene, cam, settings);
    std::vector<double> color(static_cast<std::size_t>(w) * h * 3);
    RenderOutput out;
    out.final_transmittance = GrayMap(w, h);
    out.splat_weight = GrayMap(w, h);
    out.depth = GrayMap(w, h);
    out.contributors.assign(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            double weight = 0.0;
            double depth = 0.0;
            int n = 0;
            const double t_end = composite_pixel(b, pix, {x + 0.5, y + 0.5}, settings, [&](const Contribution& ct) {
                const double wgt = ct.alpha * ct.transmittance;
                const Projected& p = b.splats[ct.splat];
                c += wgt * scene.gaussians[p.index].color;
                weight += wgt;
                depth += wgt * p.splat.depth;
                ++n;
            });
            c += t_end * scene.background;
            for (int ch = 0; ch < 3; ++ch) color[3 * pix + ch] = c[ch];
            out.final_transmittance.values[pix] = t_end;
            out.splat_weight.values[pix] = weight;
            out.depth.values[pix] = depth + t_end * background_depth;
            out.contributors[pix] = n;
        }
    }
    out.image = Image(w, h, std::move(color));
    return out;
}

Image render(const GaussianScene& scene, const CameraView& cam, const RenderSettings& settings) {
    return render_detailed(scene, cam, settings).image;
}

BackwardResult backward(const GaussianScene& scene, const CameraView& cam, const Image& target, double lambda,
                        const RenderSettings& settings) {
    if (target.width() != cam.width || target.height() != cam.height) {
        throw DimensionMismatch("backward: target does not match the camera raster");
    }
    const int w = cam.width;
    const int h = cam.height;
    const Binning b = bin_splats(scene, cam, settings);

    BackwardResult result;
    result.gradients = SceneGradients(scene.gaussians.size());
    {
        std::vector<double> color(static_cast<std::size_t>(w) * h * 3);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * w + x;
                Eigen::Vector3d c = Eigen::Vector3d::Zero();
                const double t_end = composite_pixel(b, pix, {x + 0.5, y + 0.5}, settings, [&](const Contribution& ct) {
                    c += (ct.alpha * ct.transmittance) * scene.gaussians[b.splats[ct.splat].index].color;
                });
                c += t_end * scene.background;
                for (int ch = 0; ch < 3; ++ch) color[3 * pix + ch] = c[ch];
            }
        }
        result.rendered = Image(w, h, std::move(color));
    }
    const LossGradient lg = loss_with_gradient(result.rendered, target, lambda);
    result.loss = lg.value;

    const std::size_t n = b.splats.size();
    std::vector<Eigen::Vector2d> d_mean(n, Eigen::Vector2d::Zero());
    std::vector<Eigen::Matrix2d> d_conic(n, Eigen::Matrix2d::Zero());
    std::vector<double> d_opacity(n, 0.0);
    std::vector<Eigen::Vector3d> d_color(n, Eigen::Vector3d::Zero());
    Eigen::Vector3d d_background = Eigen::Vector3d::Zero();

    std::vector<Contribution> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            const Eigen::Vector3d g_pix(lg.d_rendered[3 * pix], lg.d_rendered[3 * pix + 1], lg.d_rendered[3 * pix + 2]);
            stack.clear();
            const double t_end = composite_pixel(b, pix, {x + 0.5, y + 0.5}, settings,
                                                 [&](const Contribution& ct) { stack.push_back(ct); });
            d_background += g_pix * t_end;
            // Colour accumulated behind splat i, including the background.
            Eigen::Vector3d behind = t_end * scene.background;
            for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
                const Projected& p = b.splats[it->splat];
                const Eigen::Vector3d& c = scene.gaussians[p.index].color;
                const double wgt = it->alpha * it->transmittance;
                d_color[it->splat] += g_pix * wgt;
                const double d_alpha = g_pix.dot(c * it->transmittance - behind / (1.0 - it->alpha));
                behind += c * wgt;
                if (it->clamped) continue;
                d_opacity[it->splat] += d_alpha * it->gauss;
                const double d_gauss = d_alpha * p.opacity;
                // gauss = exp(-0.5 d^T conic d), d = centre - mean.
                d_mean[it->splat] += d_gauss * it->gauss * (p.conic * it->delta);
                d_conic[it->splat] += (-0.5 * d_gauss * it->gauss) * (it->delta * it->delta.transpose());
            }
        }
    }

    result.gradients.background = d_background;
    for (std::size_t k = 0; k < n; ++k) {
        const Projected& p = b.splats[k];
        const Gaussian& g = scene.gaussians[p.index];
        const Eigen::Matrix2d d_cov = -p.conic * d_conic[k] * p.conic;
        Gaussian geo = project_gaussian_backward(g, cam, d_mean[k], d_cov);
        Gaussian& out = result.gradients.gaussians[p.index];
        out.position = geo.position;
        out.log_scale = geo.log_scale;
        out.rotation = geo.rotation;
        out.opacity_logit = d_opacity[k] * p.opacity * (1.0 - p.opacity);
        out.color = d_color[k];
    }
    return result;
}

}  // namespace smokesplat::splat
