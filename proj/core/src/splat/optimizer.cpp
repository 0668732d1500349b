#include "smokesplat/splat/optimizer.hpp"

#include "smokesplat/error.hpp"
#include "smokesplat/splat/adam.hpp"
#include "smokesplat/splat/rasterizer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace smokesplat::splat {
namespace {

bool visible_in(const Eigen::Vector3d& p, const CameraView& cam, double z_near, Eigen::Vector2i* pixel) {
    const Eigen::Vector3d q = cam.rotation * p + cam.translation;
    if (q.z() <= z_near) return false;
    const double u = cam.fx * q.x() / q.z() + cam.cx;
    const double v = cam.fy * q.y() / q.z() + cam.cy;
    if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) return false;
    if (pixel != nullptr) *pixel = {static_cast<int>(u), static_cast<int>(v)};
    return true;
}

void validate_views(const std::vector<PosedImage>& views) {
    if (views.empty()) throw InvalidArgument("optimize: no training views");
    for (const auto& v : views) {
        v.camera.validate();
        if (v.image.width() != v.camera.width || v.image.height() != v.camera.height) {
            throw DimensionMismatch("optimize: view image does not match its camera raster");
        }
    }
}

}  // namespace

void OptimConfig::validate() const {
    if (iterations < 0) throw InvalidArgument("optimize: iterations must be >= 0");
    if (budget < 1) throw InvalidArgument("optimize: budget must be >= 1");
    if (relocation_interval < 0) throw InvalidArgument("optimize: relocation_interval must be >= 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("optimize: lambda must be in [0, 1]");
    if (opacity_reg < 0.0 || scale_reg < 0.0) throw InvalidArgument("optimize: regularizers must be >= 0");
    if (noise_scale < 0.0) throw InvalidArgument("optimize: noise_scale must be >= 0");
    if (!(init_extent > 0.0)) throw InvalidArgument("optimize: init_extent must be > 0");
}

SceneFocus scene_focus(const std::vector<CameraView>& cameras) {
    SceneFocus focus;
    if (cameras.empty()) return focus;
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    Eigen::Vector3d mean_forward = Eigen::Vector3d::Zero();
    for (const auto& cam : cameras) {
        const Eigen::Vector3d d = cam.forward();
        const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - d * d.transpose();
        a += proj;
        b += proj * cam.center();
        centroid += cam.center();
        mean_forward += d;
    }
    centroid /= static_cast<double>(cameras.size());
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
    if (lu.rank() == 3) {
        focus.center = lu.solve(b);
    } else {
        focus.center = centroid + mean_forward.normalized();
    }
    double dist = 0.0;
    for (const auto& cam : cameras) dist += (cam.center() - focus.center).norm();
    focus.extent = std::max(dist / static_cast<double>(cameras.size()), 1e-6);
    return focus;
}

GaussianScene initialize_scene(const std::vector<PosedImage>& views, const OptimConfig& cfg, Rng& rng,
                               const std::optional<std::vector<Eigen::Vector3d>>& init_points) {
    std::vector<CameraView> cams;
    for (const auto& v : views) cams.push_back(v.camera);
    const SceneFocus focus = scene_focus(cams);
    const double half = cfg.init_extent * focus.extent;
    const double z_near = cfg.render.z_near;

    std::vector<Eigen::Vector3d> points;
    points.reserve(cfg.budget);
    if (init_points && !init_points->empty()) {
        for (std::size_t i = 0; i < cfg.budget; ++i) points.push_back((*init_points)[i % init_points->size()]);
    } else {
        // Rejection-sample the frustum intersection; widen to "visible
        // somewhere" if the intersection is too thin to fill the budget.
        const std::size_t max_attempts = 2000 * cfg.budget;
        std::size_t attempts = 0;
        auto sample = [&] {
            return Eigen::Vector3d(focus.center.x() + rng.uniform(-half, half),
                                   focus.center.y() + rng.uniform(-half, half),
                                   focus.center.z() + rng.uniform(-half, half));
        };
        while (points.size() < cfg.budget && attempts < max_attempts) {
            ++attempts;
            const Eigen::Vector3d p = sample();
            const bool all = std::all_of(cams.begin(), cams.end(),
                                         [&](const CameraView& c) { return visible_in(p, c, z_near, nullptr); });
            if (all) points.push_back(p);
        }
        while (points.size() < cfg.budget) {
            const Eigen::Vector3d p = sample();
            const bool any = std::any_of(cams.begin(), cams.end(),
                                         [&](const CameraView& c) { return visible_in(p, c, z_near, nullptr); });
            if (any || ++attempts > 4 * max_attempts) points.push_back(p);
        }
    }

    GaussianScene scene;
    scene.background = cfg.initial_background;
    scene.gaussians.resize(cfg.budget);
    for (std::size_t i = 0; i < cfg.budget; ++i) {
        double nn = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i) nn = std::min(nn, (points[i] - points[j]).norm());
        }
        if (!std::isfinite(nn) || nn <= 0.0) nn = 0.1 * half;

        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        int hits = 0;
        for (const auto& v : views) {
            Eigen::Vector2i px;
            if (visible_in(points[i], v.camera, z_near, &px)) {
                const auto p = v.image.pixel(px.x(), px.y());
                color += Eigen::Vector3d(p[0], p[1], p[2]);
                ++hits;
            }
        }
        Gaussian& g = scene.gaussians[i];
        g.position = points[i];
        g.log_scale.setConstant(std::log(std::clamp(nn, kMinScale, kMaxScale)));
        g.rotation = {1.0, 0.0, 0.0, 0.0};
        g.opacity_logit = 0.0;
        g.color = hits > 0 ? Eigen::Vector3d(color / hits) : Eigen::Vector3d::Constant(0.5);
    }
    scene.sanitize();
    return scene;
}

GaussianScene optimize(const std::vector<PosedImage>& views, const OptimConfig& cfg,
                       const std::optional<GaussianScene>& initial,
                       const std::optional<std::vector<Eigen::Vector3d>>& init_points, const ProgressFn& progress) {
    cfg.validate();
    validate_views(views);
    Rng rng(cfg.seed);

    GaussianScene scene;
    if (initial) {
        scene = *initial;
        if (scene.budget() != cfg.budget) throw InvalidArgument("optimize: initial scene size differs from budget");
    } else {
        scene = initialize_scene(views, cfg, rng, init_points);
    }
    if (cfg.iterations == 0) return scene;

    std::vector<CameraView> cams;
    for (const auto& v : views) cams.push_back(v.camera);
    const double extent = scene_focus(cams).extent;

    constexpr std::size_t kStride = Gaussian::kParamCount;
    const std::size_t bg_offset = scene.budget() * kStride;
    std::vector<double> params = scene.flatten();
    std::vector<double> rates(params.size());
    auto fill_rates = [&](double position_lr) {
        for (std::size_t i = 0; i < scene.budget(); ++i) {
            double* r = rates.data() + i * kStride;
            std::fill_n(r, 3, position_lr);
            std::fill_n(r + 3, 3, cfg.lr.log_scale);
            std::fill_n(r + 6, 4, cfg.lr.rotation);
            r[10] = cfg.lr.opacity;
            std::fill_n(r + 11, 3, cfg.lr.color);
        }
        std::fill_n(rates.data() + bg_offset, 3, cfg.learn_background ? cfg.lr.background : 0.0);
    };
    AdamState adam(params.size());
    const double inv_b = 1.0 / static_cast<double>(scene.budget());
    const int relocation_stop = static_cast<int>(cfg.relocation_until * cfg.iterations);

    for (int it = 0; it < cfg.iterations; ++it) {
        const PosedImage& view = views[static_cast<std::size_t>(it) % views.size()];
        BackwardResult bw = backward(scene, view.camera, view.image, cfg.lambda, cfg.render);
        double loss = bw.loss;

        for (std::size_t i = 0; i < scene.budget(); ++i) {
            const Gaussian& g = scene.gaussians[i];
            Gaussian& d = bw.gradients.gaussians[i];
            const double o = g.opacity();
            loss += cfg.opacity_reg * inv_b * o;
            d.opacity_logit += cfg.opacity_reg * inv_b * o * (1.0 - o);
            for (int k = 0; k < 3; ++k) {
                const double s = std::exp(g.log_scale[k]);
                loss += cfg.scale_reg * inv_b / 3.0 * s;
                d.log_scale[k] += cfg.scale_reg * inv_b / 3.0 * s;
            }
        }

        const double progress_frac = cfg.iterations > 1 ? static_cast<double>(it) / (cfg.iterations - 1) : 1.0;
        const double pos_lr =
            extent * cfg.lr.position * std::pow(cfg.lr.position_final / cfg.lr.position, progress_frac);
        fill_rates(pos_lr);
        const std::vector<double> grads = bw.gradients.flatten();
        adam_step(params, grads, adam, rates, static_cast<std::uint64_t>(it) + 1);
        scene.assign(params);
        scene.sanitize();

        const int done = it + 1;
        if (cfg.relocation_interval > 0 && done % cfg.relocation_interval == 0 && done <= relocation_stop &&
            done < cfg.iterations) {
            RelocationConfig rc{cfg.dead_opacity, cfg.noise_scale * (1.0 - progress_frac)};
            mcmc_relocate(scene, rng, rc, &adam);
            scene.sanitize();
        }
        params = scene.flatten();
        if (progress) progress(done, loss);
    }
    return scene;
}

}  // namespace smokesplat::splat
