#include "smokesplat/pipeline/synth.hpp"

#include "smokesplat/dehaze.hpp"
#include "smokesplat/image_io.hpp"
#include "smokesplat/rng.hpp"
#include "smokesplat/splat/rasterizer.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace smokesplat::pipeline {
namespace {

using json = nlohmann::json;

Eigen::Vector3d vec3(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw InvalidArgument(std::string("synth spec: ") + what + " needs 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

// Saturated colour from a random hue.
Eigen::Vector3d saturated_color(Rng& rng) {
    const double h = rng.uniform() * 6.0;
    const double s = rng.uniform(0.85, 1.0);
    const double v = rng.uniform(0.6, 1.0);
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

Eigen::Vector4d to_wxyz(const Eigen::Quaterniond& q) { return {q.w(), q.x(), q.y(), q.z()}; }

std::string view_name(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03d", prefix, i);
    return buf;
}

splat::GaussianScene build_scene(const SynthSceneSpec& spec) {
    Rng rng(spec.seed);
    const double r = spec.scene_radius;
    splat::GaussianScene scene;
    scene.background = spec.background;

    for (int b = 0; b < spec.blobs; ++b) {
        splat::Gaussian g;
        Eigen::Vector3d offset;
        do {
            offset = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5)};
        } while (offset.norm() > 1.0);
        g.position = spec.ring.look_at + r * offset;
        for (int k = 0; k < 3; ++k) g.log_scale[k] = std::log(rng.uniform(0.1, 0.25) * r);
        Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        g.rotation = q.normalized();
        g.opacity_logit = splat::logit(0.9);
        g.color = saturated_color(rng);
        scene.gaussians.push_back(g);
    }

    const int cells = std::max(spec.quad_cells, 1);
    for (int qd = 0; qd < spec.quads; ++qd) {
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const Eigen::Vector3d normal(std::cos(angle), std::sin(angle), 0.0);
        const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
        const Eigen::Vector3d u = up.cross(normal);
        const Eigen::Vector3d center =
            spec.ring.look_at + Eigen::Vector3d(rng.uniform(-0.6, 0.6) * r, rng.uniform(-0.6, 0.6) * r, 0.0);
        const double side = rng.uniform(0.8, 1.4) * r;
        const double cell = side / cells;
        const Eigen::Vector3d c0 = saturated_color(rng);
        const Eigen::Vector3d c1 = saturated_color(rng);
        Eigen::Matrix3d frame;
        frame.col(0) = u;
        frame.col(1) = up;
        frame.col(2) = normal;
        const Eigen::Vector4d rot = to_wxyz(Eigen::Quaterniond(frame).normalized());
        for (int i = 0; i < cells; ++i) {
            for (int j = 0; j < cells; ++j) {
                splat::Gaussian g;
                g.position = center + ((i + 0.5) * cell - 0.5 * side) * u + ((j + 0.5) * cell - 0.5 * side) * up;
                g.log_scale = Eigen::Vector3d(std::log(0.55 * cell), std::log(0.55 * cell), std::log(0.02 * cell));
                g.rotation = rot;
                g.opacity_logit = splat::logit(0.95);
                g.color = ((i + j) % 2 == 0) ? c0 : c1;
                scene.gaussians.push_back(g);
            }
        }
    }

    if (spec.ground) {
        const int n = std::max(spec.ground_cells, 1);
        const double side = 4.0 * r;
        const double cell = side / n;
        const Eigen::Vector3d c0 = saturated_color(rng);
        const Eigen::Vector3d c1 = 0.5 * saturated_color(rng);
        const double z = spec.ring.look_at.z() - 0.5 * r;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                splat::Gaussian g;
                g.position = spec.ring.look_at + Eigen::Vector3d((i + 0.5) * cell - 0.5 * side,
                                                                 (j + 0.5) * cell - 0.5 * side, 0.0);
                g.position.z() = z;
                g.log_scale = Eigen::Vector3d(std::log(0.55 * cell), std::log(0.55 * cell), std::log(0.02 * cell));
                g.rotation = {1.0, 0.0, 0.0, 0.0};
                g.opacity_logit = splat::logit(0.95);
                g.color = ((i + j) % 2 == 0) ? c0 : c1;
                scene.gaussians.push_back(g);
            }
        }
    }
    scene.sanitize();
    return scene;
}

CameraView ring_camera(const SynthSceneSpec& spec, double angle) {
    const auto& ring = spec.ring;
    const Eigen::Vector3d eye =
        ring.look_at + Eigen::Vector3d(ring.radius * std::cos(angle), ring.radius * std::sin(angle), ring.height);
    return CameraView::look_at(eye, ring.look_at, Eigen::Vector3d::UnitZ(), spec.focal, spec.width, spec.height);
}

}  // namespace

void SynthSceneSpec::validate() const {
    if (ring.count < 2) throw InvalidArgument("synth spec: the camera ring needs at least 2 cameras");
    if (!(ring.radius >= 0.0)) throw InvalidArgument("synth spec: ring radius must be >= 0");
    if (test_views < 0) throw InvalidArgument("synth spec: test_views must be >= 0");
    if (blobs < 0 || quads < 0 || quad_cells < 1 || ground_cells < 1) throw InvalidArgument("synth spec: negative object counts");
    if (width < 1 || height < 1) throw InvalidArgument("synth spec: image size must be positive");
    if (!(focal > 0.0)) throw InvalidArgument("synth spec: focal must be > 0");
    if (!(scene_radius > 0.0)) throw InvalidArgument("synth spec: scene_radius must be > 0");
    if (!(beta >= 0.0)) throw InvalidArgument("synth spec: beta must be >= 0");
    if (!(background_depth >= 0.0)) throw InvalidArgument("synth spec: background_depth must be >= 0");
    for (int c = 0; c < 3; ++c) {
        if (!(airlight[c] > 0.0 && airlight[c] <= 1.0)) throw InvalidArgument("synth spec: airlight must be in (0, 1]");
        if (!(background[c] >= 0.0 && background[c] <= 1.0)) {
            throw InvalidArgument("synth spec: background must be in [0, 1]");
        }
    }

    // Every camera centre on one line through the look-at point leaves the
    // scene unconstrained along that line.
    std::vector<Eigen::Vector3d> dirs;
    for (int k = 0; k < ring.count; ++k) {
        const double angle = 2.0 * std::numbers::pi * k / ring.count;
        const Eigen::Vector3d offset(ring.radius * std::cos(angle), ring.radius * std::sin(angle), ring.height);
        if (offset.norm() < 1e-9) throw InvalidArgument("synth spec: a camera coincides with the look-at point");
        dirs.push_back(offset.normalized());
    }
    bool collinear = true;
    for (const auto& d : dirs) collinear = collinear && d.cross(dirs.front()).norm() < 1e-9;
    if (collinear) throw InvalidArgument("synth spec: degenerate camera ring (all cameras collinear with look-at)");
    if (ring.radius < 1e-9) throw InvalidArgument("synth spec: cameras look straight down the up axis");
}

json SynthSceneSpec::to_json() const {
    return json{{"seed", seed},
                {"blobs", blobs},
                {"quads", quads},
                {"quad_cells", quad_cells},
                {"ground", ground},
                {"ground_cells", ground_cells},
                {"ring",
                 {{"radius", ring.radius},
                  {"height", ring.height},
                  {"count", ring.count},
                  {"look_at", vec3_json(ring.look_at)}}},
                {"test_views", test_views},
                {"width", width},
                {"height", height},
                {"focal", focal},
                {"scene_radius", scene_radius},
                {"airlight", vec3_json(airlight)},
                {"beta", beta},
                {"background", vec3_json(background)},
                {"background_depth", background_depth}};
}

SynthSceneSpec SynthSceneSpec::from_json(const json& j) {
    static const std::vector<std::string> known = {
        "seed", "blobs", "quads", "quad_cells", "ground", "ground_cells", "ring", "test_views", "width", "height",
        "focal", "scene_radius", "airlight", "beta", "background", "background_depth"};
    if (!j.is_object()) throw InvalidArgument("synth spec: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InvalidArgument("synth spec: unknown key '" + key + "'");
        }
    }
    SynthSceneSpec s;
    try {
        s.seed = j.value("seed", s.seed);
        s.blobs = j.value("blobs", s.blobs);
        s.quads = j.value("quads", s.quads);
        s.quad_cells = j.value("quad_cells", s.quad_cells);
        s.ground = j.value("ground", s.ground);
        s.ground_cells = j.value("ground_cells", s.ground_cells);
        if (j.contains("ring")) {
            const json& r = j.at("ring");
            s.ring.radius = r.value("radius", s.ring.radius);
            s.ring.height = r.value("height", s.ring.height);
            s.ring.count = r.value("count", s.ring.count);
            if (r.contains("look_at")) s.ring.look_at = vec3(r.at("look_at"), "ring.look_at");
        }
        s.test_views = j.value("test_views", s.test_views);
        s.width = j.value("width", s.width);
        s.height = j.value("height", s.height);
        s.focal = j.value("focal", s.focal);
        s.scene_radius = j.value("scene_radius", s.scene_radius);
        if (j.contains("airlight")) s.airlight = vec3(j.at("airlight"), "airlight");
        s.beta = j.value("beta", s.beta);
        if (j.contains("background")) s.background = vec3(j.at("background"), "background");
        s.background_depth = j.value("background_depth", s.background_depth);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

SynthSceneSpec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoErrorKind::missing_file, path, "cannot open synth spec");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidArgument("synth spec " + path.string() + ": " + e.what());
    }
    return SynthSceneSpec::from_json(j);
}

std::vector<CameraView> ring_cameras(const SynthSceneSpec& spec) {
    std::vector<CameraView> cams;
    for (int k = 0; k < spec.ring.count; ++k) {
        cams.push_back(ring_camera(spec, 2.0 * std::numbers::pi * k / spec.ring.count));
    }
    return cams;
}

std::vector<CameraView> test_cameras(const SynthSceneSpec& spec) {
    std::vector<CameraView> cams;
    for (int j = 0; j < spec.test_views; ++j) {
        const double slot = std::floor(static_cast<double>(j) * spec.ring.count / spec.test_views) + 0.5;
        cams.push_back(ring_camera(spec, 2.0 * std::numbers::pi * slot / spec.ring.count));
    }
    return cams;
}

SynthScene synth_scene(const SynthSceneSpec& spec) {
    spec.validate();
    SynthScene out;
    out.scene = build_scene(spec);
    out.clean.scene_name = "synth";
    out.smoked.scene_name = "synth";
    const splat::RenderSettings settings;
    const dehaze::Airlight airlight{{spec.airlight.x(), spec.airlight.y(), spec.airlight.z()}};

    const auto train = ring_cameras(spec);
    for (std::size_t k = 0; k < train.size(); ++k) {
        const auto r = splat::render_detailed(out.scene, train[k], settings, spec.background_depth);
        dehaze::TransmissionMap t{GrayMap(r.depth.width, r.depth.height)};
        for (std::size_t i = 0; i < t.t.values.size(); ++i) t.t.values[i] = std::exp(-spec.beta * r.depth.values[i]);
        const std::string name = view_name("train", static_cast<int>(k));
        out.clean.training_views.push_back({name, r.image, train[k]});
        out.smoked.training_views.push_back({name, dehaze::apply_haze(r.image, t, airlight), train[k]});
        out.train_depth.push_back(r.depth);
    }
    const auto test = test_cameras(spec);
    for (std::size_t k = 0; k < test.size(); ++k) {
        const auto r = splat::render_detailed(out.scene, test[k], settings, spec.background_depth);
        const std::string name = view_name("test", static_cast<int>(k));
        out.clean.target_views.push_back({name, test[k], r.image});
        out.smoked.target_views.push_back({name, test[k], r.image});
        out.test_depth.push_back(r.depth);
    }
    return out;
}

void write_synth(const SynthScene& synth, const SynthSceneSpec& spec, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "depth");
    save_dataset(synth.clean, dir / "clean");
    save_dataset(synth.smoked, dir / "smoked");

    json depth_meta = json::object();
    auto write_depth = [&](const std::string& name, const GrayMap& depth) {
        double max_depth = 0.0;
        for (double d : depth.values) max_depth = std::max(max_depth, d);
        GrayMap scaled = depth;
        if (max_depth > 0.0) {
            for (double& d : scaled.values) d /= max_depth;
        }
        save_image(gray_to_image(scaled), dir / "depth" / (name + ".png"));
        depth_meta[name] = {{"max_depth", max_depth}};
    };
    for (std::size_t k = 0; k < synth.train_depth.size(); ++k) {
        write_depth(synth.clean.training_views[k].name, synth.train_depth[k]);
    }
    for (std::size_t k = 0; k < synth.test_depth.size(); ++k) {
        write_depth(synth.clean.target_views[k].name, synth.test_depth[k]);
    }
    std::ofstream(dir / "depth" / "depth.json") << depth_meta.dump(2) << '\n';
    std::ofstream(dir / "spec.json") << spec.to_json().dump(2) << '\n';
}

}  // namespace smokesplat::pipeline
