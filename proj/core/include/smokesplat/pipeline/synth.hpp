#pragma once

#include "smokesplat/dataset.hpp"
#include "smokesplat/error.hpp"
#include "smokesplat/splat/scene.hpp"

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace smokesplat::pipeline {

struct CameraRing {
    double radius = 4.0;
    /// Camera height above the look-at point (world z is up).
    double height = 1.5;
    int count = 8;
    Eigen::Vector3d look_at = Eigen::Vector3d::Zero();
};

/// Deterministic smoke scene: coloured blobs and textured quads over a
/// checkered ground, seen from a ring of cameras. Test cameras sit halfway between ring positions.
struct SynthSceneSpec {
    std::uint64_t seed = 1;
    int blobs = 12;
    int quads = 2;
    /// Flat Gaussians per quad side.
    int quad_cells = 4;
    /// Checkered ground plane under the objects, `ground_cells` squares per side.
    bool ground = true;
    int ground_cells = 8;
    CameraRing ring;
    int test_views = 2;
    int width = 64;
    int height = 64;
    double focal = 70.0;
    /// Objects are placed within this distance of the look-at point.
    double scene_radius = 1.5;
    Eigen::Vector3d airlight{0.8, 0.8, 0.8};
    /// Extinction per world unit; transmission is exp(-beta * depth).
    double beta = 0.15;
    Eigen::Vector3d background{0.70, 0.75, 0.80};
    /// Depth assigned to background pixels.
    double background_depth = 20.0;

    /// Throws InvalidArgument.
    void validate() const;
    nlohmann::json to_json() const;
    static SynthSceneSpec from_json(const nlohmann::json& j);
};

SynthSceneSpec load_synth_spec(const std::filesystem::path& path);

struct SynthScene {
    splat::GaussianScene scene;
    /// Clean training images and clean test ground truth.
    Dataset clean;
    /// Smoked training images; test ground truth stays clean.
    Dataset smoked;
    std::vector<GrayMap> train_depth;
    std::vector<GrayMap> test_depth;
};

/// Throws InvalidArgument for a degenerate ring (fewer than two cameras, or
/// every camera on one line through the look-at point).
SynthScene synth_scene(const SynthSceneSpec& spec);

/// Camera poses of the ring, in order, and the test poses between them.
std::vector<CameraView> ring_cameras(const SynthSceneSpec& spec);
std::vector<CameraView> test_cameras(const SynthSceneSpec& spec);

/// Writes `<dir>/clean`, `<dir>/smoked` (datasets), `<dir>/depth/<view>.png`
/// (depth divided by its maximum, recorded in depth.json) and spec.json.
void write_synth(const SynthScene& synth, const SynthSceneSpec& spec, const std::filesystem::path& dir);

}  // namespace smokesplat::pipeline
