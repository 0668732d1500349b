#pragma once

#include "smokesplat/camera.hpp"
#include "smokesplat/image.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace smokesplat {

struct TrainingView {
    std::string name;
    Image image;
    CameraView camera;
};

struct TargetView {
    std::string name;
    CameraView camera;
    std::optional<Image> ground_truth;
};

/// A scene: M >= 2 posed training images and T target cameras, optionally with
/// ground truth for the targets.
struct Dataset {
    std::string scene_name;
    std::vector<TrainingView> training_views;
    std::vector<TargetView> target_views;

    void validate() const;
    bool has_ground_truth() const;
    std::vector<CameraView> target_cameras() const;
};

inline constexpr const char* kCamerasFile = "cameras.json";

/// Reads `<dir>/cameras.json` and every image it references.
///
/// Layout: {"scene": str, "train": [view...], "test": [view...]} where a view is
/// {fx, fy, cx, cy, rotation: 9 numbers row-major, translation: 3 numbers,
///  image: relative path, width, height}. `image` is required for train views;
/// test views without it must give width and height.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes images under `<dir>/train` and `<dir>/test` plus the camera file.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

nlohmann::json camera_to_json(const CameraView& cam);
CameraView camera_from_json(const nlohmann::json& j);

}  // namespace smokesplat
