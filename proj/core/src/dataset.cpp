#include "smokesplat/dataset.hpp"

#include "smokesplat/error.hpp"
#include "smokesplat/image_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace smokesplat {

using nlohmann::json;

void Dataset::validate() const {
    if (training_views.size() < 2) throw InvalidArgument("dataset needs at least two training views");
    for (const auto& v : training_views) {
        v.camera.validate();
        if (v.image.width() != v.camera.width || v.image.height() != v.camera.height) {
            throw DimensionMismatch("training view '" + v.name + "' image does not match its camera");
        }
    }
    for (const auto& t : target_views) {
        t.camera.validate();
        if (t.ground_truth &&
            (t.ground_truth->width() != t.camera.width || t.ground_truth->height() != t.camera.height)) {
            throw DimensionMismatch("target view '" + t.name + "' ground truth does not match its camera");
        }
    }
}

bool Dataset::has_ground_truth() const {
    if (target_views.empty()) return false;
    for (const auto& t : target_views) {
        if (!t.ground_truth) return false;
    }
    return true;
}

std::vector<CameraView> Dataset::target_cameras() const {
    std::vector<CameraView> cams;
    cams.reserve(target_views.size());
    for (const auto& t : target_views) cams.push_back(t.camera);
    return cams;
}

json camera_to_json(const CameraView& cam) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot.push_back(cam.rotation(r, c));
    return json{{"fx", cam.fx},
                {"fy", cam.fy},
                {"cx", cam.cx},
                {"cy", cam.cy},
                {"width", cam.width},
                {"height", cam.height},
                {"rotation", rot},
                {"translation", {cam.translation.x(), cam.translation.y(), cam.translation.z()}}};
}

CameraView camera_from_json(const json& j) {
    CameraView cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    const auto& rot = j.at("rotation");
    const auto& tr = j.at("translation");
    if (!rot.is_array() || rot.size() != 9) throw InvalidArgument("camera rotation must have 9 numbers");
    if (!tr.is_array() || tr.size() != 3) throw InvalidArgument("camera translation must have 3 numbers");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.rotation(r, c) = rot.at(3 * r + c).get<double>();
    for (int i = 0; i < 3; ++i) cam.translation(i) = tr.at(i).get<double>();
    cam.width = j.value("width", 0);
    cam.height = j.value("height", 0);
    return cam;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto file = dir / kCamerasFile;
    std::ifstream in(file);
    if (!in) throw IoError(IoErrorKind::missing_file, file.string(), "");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(IoErrorKind::corrupt_header, file.string(), e.what());
    }

    Dataset ds;
    try {
        ds.scene_name = doc.value("scene", dir.filename().string());
        int index = 0;
        for (const auto& jv : doc.at("train")) {
            TrainingView v;
            v.camera = camera_from_json(jv);
            const auto rel = jv.at("image").get<std::string>();
            v.name = jv.value("name", std::filesystem::path(rel).stem().string());
            v.image = load_image(dir / rel);
            if (v.camera.width == 0) v.camera.width = v.image.width();
            if (v.camera.height == 0) v.camera.height = v.image.height();
            ds.training_views.push_back(std::move(v));
            ++index;
        }
        index = 0;
        for (const auto& jv : doc.value("test", json::array())) {
            TargetView t;
            t.camera = camera_from_json(jv);
            if (jv.contains("image")) {
                const auto rel = jv.at("image").get<std::string>();
                t.name = jv.value("name", std::filesystem::path(rel).stem().string());
                t.ground_truth = load_image(dir / rel);
                if (t.camera.width == 0) t.camera.width = t.ground_truth->width();
                if (t.camera.height == 0) t.camera.height = t.ground_truth->height();
            } else {
                t.name = jv.value("name", "target_" + std::to_string(index));
            }
            ds.target_views.push_back(std::move(t));
            ++index;
        }
    } catch (const json::exception& e) {
        throw IoError(IoErrorKind::corrupt_header, file.string(), e.what());
    }
    ds.validate();
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "train");
    std::filesystem::create_directories(dir / "test");
    json doc;
    doc["scene"] = dataset.scene_name;
    doc["train"] = json::array();
    doc["test"] = json::array();
    for (const auto& v : dataset.training_views) {
        const std::string rel = "train/" + v.name + ".png";
        save_image(v.image, dir / rel);
        auto jv = camera_to_json(v.camera);
        jv["name"] = v.name;
        jv["image"] = rel;
        doc["train"].push_back(std::move(jv));
    }
    for (const auto& t : dataset.target_views) {
        auto jv = camera_to_json(t.camera);
        jv["name"] = t.name;
        if (t.ground_truth) {
            const std::string rel = "test/" + t.name + ".png";
            save_image(*t.ground_truth, dir / rel);
            jv["image"] = rel;
        }
        doc["test"].push_back(std::move(jv));
    }
    std::ofstream out(dir / kCamerasFile);
    if (!out) throw IoError(IoErrorKind::unwritable, (dir / kCamerasFile).string(), "");
    out << doc.dump(2) << '\n';
}

}  // namespace smokesplat
