#pragma once

#include "smokesplat/splat/scene.hpp"

#include <cstdint>
#include <filesystem>

namespace smokesplat::splat {

struct Checkpoint {
    GaussianScene scene;
    std::uint64_t iteration = 0;
};

/// File layout: one line of JSON
///   {"format":"smokesplat-scene","version":1,"budget":B,"background":[r,g,b],"iteration":N}
/// terminated by '\n', followed by B records of 14 little-endian f64 values:
/// position(3), log_scale(3), quaternion wxyz(4), opacity_logit, colour(3).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace smokesplat::splat
