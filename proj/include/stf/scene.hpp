#pragma once

#include <string>
#include <vector>

#include "stf/trainer.hpp"

namespace stf {

/// NeRF-synthetic style scene directory: a JSON manifest (transforms.json or
/// manifest.json) with camera_angle_x and per-frame camera-to-world
/// transforms (OpenGL convention), plus RGBA PNGs whose alpha channel is the
/// ground-truth mask. Frames without an alpha channel get mask == 1
/// everywhere, or inside the projected bbox when mask_bbox is given.
SceneDataset load_scene(const std::string& dir, const Aabb* mask_bbox = nullptr);

void save_scene(const std::string& dir, const SceneDataset& dataset, double fov_x);

/// Cameras on an orbit around `center`, azimuths evenly spread.
std::vector<Camera> make_orbit_cameras(int count, const Vec3& center, double radius,
                                       double elevation, double fov_x, int width, int height);

/// Renders the state from each camera and packages the result as a dataset
/// (quantized to 8 bits, like images that went through files).
SceneDataset make_synthetic_dataset(const TrainState& state, std::span<const Camera> cameras,
                                    const Vec3& background, int threads = 1);

/// Randomizes rendering attributes (SH, weights, opacities, rotations) into
/// ranges that produce a colorful mid-opacity target; used to build
/// reference scenes for self-consistency experiments.
void randomize_attributes(TrainState& state, Rng& rng);

}  // namespace stf
