#pragma once

#include <string>
#include <vector>

#include "stf/trainer.hpp"

namespace stf {

/// One splat in the interchange layout: position, log-scales and rotation
/// from the covariance eigendecomposition, raw (inverse-sigmoid) opacity and
/// a per-splat SH set equal to the weight-blended corner SH. Readers
/// evaluate that set at one view direction per splat, so colors match the
/// per-corner evaluation exactly for the DC band and approximately above it.
struct PlyGaussian {
    Vec3 position = Vec3::Zero();
    Vec3 log_scales = Vec3::Zero();
    Vec4 quat = Vec4(1, 0, 0, 0);
    double opacity_raw = 0.0;
    std::array<double, 48> sh{};  // dc (3) + rest (45), channel-major rest
};

std::vector<PlyGaussian> state_to_ply_gaussians(const TrainState& state);

Gaussian3D ply_to_gaussian(const PlyGaussian& p, const Vec3& view_origin);

/// Binary little-endian PLY with the common splat property layout
/// (x y z nx ny nz f_dc_0..2 f_rest_0..44 opacity scale_0..2 rot_0..3).
void write_ply(const std::string& path, std::span<const PlyGaussian> gaussians);
std::vector<PlyGaussian> read_ply(const std::string& path);

}  // namespace stf
