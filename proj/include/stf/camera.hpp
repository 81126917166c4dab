#pragma once

#include "stf/types.hpp"

namespace stf {

/// Pinhole camera. Internal convention: camera space looks down +z,
/// x right, y down, matching the pixel grid. NeRF-style camera-to-world
/// matrices (OpenGL, -z forward) are converted on ingestion.
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    double near_plane = 0.01;
    Mat3 rot_c2w = Mat3::Identity();  // camera axes in world coordinates
    Vec3 origin = Vec3::Zero();

    Vec3 world_to_cam(const Vec3& p) const { return rot_c2w.transpose() * (p - origin); }

    /// Throws if the rotation part is not orthonormal with det +1 (tol 1e-4).
    static Camera from_gl_c2w(const Mat4& c2w, double fov_x, int width, int height,
                              double near_plane = 0.01);
};

Camera make_orbit_camera(const Vec3& center, double radius, double azimuth, double elevation,
                         double fov_x, int width, int height);

}  // namespace stf
