#include "stf/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace stf {

Camera Camera::from_gl_c2w(const Mat4& c2w, double fov_x, int width, int height,
                           double near_plane) {
    Mat3 r_gl = c2w.topLeftCorner<3, 3>();
    if ((r_gl * r_gl.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-4 ||
        std::abs(r_gl.determinant() - 1.0) > 1e-4)
        throw std::invalid_argument("camera transform is not rigid");
    Camera cam;
    // OpenGL convention: x right, y up, -z forward. Flip y and z columns to
    // get the y-down, +z-forward frame used for projection.
    Mat3 flip = Mat3::Identity();
    flip(1, 1) = -1.0;
    flip(2, 2) = -1.0;
    cam.rot_c2w = r_gl * flip;
    cam.origin = c2w.topRightCorner<3, 1>();
    cam.width = width;
    cam.height = height;
    cam.fx = 0.5 * width / std::tan(0.5 * fov_x);
    cam.fy = cam.fx;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.near_plane = near_plane;
    return cam;
}

Camera make_orbit_camera(const Vec3& center, double radius, double azimuth, double elevation,
                         double fov_x, int width, int height) {
    Vec3 dir(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
             std::sin(elevation));
    Camera cam;
    cam.origin = center + radius * dir;
    Vec3 forward = (center - cam.origin).normalized();  // +z
    Vec3 world_up(0, 0, 1);
    if (std::abs(forward.dot(world_up)) > 0.999) world_up = Vec3(0, 1, 0);
    Vec3 right = forward.cross(world_up).normalized();
    Vec3 down = forward.cross(right);  // y points down in image space
    cam.rot_c2w.col(0) = right;
    cam.rot_c2w.col(1) = down;
    cam.rot_c2w.col(2) = forward;
    cam.width = width;
    cam.height = height;
    cam.fx = 0.5 * width / std::tan(0.5 * fov_x);
    cam.fy = cam.fx;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    return cam;
}

}  // namespace stf
