#pragma once

#include "stf/sh.hpp"
#include "stf/types.hpp"

namespace stf {

/// Rendering primitive produced from one leaf tetrahedron.
struct Gaussian3D {
    Vec3 mean = Vec3::Zero();
    Mat3 cov = Mat3::Zero();
    Vec3 color = Vec3::Zero();   // RGB in [0,1]
    double opacity = 0.0;        // (0,1)
};

inline constexpr double kWeightFloor = 1e-6;
inline double weight_activation(double raw) { return (raw > 0.0 ? raw : 0.0) + kWeightFloor; }

Mat3 quat_to_rotation(const Vec4& q_unit);  // (w, x, y, z)

/// Weighted first/second moments of the corner positions: the mean is the
/// weighted barycenter and the covariance the unnormalized weighted scatter,
/// rotated by the learned quaternion.
void gaussian_geometry(const std::array<Vec3, 4>& corners, const std::array<double, 4>& weights,
                       const Vec4& quat_unit, Vec3& mean, Mat3& cov);

/// Weighted blend of the per-corner SH radiances, each evaluated along the
/// direction from the camera center to that corner. Includes the +0.5 DC
/// shift and the [0,1] clamp.
Vec3 color_from_sh(const std::array<Vec3, 4>& corners, const std::array<double, 4>& weights,
                   const std::array<const double*, 4>& sh, int l_max, const Vec3& view_origin);

struct LeafInputs {
    std::array<Vec3, 4> corners;
    std::array<double, 4> weight_raw;
    std::array<const double*, 4> sh;  // 3 * sh_coeff_count(l_max) doubles each
    int l_max = 0;
    double opacity_raw = 0.0;
    Vec4 quat_raw = Vec4(1, 0, 0, 0);
};

Gaussian3D tet_to_gaussian(const LeafInputs& in, const Vec3& view_origin);

struct GaussianAdjoint {
    Vec3 d_mean = Vec3::Zero();
    Mat3 d_cov = Mat3::Zero();  // full-matrix adjoint
    Vec3 d_color = Vec3::Zero();
    double d_opacity = 0.0;
};

struct LeafGrads {
    std::array<Vec3, 4> d_corners{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    std::array<double, 4> d_weight_raw{0, 0, 0, 0};
    /// dL/d(sh coefficients), same layout as the inputs; caller provides
    /// 4 spans of 3 * coeff_count doubles.
    std::array<double*, 4> d_sh{nullptr, nullptr, nullptr, nullptr};
    double d_opacity_raw = 0.0;
    Vec4 d_quat_raw = Vec4::Zero();
};

void tet_to_gaussian_backward(const LeafInputs& in, const Vec3& view_origin,
                              const GaussianAdjoint& adj, LeafGrads& grads);

/// Eigendecomposition of a symmetric PSD covariance into sqrt-eigenvalue
/// scales (descending) and a right-handed rotation. Throws on non-symmetric
/// input.
void covariance_to_scale_rotation(const Mat3& cov, Vec3& scales, Vec4& quat);

}  // namespace stf
