#pragma once

#include <optional>
#include <vector>

#include "stf/camera.hpp"
#include "stf/image.hpp"
#include "stf/reparam.hpp"

namespace stf {

inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kAlphaCutoff = 1.0 / 255.0;
inline constexpr double kTransmittanceStop = 1e-4;
inline constexpr double kCovLowPass = 0.3;  // screen-space px^2 floor

struct Projected {
    Vec2 mean2d;
    Mat2 cov2d;    // includes the low-pass floor
    double depth;  // camera-space z
};

/// Perspective projection of a Gaussian through the local affine (Jacobian)
/// approximation; nullopt when culled by the near plane.
std::optional<Projected> project(const Gaussian3D& g, const Camera& cam);

struct RenderOutput {
    ImageF rgb;    // H x W x 3
    ImageF alpha;  // H x W x 1, the rendered opacity
};

struct SplatDiagnostics {
    int culled_near = 0;
    int skipped_singular = 0;
};

/// Per-render data retained for the backward pass.
struct RenderCache {
    struct Prepared {
        int index;  // into the input gaussian list
        Vec2 mean2d;
        Mat2 inv_cov;
        double depth;
        double opacity;
        Vec3 color;
        double x_min, x_max, y_min, y_max;  // pixel-center bounds
    };
    std::vector<Prepared> sorted;           // ascending depth
    std::vector<double> final_transmittance;  // per pixel
    std::vector<int> contributor_count;       // per pixel, entries into sorted
};

RenderOutput render(std::span<const Gaussian3D> gaussians, const Camera& cam,
                    const Vec3& background, RenderCache* cache = nullptr, int threads = 1,
                    SplatDiagnostics* diag = nullptr);

struct GaussianImageGrad {
    Vec3 d_mean = Vec3::Zero();
    Mat3 d_cov = Mat3::Zero();
    Vec3 d_color = Vec3::Zero();
    double d_opacity = 0.0;
    Vec2 d_mean2d = Vec2::Zero();  // screen-space positional gradient
    bool touched = false;          // contributed to at least one pixel
};

/// Exact reverse of render's arithmetic. d_rgb is H x W x 3 and d_alpha
/// H x W x 1 (either may be empty for a zero adjoint). Deterministic for any
/// thread count: per-chunk partial sums are reduced in chunk order.
std::vector<GaussianImageGrad> render_backward(std::span<const Gaussian3D> gaussians,
                                               const Camera& cam, const Vec3& background,
                                               const RenderCache& cache, const ImageF& d_rgb,
                                               const ImageF& d_alpha, int threads = 1);

}  // namespace stf
