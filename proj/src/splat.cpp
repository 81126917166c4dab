#include "stf/splat.hpp"

#include <algorithm>
#include <cmath>

#include "stf/parallel.hpp"

namespace stf {

namespace {

Mat3 world_to_cam_rot(const Camera& cam) { return cam.rot_c2w.transpose(); }

/// Projection Jacobian d(u,v)/d(camera point) at t.
Eigen::Matrix<double, 2, 3> proj_jacobian(const Camera& cam, const Vec3& t) {
    Eigen::Matrix<double, 2, 3> j;
    const double z = t.z(), z2 = z * z;
    j << cam.fx / z, 0.0, -cam.fx * t.x() / z2,
         0.0, cam.fy / z, -cam.fy * t.y() / z2;
    return j;
}

}  // namespace

std::optional<Projected> project(const Gaussian3D& g, const Camera& cam) {
    Vec3 t = cam.world_to_cam(g.mean);
    if (t.z() < cam.near_plane) return std::nullopt;
    Mat3 w = world_to_cam_rot(cam);
    Mat3 cov_cam = w * g.cov * w.transpose();
    auto j = proj_jacobian(cam, t);
    Projected p;
    p.mean2d = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
    p.cov2d = j * cov_cam * j.transpose() + kCovLowPass * Mat2::Identity();
    p.depth = t.z();
    return p;
}

namespace {

RenderCache::Prepared prepare(const Projected& proj, const Gaussian3D& g, int index) {
    RenderCache::Prepared p;
    p.index = index;
    p.mean2d = proj.mean2d;
    p.depth = proj.depth;
    p.opacity = g.opacity;
    p.color = g.color;
    const double det = proj.cov2d.determinant();
    p.inv_cov = Mat2::Zero();
    if (det > 0.0) {
        p.inv_cov << proj.cov2d(1, 1), -proj.cov2d(0, 1), -proj.cov2d(1, 0), proj.cov2d(0, 0);
        p.inv_cov /= det;
    }
    // Conservative pixel bounds: the ellipse where alpha can still reach the
    // 1/255 cutoff, so bounds never exclude a contributing pixel.
    const double sigma_max = std::log(std::max(g.opacity, kAlphaCutoff) / kAlphaCutoff);
    const double lambda_max =
        0.5 * (proj.cov2d(0, 0) + proj.cov2d(1, 1)) +
        std::sqrt(std::max(0.0, sqr(0.5 * (proj.cov2d(0, 0) - proj.cov2d(1, 1))) +
                                    sqr(proj.cov2d(0, 1))));
    const double radius = std::sqrt(std::max(0.0, 2.0 * sigma_max * lambda_max)) + 1e-6;
    p.x_min = proj.mean2d.x() - radius;
    p.x_max = proj.mean2d.x() + radius;
    p.y_min = proj.mean2d.y() - radius;
    p.y_max = proj.mean2d.y() + radius;
    return p;
}

constexpr std::size_t kRowsPerChunk = 16;

}  // namespace

RenderOutput render(std::span<const Gaussian3D> gaussians, const Camera& cam,
                    const Vec3& background, RenderCache* cache, int threads,
                    SplatDiagnostics* diag) {
    const int w = cam.width, h = cam.height;
    RenderOutput out{ImageF(w, h, 3), ImageF(w, h, 1)};

    RenderCache local;
    RenderCache& rc = cache ? *cache : local;
    rc.sorted.clear();
    rc.sorted.reserve(gaussians.size());
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        if (gaussians[i].opacity < kAlphaCutoff) continue;
        auto proj = project(gaussians[i], cam);
        if (!proj) {
            if (diag) ++diag->culled_near;
            continue;
        }
        if (proj->cov2d.determinant() <= 0.0) {
            if (diag) ++diag->skipped_singular;
            continue;
        }
        rc.sorted.push_back(prepare(*proj, gaussians[i], static_cast<int>(i)));
    }
    std::stable_sort(rc.sorted.begin(), rc.sorted.end(),
                     [](const auto& a, const auto& b) { return a.depth < b.depth; });

    rc.final_transmittance.assign(static_cast<std::size_t>(w) * h, 1.0);
    rc.contributor_count.assign(static_cast<std::size_t>(w) * h, 0);

    parallel_for_chunks(h, kRowsPerChunk, threads, [&](std::size_t, std::size_t y0,
                                                       std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
            const double py = y + 0.5;
            for (int x = 0; x < w; ++x) {
                const double px = x + 0.5;
                double t_cur = 1.0;
                Vec3 c = Vec3::Zero();
                int processed = 0;
                for (std::size_t gi = 0; gi < rc.sorted.size(); ++gi) {
                    const auto& g = rc.sorted[gi];
                    processed = static_cast<int>(gi) + 1;
                    if (px < g.x_min || px > g.x_max || py < g.y_min || py > g.y_max) continue;
                    Vec2 d(px - g.mean2d.x(), py - g.mean2d.y());
                    Vec2 ld = g.inv_cov * d;
                    double sigma = 0.5 * d.dot(ld);
                    double alpha = g.opacity * std::exp(-sigma);
                    if (alpha < kAlphaCutoff) continue;
                    alpha = std::min(alpha, kAlphaClamp);
                    double t_next = t_cur * (1.0 - alpha);
                    if (t_next < kTransmittanceStop) {
                        processed = static_cast<int>(gi);
                        break;
                    }
                    c += g.color * (alpha * t_cur);
                    t_cur = t_next;
                }
                const std::size_t pix = y * w + x;
                rc.final_transmittance[pix] = t_cur;
                rc.contributor_count[pix] = processed;
                for (int ch = 0; ch < 3; ++ch)
                    out.rgb.at(static_cast<int>(y), x, ch) = c[ch] + background[ch] * t_cur;
                out.alpha.at(static_cast<int>(y), x, 0) = 1.0 - t_cur;
            }
        }
    });
    return out;
}

std::vector<GaussianImageGrad> render_backward(std::span<const Gaussian3D> gaussians,
                                               const Camera& cam, const Vec3& background,
                                               const RenderCache& cache, const ImageF& d_rgb,
                                               const ImageF& d_alpha, int threads) {
    const int w = cam.width, h = cam.height;
    const std::size_t n_sorted = cache.sorted.size();
    const std::size_t chunks = chunk_count(h, kRowsPerChunk);

    // Per-chunk accumulators in sorted order: d_color(3), d_opacity,
    // d_mean2d(2), d_invcov(3 sym), touched flag.
    struct Partial {
        std::vector<double> acc;  // n_sorted * 9
        std::vector<std::uint8_t> touched;
    };
    std::vector<Partial> partials(chunks);

    const bool has_rgb = !d_rgb.data.empty();
    const bool has_alpha = !d_alpha.data.empty();

    parallel_for_chunks(h, kRowsPerChunk, threads, [&](std::size_t chunk, std::size_t y0,
                                                       std::size_t y1) {
        Partial& part = partials[chunk];
        part.acc.assign(n_sorted * 9, 0.0);
        part.touched.assign(n_sorted, 0);
        for (std::size_t y = y0; y < y1; ++y) {
            const double py = y + 0.5;
            for (int x = 0; x < w; ++x) {
                const double px = x + 0.5;
                const std::size_t pix = y * w + x;
                Vec3 gc = Vec3::Zero();
                if (has_rgb)
                    for (int ch = 0; ch < 3; ++ch) gc[ch] = d_rgb.at(static_cast<int>(y), x, ch);
                double ga = has_alpha ? d_alpha.at(static_cast<int>(y), x, 0) : 0.0;
                const double t_end = cache.final_transmittance[pix];
                const int count = cache.contributor_count[pix];

                double t_cur = t_end;
                Vec3 suffix = Vec3::Zero();  // sum of c_j alpha_j T_j behind i
                for (int gi = count - 1; gi >= 0; --gi) {
                    const auto& g = cache.sorted[gi];
                    if (px < g.x_min || px > g.x_max || py < g.y_min || py > g.y_max) continue;
                    Vec2 d(px - g.mean2d.x(), py - g.mean2d.y());
                    Vec2 ld = g.inv_cov * d;
                    double sigma = 0.5 * d.dot(ld);
                    double alpha_raw = g.opacity * std::exp(-sigma);
                    if (alpha_raw < kAlphaCutoff) continue;
                    const bool clamped = alpha_raw > kAlphaClamp;
                    const double alpha = clamped ? kAlphaClamp : alpha_raw;
                    const double t_i = t_cur / (1.0 - alpha);
                    part.touched[gi] = 1;

                    double* a = part.acc.data() + static_cast<std::size_t>(gi) * 9;
                    // color
                    const double weight = alpha * t_i;
                    if (has_rgb)
                        for (int ch = 0; ch < 3; ++ch) a[ch] += weight * gc[ch];
                    // alpha
                    double d_alpha_i =
                        gc.dot(g.color * t_i - (suffix + background * t_end) / (1.0 - alpha)) +
                        ga * t_end / (1.0 - alpha);
                    if (!clamped) {
                        const double gexp = std::exp(-sigma);
                        a[3] += d_alpha_i * gexp;                       // d opacity
                        const double d_sigma = -d_alpha_i * g.opacity * gexp;
                        // d mean2d = -d delta
                        a[4] += -d_sigma * ld[0];
                        a[5] += -d_sigma * ld[1];
                        // d inv_cov (symmetric): 0.5 * d_sigma * d d^T
                        a[6] += 0.5 * d_sigma * d[0] * d[0];
                        a[7] += 0.5 * d_sigma * d[0] * d[1] * 2.0;  // off-diag pair
                        a[8] += 0.5 * d_sigma * d[1] * d[1];
                    }
                    suffix += g.color * (alpha * t_i);
                    t_cur = t_i;
                }
            }
        }
    });

    // Deterministic reduce in chunk order.
    std::vector<double> acc(n_sorted * 9, 0.0);
    std::vector<std::uint8_t> touched(n_sorted, 0);
    for (const auto& part : partials) {
        for (std::size_t i = 0; i < n_sorted * 9; ++i) acc[i] += part.acc[i];
        for (std::size_t i = 0; i < n_sorted; ++i) touched[i] |= part.touched[i];
    }

    std::vector<GaussianImageGrad> out(gaussians.size());
    const Mat3 w_rot = cam.rot_c2w.transpose();
    for (std::size_t gi = 0; gi < n_sorted; ++gi) {
        const auto& g = cache.sorted[gi];
        GaussianImageGrad& og = out[g.index];
        og.touched = touched[gi] != 0;
        const double* a = acc.data() + gi * 9;
        og.d_color = Vec3(a[0], a[1], a[2]);
        og.d_opacity = a[3];
        og.d_mean2d = Vec2(a[4], a[5]);
        Mat2 d_inv;
        d_inv << a[6], 0.5 * a[7], 0.5 * a[7], a[8];

        // chain back through the projection
        const Gaussian3D& src = gaussians[g.index];
        Vec3 t = cam.world_to_cam(src.mean);
        Mat3 cov_cam = w_rot * src.cov * w_rot.transpose();
        auto j = proj_jacobian(cam, t);
        Mat2 cov2d = (j * cov_cam * j.transpose() + kCovLowPass * Mat2::Identity()).eval();
        Mat2 inv = g.inv_cov;
        Mat2 d_cov2d = -inv * d_inv * inv;

        Eigen::Matrix<double, 2, 3> d_j =
            d_cov2d * j * cov_cam.transpose() + d_cov2d.transpose() * j * cov_cam;
        Mat3 d_cov_cam = j.transpose() * d_cov2d * j;
        Vec3 d_t = j.transpose() * og.d_mean2d;
        const double z = t.z(), z2 = z * z, z3 = z2 * z;
        d_t.x() += d_j(0, 2) * (-cam.fx / z2);
        d_t.y() += d_j(1, 2) * (-cam.fy / z2);
        d_t.z() += d_j(0, 0) * (-cam.fx / z2) + d_j(1, 1) * (-cam.fy / z2) +
                   d_j(0, 2) * (2.0 * cam.fx * t.x() / z3) +
                   d_j(1, 2) * (2.0 * cam.fy * t.y() / z3);

        og.d_mean = cam.rot_c2w * d_t;
        og.d_cov = cam.rot_c2w * d_cov_cam * cam.rot_c2w.transpose();
    }
    return out;
}

}  // namespace stf
