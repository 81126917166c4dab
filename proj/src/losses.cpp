#include "stf/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "stf/tetmesh.hpp"

namespace stf {

namespace {

void require_same_shape(const ImageF& a, const ImageF& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": image size mismatch");
}

constexpr int kWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
    std::array<double, kWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        double x = i - kWindow / 2;
        w[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

/// Separable 'same' convolution with zero padding, one channel plane.
void conv_same(const std::vector<double>& in, int w, int h, std::vector<double>& out,
               std::vector<double>& scratch) {
    static const auto kernel = gaussian_window();
    const int r = kWindow / 2;
    scratch.assign(in.size(), 0.0);
    out.assign(in.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                acc += kernel[k + r] * in[y * w + xx];
            }
            scratch[y * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                acc += kernel[k + r] * scratch[yy * w + x];
            }
            out[y * w + x] = acc;
        }
}

struct SsimPlanes {
    std::vector<double> x, y, mu_x, mu_y, x2c, y2c, xyc;
};

double ssim_channel(const ImageF& img, const ImageF& gt, int ch, SsimPlanes& p,
                    std::vector<double>* d_img_plane) {
    const int w = img.width, h = img.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    p.x.resize(n);
    p.y.resize(n);
    for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
            p.x[yy * w + xx] = img.at(yy, xx, ch);
            p.y[yy * w + xx] = gt.at(yy, xx, ch);
        }
    std::vector<double> scratch, tmp(n);
    conv_same(p.x, w, h, p.mu_x, scratch);
    conv_same(p.y, w, h, p.mu_y, scratch);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p.x[i] * p.x[i];
    conv_same(tmp, w, h, p.x2c, scratch);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p.y[i] * p.y[i];
    conv_same(tmp, w, h, p.y2c, scratch);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p.x[i] * p.y[i];
    conv_same(tmp, w, h, p.xyc, scratch);

    double total = 0.0;
    std::vector<double> d_mu_x, d_x2c, d_xyc;
    if (d_img_plane) {
        d_mu_x.assign(n, 0.0);
        d_x2c.assign(n, 0.0);
        d_xyc.assign(n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double mx = p.mu_x[i], my = p.mu_y[i];
        const double sx = p.x2c[i] - mx * mx;
        const double sy = p.y2c[i] - my * my;
        const double sxy = p.xyc[i] - mx * my;
        const double a1 = 2 * mx * my + kC1, a2 = 2 * sxy + kC2;
        const double b1 = mx * mx + my * my + kC1, b2 = sx + sy + kC2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (d_img_plane) {
            const double d_a1 = a2 / (b1 * b2);
            const double d_a2 = a1 / (b1 * b2);
            const double d_b1 = -a1 * a2 / (b1 * b1 * b2);
            const double d_b2 = -a1 * a2 / (b1 * b2 * b2);
            // sxy depends on mu_x (-my), sx on mu_x (-2mx)
            d_mu_x[i] = d_a1 * 2 * my + d_b1 * 2 * mx + d_a2 * 2 * (-my) + d_b2 * (-2 * mx);
            d_x2c[i] = d_b2;
            d_xyc[i] = d_a2 * 2;
        }
    }
    if (d_img_plane) {
        // adjoint of a symmetric zero-pad convolution is the same convolution
        std::vector<double> back;
        conv_same(d_mu_x, w, h, back, scratch);
        std::vector<double>& out = *d_img_plane;
        out.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) out[i] += back[i];
        conv_same(d_x2c, w, h, back, scratch);
        for (std::size_t i = 0; i < n; ++i) out[i] += back[i] * 2.0 * p.x[i];
        conv_same(d_xyc, w, h, back, scratch);
        for (std::size_t i = 0; i < n; ++i) out[i] += back[i] * p.y[i];
    }
    return total / static_cast<double>(n);
}

}  // namespace

double loss_l1(const ImageF& img, const ImageF& gt, ImageF* grad) {
    require_same_shape(img, gt, "loss_l1");
    const double inv_n = 1.0 / static_cast<double>(img.data.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double d = img.data[i] - gt.data[i];
        sum += std::abs(d);
        if (grad) grad->data[i] += (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) * inv_n;
    }
    return sum * inv_n;
}

double ssim(const ImageF& img, const ImageF& gt) {
    require_same_shape(img, gt, "ssim");
    SsimPlanes planes;
    double total = 0.0;
    for (int ch = 0; ch < img.channels; ++ch) total += ssim_channel(img, gt, ch, planes, nullptr);
    return total / img.channels;
}

double loss_ssim(const ImageF& img, const ImageF& gt, ImageF* grad) {
    require_same_shape(img, gt, "loss_ssim");
    SsimPlanes planes;
    std::vector<double> d_plane;
    double total = 0.0;
    const double scale = -1.0 / img.channels;  // loss = 1 - mean ssim
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (int ch = 0; ch < img.channels; ++ch) {
        total += ssim_channel(img, gt, ch, planes, grad ? &d_plane : nullptr);
        if (grad) {
            const double per_pixel = scale / static_cast<double>(n);
            for (int yy = 0; yy < img.height; ++yy)
                for (int xx = 0; xx < img.width; ++xx)
                    grad->at(yy, xx, ch) += per_pixel * d_plane[yy * img.width + xx];
        }
    }
    return 1.0 - total / img.channels;
}

double loss_mask(const ImageF& alpha, const ImageF& gt_mask, ImageF* grad) {
    require_same_shape(alpha, gt_mask, "loss_mask");
    return loss_l1(alpha, gt_mask, grad);
}

double loss_quality(std::span<const Vec3> positions, std::span<const Tet> tets, double r,
                    std::span<Vec3> d_positions) {
    if (tets.empty()) return 0.0;
    double sum = 0.0;
    const double inv_k = 1.0 / static_cast<double>(tets.size());
    for (const Tet& t : tets) {
        std::array<Vec3, 4> p{positions[t[0]], positions[t[1]], positions[t[2]], positions[t[3]]};
        double q = quality_gamma(p);
        if (q < r) {
            sum += (r - q) * inv_k;
            if (!d_positions.empty()) {
                auto g = quality_gamma_gradient(p);
                for (int i = 0; i < 4; ++i) d_positions[t[i]] -= inv_k * g[i];
            }
        }
    }
    return sum;
}

double loss_sv(std::span<const Vec3> positions, std::span<const Tet> tets,
               std::span<Vec3> d_positions) {
    if (tets.empty()) return 0.0;
    double sum = 0.0;
    const double inv_k = 1.0 / static_cast<double>(tets.size());
    for (const Tet& t : tets) {
        std::array<Vec3, 4> p{positions[t[0]], positions[t[1]], positions[t[2]], positions[t[3]]};
        double v = signed_volume(p);
        if (v < 0.0) {
            sum += -v * inv_k;
            if (!d_positions.empty()) {
                auto g = signed_volume_gradient(p);
                for (int i = 0; i < 4; ++i) d_positions[t[i]] -= inv_k * g[i];
            }
        }
    }
    return sum;
}

double psnr(const ImageF& img, const ImageF& gt) { return image_psnr(img, gt); }

}  // namespace stf
