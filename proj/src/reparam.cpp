#include "stf/reparam.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace stf {

Mat3 quat_to_rotation(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

namespace {

/// dR/dq_k at a unit quaternion, treating R as the polynomial above.
std::array<Mat3, 4> rotation_quat_jacobian(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    std::array<Mat3, 4> d;
    d[0] << 0, -2 * z, 2 * y,
            2 * z, 0, -2 * x,
            -2 * y, 2 * x, 0;
    d[1] << 0, 2 * y, 2 * z,
            2 * y, -4 * x, -2 * w,
            2 * z, 2 * w, -4 * x;
    d[2] << -4 * y, 2 * x, 2 * w,
            2 * x, 0, 2 * z,
            -2 * w, 2 * z, -4 * y;
    d[3] << -4 * z, -2 * w, 2 * x,
            2 * w, -4 * z, 2 * y,
            2 * x, 2 * y, 0;
    return d;
}

}  // namespace

void gaussian_geometry(const std::array<Vec3, 4>& corners, const std::array<double, 4>& weights,
                       const Vec4& quat_unit, Vec3& mean, Mat3& cov) {
    const double w_sum = weights[0] + weights[1] + weights[2] + weights[3];
    if (w_sum <= 0.0) throw std::invalid_argument("gaussian_geometry: non-positive weight sum");
    mean = Vec3::Zero();
    for (int i = 0; i < 4; ++i) mean += weights[i] * corners[i];
    mean /= w_sum;
    Mat3 scatter = Mat3::Zero();
    for (int i = 0; i < 4; ++i) {
        Vec3 u = corners[i] - mean;
        scatter += weights[i] * u * u.transpose();
    }
    Mat3 r = quat_to_rotation(quat_unit);
    cov = r * scatter * r.transpose();
}

Vec3 color_from_sh(const std::array<Vec3, 4>& corners, const std::array<double, 4>& weights,
                   const std::array<const double*, 4>& sh, int l_max, const Vec3& view_origin) {
    const double w_sum = weights[0] + weights[1] + weights[2] + weights[3];
    if (w_sum <= 0.0) throw std::invalid_argument("color_from_sh: non-positive weight sum");
    const int n = sh_coeff_count(l_max);
    double basis[16];
    Vec3 blend = Vec3::Zero();
    for (int i = 0; i < 4; ++i) {
        Vec3 d = (corners[i] - view_origin).normalized();
        sh_basis(l_max, d, basis);
        Vec3 ci = Vec3::Zero();
        for (int k = 0; k < n; ++k)
            for (int ch = 0; ch < 3; ++ch) ci[ch] += basis[k] * sh[i][k * 3 + ch];
        blend += weights[i] * (ci + Vec3::Constant(0.5));
    }
    blend /= w_sum;
    return blend.cwiseMax(0.0).cwiseMin(1.0);
}

Gaussian3D tet_to_gaussian(const LeafInputs& in, const Vec3& view_origin) {
    std::array<double, 4> w;
    for (int i = 0; i < 4; ++i) w[i] = weight_activation(in.weight_raw[i]);
    Gaussian3D g;
    gaussian_geometry(in.corners, w, in.quat_raw.normalized(), g.mean, g.cov);
    g.color = color_from_sh(in.corners, w, in.sh, in.l_max, view_origin);
    g.opacity = sigmoid(in.opacity_raw);
    return g;
}

void tet_to_gaussian_backward(const LeafInputs& in, const Vec3& view_origin,
                              const GaussianAdjoint& adj, LeafGrads& grads) {
    std::array<double, 4> w;
    double w_sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        w[i] = weight_activation(in.weight_raw[i]);
        w_sum += w[i];
    }
    const Vec4 q = in.quat_raw.normalized();
    const Mat3 r = quat_to_rotation(q);

    Vec3 mean = Vec3::Zero();
    for (int i = 0; i < 4; ++i) mean += w[i] * in.corners[i];
    mean /= w_sum;
    Mat3 scatter = Mat3::Zero();
    for (int i = 0; i < 4; ++i) {
        Vec3 u = in.corners[i] - mean;
        scatter += w[i] * u * u.transpose();
    }

    std::array<double, 4> d_w{0, 0, 0, 0};

    // ---- opacity ----
    const double o = sigmoid(in.opacity_raw);
    grads.d_opacity_raw += adj.d_opacity * o * (1.0 - o);

    // ---- covariance = R * scatter * R^T ----
    Mat3 d_scatter = r.transpose() * adj.d_cov * r;
    Mat3 d_r = adj.d_cov * r * scatter.transpose() + adj.d_cov.transpose() * r * scatter;
    Vec3 d_mean_total = adj.d_mean;
    for (int i = 0; i < 4; ++i) {
        Vec3 u = in.corners[i] - mean;
        Vec3 d_u = w[i] * (d_scatter + d_scatter.transpose()) * u;
        d_w[i] += u.dot(d_scatter * u);
        grads.d_corners[i] += d_u;
        d_mean_total -= d_u;
    }

    // ---- quaternion (through normalization) ----
    auto dr = rotation_quat_jacobian(q);
    Vec4 d_q;
    for (int k = 0; k < 4; ++k) d_q[k] = (d_r.array() * dr[k].array()).sum();
    const double qn = in.quat_raw.norm();
    grads.d_quat_raw += (d_q - q * q.dot(d_q)) / qn;

    // ---- mean = sum(w v) / sum(w) ----
    for (int i = 0; i < 4; ++i) {
        grads.d_corners[i] += (w[i] / w_sum) * d_mean_total;
        d_w[i] += (in.corners[i] - mean).dot(d_mean_total) / w_sum;
    }

    // ---- color ----
    const int n = sh_coeff_count(in.l_max);
    double basis[16], dbasis[48];
    // recompute the pre-clamp blend for clamp gating
    Vec3 blend = Vec3::Zero();
    std::array<Vec3, 4> ci{};
    for (int i = 0; i < 4; ++i) {
        Vec3 d = (in.corners[i] - view_origin).normalized();
        sh_basis(in.l_max, d, basis);
        ci[i] = Vec3::Constant(0.5);
        for (int k = 0; k < n; ++k)
            for (int ch = 0; ch < 3; ++ch) ci[i][ch] += basis[k] * in.sh[i][k * 3 + ch];
        blend += w[i] * ci[i];
    }
    blend /= w_sum;
    Vec3 d_blend = adj.d_color;
    for (int ch = 0; ch < 3; ++ch)
        if (blend[ch] <= 0.0 || blend[ch] >= 1.0) d_blend[ch] = 0.0;

    for (int i = 0; i < 4; ++i) {
        Vec3 d_ci = (w[i] / w_sum) * d_blend;
        d_w[i] += (ci[i] - blend).dot(d_blend) / w_sum;
        Vec3 v = in.corners[i] - view_origin;
        const double vn = v.norm();
        Vec3 d = v / vn;
        sh_basis_with_grad(in.l_max, d, basis, dbasis);
        Vec3 d_dir = Vec3::Zero();
        for (int k = 0; k < n; ++k) {
            Vec3 grad_basis(dbasis[3 * k], dbasis[3 * k + 1], dbasis[3 * k + 2]);
            for (int ch = 0; ch < 3; ++ch) {
                if (grads.d_sh[i]) grads.d_sh[i][k * 3 + ch] += basis[k] * d_ci[ch];
                d_dir += d_ci[ch] * in.sh[i][k * 3 + ch] * grad_basis;
            }
        }
        // through the normalization d = v / |v|
        grads.d_corners[i] += (d_dir - d * d.dot(d_dir)) / vn;
    }

    // ---- weight activation ----
    for (int i = 0; i < 4; ++i)
        if (in.weight_raw[i] > 0.0) grads.d_weight_raw[i] += d_w[i];
}

void covariance_to_scale_rotation(const Mat3& cov, Vec3& scales, Vec4& quat) {
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + cov.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("covariance_to_scale_rotation: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 lambda = eig.eigenvalues().cwiseMax(0.0);  // ascending
    Mat3 v = eig.eigenvectors();
    // descending order
    scales = Vec3(std::sqrt(lambda[2]), std::sqrt(lambda[1]), std::sqrt(lambda[0]));
    Mat3 r;
    r.col(0) = v.col(2);
    r.col(1) = v.col(1);
    r.col(2) = v.col(0);
    if (r.determinant() < 0.0) r.col(2) = -r.col(2);
    Eigen::Quaterniond q(r);
    quat = Vec4(q.w(), q.x(), q.y(), q.z());
}

}  // namespace stf
