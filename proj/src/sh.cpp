#include "stf/sh.hpp"

#include <cstring>
#include <stdexcept>

namespace stf {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

}  // namespace

void sh_basis(int l_max, const Vec3& d, double* basis) {
    if (l_max < 0 || l_max > kMaxShDegree) throw std::invalid_argument("sh degree out of range");
    const double x = d.x(), y = d.y(), z = d.z();
    basis[0] = kC0;
    if (l_max < 1) return;
    basis[1] = -kC1 * y;
    basis[2] = kC1 * z;
    basis[3] = -kC1 * x;
    if (l_max < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    basis[4] = kC2[0] * x * y;
    basis[5] = kC2[1] * y * z;
    basis[6] = kC2[2] * (2.0 * zz - xx - yy);
    basis[7] = kC2[3] * x * z;
    basis[8] = kC2[4] * (xx - yy);
    if (l_max < 3) return;
    basis[9] = kC3[0] * y * (3.0 * xx - yy);
    basis[10] = kC3[1] * x * y * z;
    basis[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    basis[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    basis[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    basis[14] = kC3[5] * z * (xx - yy);
    basis[15] = kC3[6] * x * (xx - 3.0 * yy);
}

void sh_basis_with_grad(int l_max, const Vec3& d, double* basis, double* dbasis) {
    sh_basis(l_max, d, basis);
    const int n = sh_coeff_count(l_max);
    std::memset(dbasis, 0, sizeof(double) * 3 * n);
    auto g = [&](int k) { return dbasis + 3 * k; };
    const double x = d.x(), y = d.y(), z = d.z();
    if (l_max < 1) return;
    g(1)[1] = -kC1;
    g(2)[2] = kC1;
    g(3)[0] = -kC1;
    if (l_max < 2) return;
    g(4)[0] = kC2[0] * y;
    g(4)[1] = kC2[0] * x;
    g(5)[1] = kC2[1] * z;
    g(5)[2] = kC2[1] * y;
    g(6)[0] = kC2[2] * (-2.0 * x);
    g(6)[1] = kC2[2] * (-2.0 * y);
    g(6)[2] = kC2[2] * (4.0 * z);
    g(7)[0] = kC2[3] * z;
    g(7)[2] = kC2[3] * x;
    g(8)[0] = kC2[4] * (2.0 * x);
    g(8)[1] = kC2[4] * (-2.0 * y);
    if (l_max < 3) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    g(9)[0] = kC3[0] * (6.0 * x * y);
    g(9)[1] = kC3[0] * (3.0 * xx - 3.0 * yy);
    g(10)[0] = kC3[1] * y * z;
    g(10)[1] = kC3[1] * x * z;
    g(10)[2] = kC3[1] * x * y;
    g(11)[0] = kC3[2] * (-2.0 * x * y);
    g(11)[1] = kC3[2] * (4.0 * zz - xx - 3.0 * yy);
    g(11)[2] = kC3[2] * (8.0 * y * z);
    g(12)[0] = kC3[3] * (-6.0 * x * z);
    g(12)[1] = kC3[3] * (-6.0 * y * z);
    g(12)[2] = kC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy);
    g(13)[0] = kC3[4] * (4.0 * zz - 3.0 * xx - yy);
    g(13)[1] = kC3[4] * (-2.0 * x * y);
    g(13)[2] = kC3[4] * (8.0 * x * z);
    g(14)[0] = kC3[5] * (2.0 * x * z);
    g(14)[1] = kC3[5] * (-2.0 * y * z);
    g(14)[2] = kC3[5] * (xx - yy);
    g(15)[0] = kC3[6] * (3.0 * xx - 3.0 * yy);
    g(15)[1] = kC3[6] * (-6.0 * x * y);
}

}  // namespace stf
