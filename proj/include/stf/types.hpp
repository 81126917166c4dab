#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace stf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

using Tet = std::array<int, 4>;

/// Axis-aligned box in scene units.
struct Aabb {
    Vec3 lo{0, 0, 0};
    Vec3 hi{1, 1, 1};

    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return 0.5 * (lo + hi); }
    double diagonal() const { return extent().norm(); }
    bool contains(const Vec3& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
    Aabb padded(double rel) const {
        Vec3 pad = rel * extent();
        return {lo - pad, hi + pad};
    }
    static Aabb of_points(std::span<const Vec3> pts) {
        Aabb b{Vec3::Constant(1e300), Vec3::Constant(-1e300)};
        for (const Vec3& p : pts) {
            b.lo = b.lo.cwiseMin(p);
            b.hi = b.hi.cwiseMax(p);
        }
        return b;
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double inverse_sigmoid(double y) { return std::log(y / (1.0 - y)); }

inline double sqr(double x) { return x * x; }

}  // namespace stf
