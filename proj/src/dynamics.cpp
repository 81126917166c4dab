#include "stf/dynamics.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace stf {

double MassSpringSystem::total_mass() const {
    double m = 0.0;
    for (double im : inv_mass)
        if (im > 0.0) m += 1.0 / im;
    return m;
}

MassSpringSystem build_springs(const TetMesh& mesh, std::span<const Vec3> positions,
                               double density, double compliance) {
    if (positions.size() != mesh.vertex_count())
        throw std::invalid_argument("build_springs: position count mismatch");
    MassSpringSystem sys;
    sys.positions.assign(positions.begin(), positions.end());
    sys.velocities.assign(positions.size(), Vec3::Zero());
    sys.compliance = compliance;

    std::vector<double> mass(positions.size(), 0.0);
    std::map<std::pair<int, int>, bool> edges;
    static constexpr int kEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const Tet& t : mesh.tets()) {
        double v = std::abs(
            signed_volume(positions[t[0]], positions[t[1]], positions[t[2]], positions[t[3]]));
        for (int i : t) mass[i] += density * v / 4.0;
        for (auto [a, b] : kEdges) {
            int u = std::min(t[a], t[b]), w = std::max(t[a], t[b]);
            edges[{u, w}] = true;
        }
    }
    sys.inv_mass.resize(positions.size());
    for (std::size_t i = 0; i < mass.size(); ++i)
        sys.inv_mass[i] = mass[i] > 0.0 ? 1.0 / mass[i] : 0.0;
    for (const auto& [edge, _] : edges) {
        double rest = (positions[edge.first] - positions[edge.second]).norm();
        if (rest <= 0.0) throw std::invalid_argument("build_springs: zero-length edge");
        sys.springs.push_back({edge.first, edge.second, rest});
    }
    return sys;
}

void xpbd_step(MassSpringSystem& sys, double dt, int iterations) {
    if (dt <= 0.0) throw std::invalid_argument("xpbd_step: dt must be positive");
    const std::size_t n = sys.positions.size();
    std::vector<Vec3> prev = sys.positions;
    for (std::size_t i = 0; i < n; ++i) {
        if (sys.inv_mass[i] <= 0.0) continue;
        sys.velocities[i] += sys.gravity * dt;
        sys.positions[i] += sys.velocities[i] * dt;
    }
    std::vector<double> lambda(sys.springs.size(), 0.0);
    const double alpha_tilde = sys.compliance / (dt * dt);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t s = 0; s < sys.springs.size(); ++s) {
            const Spring& spring = sys.springs[s];
            Vec3 d = sys.positions[spring.a] - sys.positions[spring.b];
            double len = d.norm();
            if (len < 1e-12) continue;
            Vec3 dir = d / len;
            double c = len - spring.rest_length;
            double w = sys.inv_mass[spring.a] + sys.inv_mass[spring.b];
            if (w + alpha_tilde <= 0.0) continue;
            double dlambda = (-c - alpha_tilde * lambda[s]) / (w + alpha_tilde);
            lambda[s] += dlambda;
            sys.positions[spring.a] += sys.inv_mass[spring.a] * dlambda * dir;
            sys.positions[spring.b] -= sys.inv_mass[spring.b] * dlambda * dir;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (sys.inv_mass[i] <= 0.0) {
            sys.velocities[i].setZero();
            sys.positions[i] = prev[i];
            continue;
        }
        sys.velocities[i] = (sys.positions[i] - prev[i]) / dt;
    }
}

LatticeDeformer::LatticeDeformer(const Aabb& box, const std::array<int, 3>& resolution,
                                 std::span<const Vec3> rest_positions)
    : box_(box), res_(resolution) {
    for (int r : res_)
        if (r < 2) throw std::invalid_argument("lattice needs at least 2 controls per axis");
    if (box_.extent().minCoeff() <= 0.0) throw std::invalid_argument("degenerate lattice box");
    coords_.resize(rest_positions.size());
    for (std::size_t i = 0; i < rest_positions.size(); ++i) {
        bool clamped = false;
        for (int d = 0; d < 3; ++d) {
            double u = (rest_positions[i][d] - box_.lo[d]) / box_.extent()[d] * (res_[d] - 1);
            int cell = static_cast<int>(std::floor(u));
            if (cell < 0 || cell > res_[d] - 2) {
                clamped = clamped || u < 0.0 || u > res_[d] - 1;
                cell = std::clamp(cell, 0, res_[d] - 2);
            }
            coords_[i].cell[d] = cell;
            coords_[i].frac[d] = u - cell;
        }
        if (clamped) ++clamped_;
    }
}

std::vector<Vec3> LatticeDeformer::apply(std::span<const Vec3> control_displacements,
                                         std::span<const Vec3> rest_positions) const {
    if (control_displacements.size() != static_cast<std::size_t>(control_count()))
        throw std::invalid_argument("lattice: control displacement count mismatch");
    if (rest_positions.size() != coords_.size())
        throw std::invalid_argument("lattice: rest position count mismatch");
    std::vector<Vec3> out(rest_positions.size());
    for (std::size_t i = 0; i < rest_positions.size(); ++i) {
        const auto& c = coords_[i];
        Vec3 disp = Vec3::Zero();
        for (int corner = 0; corner < 8; ++corner) {
            int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
            double w = (di ? c.frac[0] : 1 - c.frac[0]) * (dj ? c.frac[1] : 1 - c.frac[1]) *
                       (dk ? c.frac[2] : 1 - c.frac[2]);
            disp += w * control_displacements[control_index(c.cell[0] + di, c.cell[1] + dj,
                                                            c.cell[2] + dk)];
        }
        out[i] = rest_positions[i] + disp;
    }
    return out;
}

Mat3 polar_rotation(const Mat3& f) {
    Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Mat3 u = svd.matrixU();
        u.col(2) = -u.col(2);
        r = u * svd.matrixV().transpose();
    }
    return r;
}

PlaybackFrame playback_frame(const TrainState& state, std::span<const Vec3> rest_positions,
                             std::span<const Vec3> frame_positions, const Camera& cam,
                             const Vec3& background, int threads) {
    PlaybackFrame frame;
    frame.inverted_base_tets = count_inverted(frame_positions, state.base.tets());

    auto rest_leaves = state.forest.resolve_leaf_tets(rest_positions);
    auto def_leaves = state.forest.resolve_leaf_tets(frame_positions);
    std::vector<Gaussian3D> gaussians;
    gaussians.reserve(def_leaves.size());
    for (std::size_t k = 0; k < def_leaves.size(); ++k) {
        const TetNode& node = state.forest.node(def_leaves[k].node);
        if (node.masked) continue;

        // deformation gradient of this leaf relative to rest
        Mat3 d_rest, d_def;
        for (int c = 0; c < 3; ++c) {
            d_rest.col(c) = rest_leaves[k].corners[c + 1] - rest_leaves[k].corners[0];
            d_def.col(c) = def_leaves[k].corners[c + 1] - def_leaves[k].corners[0];
        }
        Vec4 quat = node.quat_raw;
        double det = d_rest.determinant();
        if (std::abs(det) > 1e-14) {
            Mat3 rot = polar_rotation(d_def * d_rest.inverse());
            Eigen::Quaterniond qr(rot);
            Eigen::Quaterniond ql(quat.normalized()[0], quat.normalized()[1],
                                  quat.normalized()[2], quat.normalized()[3]);
            Eigen::Quaterniond q = qr * ql * qr.conjugate();
            quat = Vec4(q.w(), q.x(), q.y(), q.z());
        }

        LeafInputs in;
        in.corners = def_leaves[k].corners;
        for (int i = 0; i < 4; ++i) {
            in.weight_raw[i] = node.weight_raw[i];
            in.sh[i] = state.sh_slot(node.sh_idx[i]);
        }
        in.l_max = state.cfg.sh_degree;
        in.opacity_raw = node.opacity_raw;
        in.quat_raw = quat;
        gaussians.push_back(tet_to_gaussian(in, cam.origin));
    }
    frame.image = render(gaussians, cam, background, nullptr, threads);
    return frame;
}

}  // namespace stf
