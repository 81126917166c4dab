#pragma once

#include <vector>

#include "stf/trainer.hpp"

namespace stf {

struct Spring {
    int a = 0, b = 0;
    double rest_length = 0.0;
};

/// Mass-spring system over the base mesh: one particle per vertex with mass
/// lumped from incident tet volumes, one spring per unique edge.
struct MassSpringSystem {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
    std::vector<double> inv_mass;  // 0 for pinned particles
    std::vector<Spring> springs;
    double compliance = 0.0;
    Vec3 gravity = Vec3(0, 0, -9.81);

    void pin(int particle) { inv_mass[particle] = 0.0; }
    double total_mass() const;
};

MassSpringSystem build_springs(const TetMesh& mesh, std::span<const Vec3> positions,
                               double density, double compliance);

/// One XPBD substep: symplectic-Euler prediction, `iterations` Gauss-Seidel
/// sweeps over the distance constraints with compliance-scaled multipliers,
/// then velocity update from position deltas.
void xpbd_step(MassSpringSystem& system, double dt, int iterations);

/// Trilinear free-form deformation lattice over a box.
class LatticeDeformer {
  public:
    LatticeDeformer() = default;
    /// Cell coordinates are precomputed from the rest positions; vertices
    /// outside the box are clamped to the boundary cells (counted).
    LatticeDeformer(const Aabb& box, const std::array<int, 3>& resolution,
                    std::span<const Vec3> rest_positions);

    const std::array<int, 3>& resolution() const { return res_; }
    int control_count() const { return res_[0] * res_[1] * res_[2]; }
    int clamped_vertices() const { return clamped_; }
    int control_index(int i, int j, int k) const {
        return i + res_[0] * (j + res_[1] * k);
    }

    std::vector<Vec3> apply(std::span<const Vec3> control_displacements,
                            std::span<const Vec3> rest_positions) const;

  private:
    Aabb box_;
    std::array<int, 3> res_{2, 2, 2};
    int clamped_ = 0;
    struct VertexCoord {
        int cell[3];
        double frac[3];
    };
    std::vector<VertexCoord> coords_;
};

/// Renders frames for a sequence of base-vertex positions with frozen
/// attributes. Leaf rotations are re-oriented by the rotational part of each
/// leaf's deformation gradient relative to the rest pose (conjugation), so
/// covariances follow the element. Inverted base tets are tolerated and
/// counted per frame.
struct PlaybackFrame {
    RenderOutput image;
    int inverted_base_tets = 0;
};

PlaybackFrame playback_frame(const TrainState& state, std::span<const Vec3> rest_positions,
                             std::span<const Vec3> frame_positions, const Camera& cam,
                             const Vec3& background, int threads = 1);

/// Rotational factor of the polar decomposition of F (det(R) = +1).
Mat3 polar_rotation(const Mat3& f);

}  // namespace stf
