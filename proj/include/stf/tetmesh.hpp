#pragma once

#include <string>
#include <vector>

#include "stf/types.hpp"

namespace stf {

/// Conformal tetrahedral mesh with positively oriented elements.
/// Immutable after construction; all derived quantities are computed by
/// free functions so they can also run on remapped vertex positions.
class TetMesh {
  public:
    TetMesh() = default;
    /// Throws std::invalid_argument on out-of-range indices or if any tet
    /// has signed volume <= 0.
    TetMesh(std::vector<Vec3> vertices, std::vector<Tet> tets);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Tet>& tets() const { return tets_; }
    std::size_t vertex_count() const { return vertices_.size(); }
    std::size_t tet_count() const { return tets_.size(); }

    std::array<Vec3, 4> tet_points(int k) const {
        const Tet& t = tets_[k];
        return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]], vertices_[t[3]]};
    }

    double total_volume() const;
    Aabb bounding_box() const { return Aabb::of_points(vertices_); }

  private:
    std::vector<Vec3> vertices_;
    std::vector<Tet> tets_;
};

double signed_volume(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3);
double signed_volume(const std::array<Vec3, 4>& tet);
/// d(signed_volume)/d(p_i) for each corner.
std::array<Vec3, 4> signed_volume_gradient(const std::array<Vec3, 4>& tet);

/// Aspect-ratio-gamma quality, 1 for the regular tetrahedron, 0 for
/// degenerate or inverted shapes: Q = 6*sqrt(2)*V / S_rms^3 where S_rms is
/// the root-mean-square of the six edge lengths.
double quality_gamma(const std::array<Vec3, 4>& tet);
std::array<Vec3, 4> quality_gamma_gradient(const std::array<Vec3, 4>& tet);

/// 3r/rho with r the inradius and rho the circumradius; 1 for the regular
/// tetrahedron, 0 for degenerate input.
double aspect_ratio(const std::array<Vec3, 4>& tet);

int count_inverted(std::span<const Vec3> positions, std::span<const Tet> tets);

/// Vertex -> incident tets adjacency, reused by quality metrics and springs.
std::vector<std::vector<int>> vertex_tet_adjacency(std::size_t n_vertices, std::span<const Tet> tets);

/// Max/min absolute volume over the 1-ring of tet k (tets sharing at least
/// one vertex with it, k included).
double adjacent_volume_ratio(std::span<const Vec3> positions, std::span<const Tet> tets,
                             const std::vector<std::vector<int>>& v2t, int k);
double adjacent_volume_ratio(const TetMesh& mesh, int k);

struct QualityReport {
    std::vector<double> volume;
    std::vector<double> q;    // aspect ratio gamma, [0,1]
    std::vector<double> ar;   // 3r/rho, [0,1]
    std::vector<double> avr;  // adjacent volume ratio, >= 1
    int inverted_count = 0;

    double mean_q() const;
    double std_q() const;
    double mean_ar() const;
    double std_ar() const;
    double mean_avr() const;
    double std_avr() const;
};

QualityReport compute_quality(std::span<const Vec3> positions, std::span<const Tet> tets);
void write_quality_csv(const std::string& path, const QualityReport& report);

struct ConformalityReport {
    bool ok = true;
    std::size_t interior_faces = 0;
    std::size_t boundary_faces = 0;
    /// Sorted vertex triples of faces violating the shared-by-two-with-
    /// opposite-winding rule.
    std::vector<std::array<int, 3>> bad_faces;
};

ConformalityReport validate_conformal(std::span<const Tet> tets);
inline ConformalityReport validate_conformal(const TetMesh& mesh) {
    return validate_conformal(std::span<const Tet>(mesh.tets()));
}

/// Freudenthal/Kuhn split: each grid cell becomes 6 tets around its main
/// diagonal, conformal across neighboring cells. Throws on degenerate box
/// or non-positive resolution.
TetMesh build_uniform_grid(const Aabb& bbox, const std::array<int, 3>& resolution);

}  // namespace stf
