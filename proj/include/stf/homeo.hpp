#pragma once

#include <vector>

#include "stf/hash_encoding.hpp"
#include "stf/mlp.hpp"
#include "stf/types.hpp"

namespace stf {

struct MapConfig {
    HashEncodingConfig encoding;
    int hidden_dim = 128;
    int num_blocks = 3;
    bool operator==(const MapConfig&) const = default;
};

struct CouplingBlockCache {
    double u = 0, v = 0;        // clamped conditioner inputs
    bool u_interior = true, v_interior = true;
    double w = 0;               // transformed coordinate before the update
    double s_raw = 0, s = 0, t = 0, exp_s = 1;
    Mlp::Cache mlp;
};

struct CouplingBlockGrad {
    Mlp::Grad mlp;
    std::vector<std::pair<std::uint32_t, double>> table;
};

/// One permuted affine coupling layer. The permutation moves the transformed
/// axis to the last slot so the passthrough pair is contiguous; it is always
/// a 3-cycle or the identity, hence even with det(P) = +1. The update is
/// w' = w * exp(s(u, v)) + t(u, v) with raw s clamped to [-10, 10], so the
/// per-block Jacobian is triangular (after conjugation by P) with positive
/// diagonal.
class CouplingBlock {
  public:
    CouplingBlock() = default;
    CouplingBlock(int axis, const HashEncodingConfig& enc_cfg, int hidden_dim, Rng& rng);

    int axis() const { return axis_; }
    /// Permuted slot -> source coordinate; slots 0,1 pass through, slot 2 is
    /// transformed.
    std::array<int, 3> permutation() const {
        return {(axis_ + 1) % 3, (axis_ + 2) % 3, axis_};
    }
    Mat3 permutation_matrix() const;

    Vec3 forward(const Vec3& p, CouplingBlockCache* cache = nullptr) const;
    Vec3 inverse(const Vec3& p) const;
    Mat3 jacobian(const Vec3& p) const;

    /// Evaluates raw conditioner outputs (s_raw, t) at clamped (u, v).
    Vec2 conditioner(double u, double v) const;

    void backward(const CouplingBlockCache& cache, const Vec3& d_out, Vec3& d_in,
                  CouplingBlockGrad& grad) const;

    HashEncoding2D& encoding() { return enc_; }
    const HashEncoding2D& encoding() const { return enc_; }
    Mlp& mlp() { return mlp_; }
    const Mlp& mlp() const { return mlp_; }

    static constexpr double kScaleClamp = 10.0;

  private:
    int axis_ = 2;
    HashEncoding2D enc_;
    Mlp mlp_;
};

struct MapGrad {
    std::vector<CouplingBlockGrad> blocks;
    void setZero(const class OrientationPreservingMap& map);
};

/// Stack of coupling blocks (axes cycled x, y, z), conjugated by the affine
/// normalization of domain_box into the unit cube. Bijective on all of R^3
/// with det(Jacobian) > 0 wherever the map is differentiable.
class OrientationPreservingMap {
  public:
    OrientationPreservingMap() = default;
    OrientationPreservingMap(const Aabb& domain_box, const MapConfig& cfg, Rng& rng);

    const Aabb& domain_box() const { return domain_box_; }
    const MapConfig& config() const { return cfg_; }
    std::vector<CouplingBlock>& blocks() { return blocks_; }
    const std::vector<CouplingBlock>& blocks() const { return blocks_; }

    Vec3 forward(const Vec3& p) const;
    Vec3 inverse(const Vec3& p) const;
    Mat3 jacobian(const Vec3& p) const;
    /// log det(Jacobian) = sum of clamped scales, exact by the triangular
    /// structure; cheaper than assembling the matrix.
    double log_det_jacobian(const Vec3& p) const;

    /// Batched forward (GEMM over the conditioner MLPs).
    std::vector<Vec3> map_points(std::span<const Vec3> points) const;
    std::vector<double> log_det_jacobians(std::span<const Vec3> points) const;

    /// Forward for mesh vertices: warns (via counter) when inputs leave the
    /// domain box; conditioner inputs are clamped either way.
    std::vector<Vec3> map_vertices(std::span<const Vec3> base_positions,
                                   int* clamped_count = nullptr) const;

    struct VertexCache {
        std::vector<CouplingBlockCache> blocks;
    };
    Vec3 forward_with_cache(const Vec3& p, VertexCache& cache) const;
    /// Accumulates parameter gradients for one vertex given dL/d(mapped).
    void backward(const VertexCache& cache, const Vec3& d_mapped, MapGrad& grad) const;

    std::size_t param_count() const;

  private:
    Vec3 normalize(const Vec3& p) const {
        return (p - domain_box_.lo).cwiseQuotient(domain_box_.extent());
    }
    Vec3 denormalize(const Vec3& n) const {
        return domain_box_.lo + n.cwiseProduct(domain_box_.extent());
    }

    Aabb domain_box_;
    MapConfig cfg_;
    std::vector<CouplingBlock> blocks_;
};

}  // namespace stf
