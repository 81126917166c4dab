#pragma once

#include <vector>

#include "stf/types.hpp"

namespace stf {

/// Constrained barycentric coordinates: softmax of the raw 4-vector with an
/// epsilon floor, renormalized. Strictly positive and summing to one, so a
/// split point is always interior and all four children keep positive volume.
Vec4 constrained_barycentric(const Vec4& raw);
/// Chain rule: given dL/d(constrained), accumulate dL/d(raw).
Vec4 constrained_barycentric_backward(const Vec4& raw, const Vec4& d_bary);

inline constexpr double kBarycentricFloor = 1e-3;

struct TetNode {
    int parent = -1;
    std::array<int, 4> children{-1, -1, -1, -1};
    int depth = 0;
    /// Attribute slots of the four corners (base vertex ids for roots;
    /// interior split points get fresh slots).
    std::array<int, 4> sh_idx{0, 0, 0, 0};
    Vec4 ctrl_raw = Vec4::Zero();       // split-point barycentrics (raw)
    Vec4 weight_raw = Vec4::Ones();     // per-corner reparam weights (raw)
    double opacity_raw = 0.0;
    Vec4 quat_raw = Vec4(1, 0, 0, 0);   // (w, x, y, z)
    bool masked = false;

    bool is_leaf() const { return children[0] < 0; }
};

/// Per-base-tet quadtree of implicit 1-to-4 splits. Roots mirror the base
/// mesh topology, which is never modified; leaves form the render mesh.
class SubdivisionForest {
  public:
    SubdivisionForest() = default;
    SubdivisionForest(std::vector<Tet> base_tets, int n_base_vertices, int max_depth = 5);

    int max_depth() const { return max_depth_; }
    int root_count() const { return static_cast<int>(root_tets_.size()); }
    const std::vector<Tet>& root_tets() const { return root_tets_; }
    int attribute_slot_count() const { return slot_count_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    TetNode& node(int id) { return nodes_[id]; }
    const TetNode& node(int id) const { return nodes_[id]; }

    /// Splits a leaf into 4 children sharing a fresh interior attribute slot.
    /// Children inherit opacity/rotation; corner weights are copied, with the
    /// interior corner receiving the barycentric blend of the parent's.
    /// Returns the new attribute slot id, or -1 if refused (depth cap or not
    /// a leaf).
    int subdivide(int node_id);

    /// Leaves in stable preorder (root order, then child order).
    std::vector<int> leaves() const;
    int leaf_count() const;

    struct ResolvedTet {
        int node = -1;
        std::array<Vec3, 4> corners;
    };

    /// World tets of every node, computed top-down from the base positions
    /// by barycentric placement of each split point.
    std::vector<std::array<Vec3, 4>> resolve_all(std::span<const Vec3> base_positions) const;
    std::vector<ResolvedTet> resolve_leaf_tets(std::span<const Vec3> base_positions) const;

    /// Adjoint of resolve_leaf_tets: per-leaf corner gradients flow back to
    /// base positions and to the raw control vectors of internal nodes.
    /// d_ctrl_raw has one Vec4 per node (zeros for leaves).
    void resolve_backward(std::span<const Vec3> base_positions,
                          const std::vector<ResolvedTet>& leaf_adjoints,
                          std::span<Vec3> d_base_positions,
                          std::span<Vec4> d_ctrl_raw) const;

    struct CollapsedNode {
        int node = -1;
        std::array<Vec3, 4> corners;
        double opacity_raw = 0.0;  // max over merged children
        Vec4 quat = Vec4(1, 0, 0, 0);  // sign-aligned average, normalized
    };

    /// Nodes at depth min(level, branch leaf depth) with LOD-merged opacity
    /// (max of children) and rotation (sign-aligned quaternion mean).
    std::vector<CollapsedNode> collapse_to_level(int level,
                                                 std::span<const Vec3> base_positions) const;

  private:
    std::vector<Tet> root_tets_;
    std::vector<TetNode> nodes_;
    int n_base_vertices_ = 0;
    int slot_count_ = 0;
    int max_depth_ = 5;
};

/// Sign-aligned normalized quaternion mean (flip any child whose dot with
/// the first is negative before averaging).
Vec4 average_quaternions(std::span<const Vec4> quats);

}  // namespace stf
