#include "stf/hierarchy.hpp"

#include <cmath>
#include <stdexcept>

namespace stf {

Vec4 constrained_barycentric(const Vec4& raw) {
    Vec4 e = (raw.array() - raw.maxCoeff()).exp();
    Vec4 soft = e / e.sum();
    return (soft.array() + kBarycentricFloor) / (1.0 + 4.0 * kBarycentricFloor);
}

Vec4 constrained_barycentric_backward(const Vec4& raw, const Vec4& d_bary) {
    Vec4 e = (raw.array() - raw.maxCoeff()).exp();
    Vec4 soft = e / e.sum();
    Vec4 d_soft = d_bary / (1.0 + 4.0 * kBarycentricFloor);
    // softmax Jacobian: diag(s) - s s^T
    double dot = soft.dot(d_soft);
    return soft.cwiseProduct(d_soft - Vec4::Constant(dot));
}

SubdivisionForest::SubdivisionForest(std::vector<Tet> base_tets, int n_base_vertices,
                                     int max_depth)
    : root_tets_(std::move(base_tets)), n_base_vertices_(n_base_vertices),
      slot_count_(n_base_vertices), max_depth_(max_depth) {
    nodes_.resize(root_tets_.size());
    for (std::size_t r = 0; r < root_tets_.size(); ++r) {
        nodes_[r].depth = 0;
        nodes_[r].sh_idx = {root_tets_[r][0], root_tets_[r][1], root_tets_[r][2],
                            root_tets_[r][3]};
    }
}

int SubdivisionForest::subdivide(int node_id) {
    TetNode& parent = nodes_[node_id];
    if (!parent.is_leaf() || parent.depth >= max_depth_) return -1;
    const int slot = slot_count_++;
    const Vec4 bary = constrained_barycentric(parent.ctrl_raw);
    const double blended_weight = bary.dot(parent.weight_raw);
    for (int i = 0; i < 4; ++i) {
        TetNode child;
        child.parent = node_id;
        child.depth = parent.depth + 1;
        child.sh_idx = parent.sh_idx;
        child.sh_idx[i] = slot;
        child.weight_raw = parent.weight_raw;
        child.weight_raw[i] = blended_weight;
        child.opacity_raw = parent.opacity_raw;
        child.quat_raw = parent.quat_raw;
        nodes_.push_back(child);
        nodes_[node_id].children[i] = static_cast<int>(nodes_.size()) - 1;
    }
    return slot;
}

std::vector<int> SubdivisionForest::leaves() const {
    std::vector<int> out;
    out.reserve(nodes_.size());
    // preorder with explicit stack; children pushed in reverse so child 0
    // pops first
    std::vector<int> work;
    work.reserve(64);
    for (int r = 0; r < root_count(); ++r) {
        work.clear();
        work.push_back(r);
        while (!work.empty()) {
            int id = work.back();
            work.pop_back();
            const TetNode& n = nodes_[id];
            if (n.is_leaf()) {
                out.push_back(id);
            } else {
                for (int i = 3; i >= 0; --i) work.push_back(n.children[i]);
            }
        }
    }
    return out;
}

int SubdivisionForest::leaf_count() const {
    int n = 0;
    for (const auto& node : nodes_)
        if (node.is_leaf()) ++n;
    return n;
}

std::vector<std::array<Vec3, 4>> SubdivisionForest::resolve_all(
    std::span<const Vec3> base_positions) const {
    std::vector<std::array<Vec3, 4>> world(nodes_.size());
    for (int r = 0; r < root_count(); ++r) {
        const Tet& t = root_tets_[r];
        world[r] = {base_positions[t[0]], base_positions[t[1]], base_positions[t[2]],
                    base_positions[t[3]]};
    }
    // nodes_ grows append-only, so parents always precede children
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const TetNode& n = nodes_[id];
        if (n.is_leaf()) continue;
        const Vec4 b = constrained_barycentric(n.ctrl_raw);
        const auto& w = world[id];
        Vec3 c = b[0] * w[0] + b[1] * w[1] + b[2] * w[2] + b[3] * w[3];
        for (int i = 0; i < 4; ++i) {
            world[n.children[i]] = w;
            world[n.children[i]][i] = c;
        }
    }
    return world;
}

std::vector<SubdivisionForest::ResolvedTet> SubdivisionForest::resolve_leaf_tets(
    std::span<const Vec3> base_positions) const {
    auto world = resolve_all(base_positions);
    std::vector<ResolvedTet> out;
    for (int id : leaves()) out.push_back({id, world[id]});
    return out;
}

void SubdivisionForest::resolve_backward(std::span<const Vec3> base_positions,
                                         const std::vector<ResolvedTet>& leaf_adjoints,
                                         std::span<Vec3> d_base_positions,
                                         std::span<Vec4> d_ctrl_raw) const {
    auto world = resolve_all(base_positions);
    std::vector<std::array<Vec3, 4>> adj(nodes_.size(),
                                         {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()});
    for (const auto& leaf : leaf_adjoints)
        for (int i = 0; i < 4; ++i) adj[leaf.node][i] += leaf.corners[i];

    // children were appended after their parents, so a reverse sweep pushes
    // adjoints rootward
    for (std::size_t id = nodes_.size(); id-- > 0;) {
        const TetNode& n = nodes_[id];
        if (!n.is_leaf()) {
            const Vec4 b = constrained_barycentric(n.ctrl_raw);
            const auto& w = world[id];
            Vec4 d_bary = Vec4::Zero();
            for (int i = 0; i < 4; ++i) {
                const auto& ca = adj[n.children[i]];
                for (int j = 0; j < 4; ++j) {
                    if (j == i) {
                        // child corner i is the split point c = sum_k b_k w_k
                        for (int k = 0; k < 4; ++k) adj[id][k] += b[k] * ca[j];
                        for (int k = 0; k < 4; ++k) d_bary[k] += w[k].dot(ca[j]);
                    } else {
                        adj[id][j] += ca[j];
                    }
                }
            }
            d_ctrl_raw[id] += constrained_barycentric_backward(n.ctrl_raw, d_bary);
        }
        if (n.parent < 0) {
            const Tet& t = root_tets_[id];
            for (int i = 0; i < 4; ++i) d_base_positions[t[i]] += adj[id][i];
        }
    }
}

Vec4 average_quaternions(std::span<const Vec4> quats) {
    Vec4 acc = Vec4::Zero();
    for (std::size_t i = 0; i < quats.size(); ++i) {
        Vec4 q = quats[i].normalized();
        if (i > 0 && q.dot(quats[0].normalized()) < 0.0) q = -q;
        acc += q;
    }
    acc /= static_cast<double>(quats.size());
    double n = acc.norm();
    if (n < 1e-12) return Vec4(1, 0, 0, 0);
    return acc / n;
}

std::vector<SubdivisionForest::CollapsedNode> SubdivisionForest::collapse_to_level(
    int level, std::span<const Vec3> base_positions) const {
    if (level < 0) throw std::invalid_argument("collapse level must be >= 0");
    auto world = resolve_all(base_positions);

    // merged (opacity, quat) per node, leaves upward
    std::vector<double> merged_opacity(nodes_.size());
    std::vector<Vec4> merged_quat(nodes_.size());
    for (std::size_t id = nodes_.size(); id-- > 0;) {
        const TetNode& n = nodes_[id];
        if (n.is_leaf()) {
            merged_opacity[id] = n.opacity_raw;
            merged_quat[id] = n.quat_raw.normalized();
        } else {
            std::array<Vec4, 4> qs;
            double o = -1e300;
            for (int i = 0; i < 4; ++i) {
                o = std::max(o, merged_opacity[n.children[i]]);
                qs[i] = merged_quat[n.children[i]];
            }
            merged_opacity[id] = o;
            merged_quat[id] = average_quaternions(qs);
        }
    }

    std::vector<CollapsedNode> out;
    std::vector<int> work;
    for (int r = 0; r < root_count(); ++r) {
        work.clear();
        work.push_back(r);
        while (!work.empty()) {
            int id = work.back();
            work.pop_back();
            const TetNode& n = nodes_[id];
            if (n.is_leaf() || n.depth == level) {
                out.push_back({id, world[id], merged_opacity[id], merged_quat[id]});
            } else {
                for (int i = 3; i >= 0; --i) work.push_back(n.children[i]);
            }
        }
    }
    return out;
}

}  // namespace stf
