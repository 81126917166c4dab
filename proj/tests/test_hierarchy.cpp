#include <doctest.h>

#include <sstream>

#include "stf/hierarchy.hpp"
#include "stf/rng.hpp"
#include "stf/tetmesh.hpp"

using namespace stf;

namespace {

std::array<Vec3, 4> tet_of(const SubdivisionForest::ResolvedTet& r) { return r.corners; }

std::vector<Vec3> single_tet_positions() {
    return {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
}

SubdivisionForest single_tet_forest(int max_depth = 5) {
    return SubdivisionForest({{0, 1, 2, 3}}, 4, max_depth);
}

double volume_of(const std::array<Vec3, 4>& t) { return signed_volume(t); }

}  // namespace

TEST_CASE("constrained barycentric coordinates") {
    Vec4 b = constrained_barycentric(Vec4::Zero());
    for (int i = 0; i < 4; ++i) CHECK(b[i] == doctest::Approx(0.25));
    CHECK(b.sum() == doctest::Approx(1.0));

    // extreme raw values stay strictly interior thanks to the floor
    Vec4 extreme = constrained_barycentric(Vec4(100, -100, -100, -100));
    CHECK(extreme.minCoeff() > 0.0);
    CHECK(extreme.minCoeff() >= kBarycentricFloor / (1 + 4 * kBarycentricFloor) - 1e-15);
    CHECK(extreme.sum() == doctest::Approx(1.0));

    // gradient vs finite differences
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        Vec4 raw(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        Vec4 adj(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        Vec4 g = constrained_barycentric_backward(raw, adj);
        const double h = 1e-6;
        for (int i = 0; i < 4; ++i) {
            Vec4 rp = raw, rm = raw;
            rp[i] += h;
            rm[i] -= h;
            double fd = adj.dot(constrained_barycentric(rp) - constrained_barycentric(rm)) / (2 * h);
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6).scale(1e-10));
        }
    }
}

TEST_CASE("centroid split yields four quarter volumes") {
    auto forest = single_tet_forest();
    REQUIRE(forest.subdivide(0) == 4);  // new slot after the 4 base vertices
    auto pos = single_tet_positions();
    auto leaves = forest.resolve_leaf_tets(pos);
    REQUIRE(leaves.size() == 4);
    double parent_v = 1.0 / 6.0;
    for (const auto& leaf : leaves)
        CHECK(volume_of(tet_of(leaf)) == doctest::Approx(parent_v / 4).epsilon(1e-12));
}

TEST_CASE("random interior control partitions the volume exactly") {
    Rng rng(2);
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<Vec3> pos(4);
        for (auto& p : pos) p = rng.uniform_vec3(-1, 1);
        if (signed_volume(pos[0], pos[1], pos[2], pos[3]) < 1e-4) continue;
        SubdivisionForest forest({{0, 1, 2, 3}}, 4);
        forest.node(0).ctrl_raw = Vec4(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        forest.subdivide(0);
        auto leaves = forest.resolve_leaf_tets(pos);
        double parent_v = signed_volume(pos[0], pos[1], pos[2], pos[3]);
        double child_sum = 0.0, child_min = 1e300;
        for (const auto& leaf : leaves) {
            double v = volume_of(tet_of(leaf));
            child_sum += v;
            child_min = std::min(child_min, v);
        }
        CHECK(std::abs(child_sum - parent_v) < 1e-12);
        CHECK(child_min > 0.0);
    }
}

TEST_CASE("nested splits compose the partition") {
    auto forest = single_tet_forest();
    forest.subdivide(0);
    for (int child : forest.node(0).children) forest.subdivide(child);
    auto pos = single_tet_positions();
    auto leaves = forest.resolve_leaf_tets(pos);
    REQUIRE(leaves.size() == 16);
    double sum = 0.0;
    for (const auto& leaf : leaves) sum += volume_of(tet_of(leaf));
    CHECK(sum == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(forest.leaf_count() == 16);
}

TEST_CASE("depth cap refuses splits") {
    auto forest = single_tet_forest(/*max_depth=*/1);
    CHECK(forest.subdivide(0) >= 0);
    int child = forest.node(0).children[0];
    CHECK(forest.subdivide(child) == -1);  // at cap
    CHECK(forest.node(child).is_leaf());
    CHECK(forest.subdivide(0) == -1);  // not a leaf
}

TEST_CASE("unsubdivided forest resolves to the base tets") {
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {2, 2, 2});
    SubdivisionForest forest(grid.tets(), static_cast<int>(grid.vertex_count()));
    auto leaves = forest.resolve_leaf_tets(grid.vertices());
    REQUIRE(leaves.size() == grid.tet_count());
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        auto expect = grid.tet_points(static_cast<int>(k));
        for (int i = 0; i < 4; ++i) CHECK((leaves[k].corners[i] - expect[i]).norm() == 0.0);
    }
}

TEST_CASE("resolve is equivariant under rigid motion of the base") {
    Rng rng(3);
    auto forest = single_tet_forest();
    forest.node(0).ctrl_raw = Vec4(0.3, -0.2, 0.5, 0.1);
    forest.subdivide(0);
    forest.subdivide(forest.node(0).children[2]);

    auto pos = single_tet_positions();
    auto base_leaves = forest.resolve_leaf_tets(pos);

    Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    Mat3 rot = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
    Vec3 shift(0.4, -1.2, 2.0);
    std::vector<Vec3> moved(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) moved[i] = rot * pos[i] + shift;

    auto moved_leaves = forest.resolve_leaf_tets(moved);
    REQUIRE(moved_leaves.size() == base_leaves.size());
    for (std::size_t k = 0; k < base_leaves.size(); ++k)
        for (int i = 0; i < 4; ++i) {
            Vec3 expect = rot * base_leaves[k].corners[i] + shift;
            CHECK((moved_leaves[k].corners[i] - expect).norm() < 1e-12);
        }
}

TEST_CASE("leaf count tracks splits") {
    auto forest = single_tet_forest();
    CHECK(forest.leaf_count() == 1);
    forest.subdivide(0);
    CHECK(forest.leaf_count() == 4);
    forest.subdivide(forest.node(0).children[1]);
    CHECK(forest.leaf_count() == 7);  // 1 + 3 * splits
}

TEST_CASE("split attribute inheritance") {
    auto forest = single_tet_forest();
    forest.node(0).opacity_raw = 1.25;
    forest.node(0).quat_raw = Vec4(0.5, 0.5, 0.5, 0.5);
    forest.node(0).weight_raw = Vec4(1, 2, 3, 4);
    int slot = forest.subdivide(0);
    CHECK(slot == 4);
    CHECK(forest.attribute_slot_count() == 5);
    for (int i = 0; i < 4; ++i) {
        const TetNode& child = forest.node(forest.node(0).children[i]);
        CHECK(child.opacity_raw == 1.25);
        CHECK(child.quat_raw == Vec4(0.5, 0.5, 0.5, 0.5));
        CHECK(child.depth == 1);
        // untouched corners keep the parent weight, interior corner blends
        for (int j = 0; j < 4; ++j) {
            if (j == i) {
                CHECK(child.weight_raw[j] == doctest::Approx(2.5));  // centroid blend
                CHECK(child.sh_idx[j] == slot);
            } else {
                CHECK(child.weight_raw[j] == forest.node(0).weight_raw[j]);
                CHECK(child.sh_idx[j] == j);
            }
        }
    }
}

TEST_CASE("collapse merge rules") {
    auto forest = single_tet_forest();
    forest.subdivide(0);
    auto& root = forest.node(0);
    double opacities[4] = {0.1, 0.2, 0.3, 0.4};
    for (int i = 0; i < 4; ++i) {
        forest.node(root.children[i]).opacity_raw = inverse_sigmoid(opacities[i]);
        forest.node(root.children[i]).quat_raw = Vec4(0.0, 1.0, 0.0, 0.0);
    }
    auto pos = single_tet_positions();
    auto collapsed = forest.collapse_to_level(0, pos);
    REQUIRE(collapsed.size() == 1);
    CHECK(sigmoid(collapsed[0].opacity_raw) == doctest::Approx(0.4));
    // identical child quaternions average to themselves
    CHECK((collapsed[0].quat - Vec4(0, 1, 0, 0)).norm() < 1e-15);

    // sign-aligned averaging is immune to double-cover flips
    forest.node(root.children[2]).quat_raw = Vec4(0.0, -1.0, 0.0, 0.0);
    collapsed = forest.collapse_to_level(0, pos);
    CHECK((collapsed[0].quat - Vec4(0, 1, 0, 0)).norm() < 1e-15);

    // deep level returns the leaves themselves
    auto deep = forest.collapse_to_level(7, pos);
    auto leaves = forest.resolve_leaf_tets(pos);
    REQUIRE(deep.size() == leaves.size());
    for (std::size_t i = 0; i < deep.size(); ++i) CHECK(deep[i].node == leaves[i].node);
}

TEST_CASE("root topology is immutable under subdivision") {
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1, 1, 1});
    SubdivisionForest forest(grid.tets(), static_cast<int>(grid.vertex_count()));
    auto serialize_roots = [&] {
        std::ostringstream ss;
        for (const Tet& t : forest.root_tets()) ss << t[0] << ',' << t[1] << ',' << t[2] << ','
                                                   << t[3] << ';';
        return ss.str();
    };
    std::string before = serialize_roots();
    forest.subdivide(0);
    forest.subdivide(forest.node(0).children[0]);
    forest.subdivide(3);
    CHECK(serialize_roots() == before);
}

TEST_CASE("resolve backward matches finite differences") {
    Rng rng(4);
    auto forest = single_tet_forest();
    forest.node(0).ctrl_raw = Vec4(0.2, -0.1, 0.4, 0.0);
    forest.subdivide(0);
    forest.node(forest.node(0).children[3]).ctrl_raw = Vec4(-0.3, 0.2, 0.1, 0.5);
    forest.subdivide(forest.node(0).children[3]);

    std::vector<Vec3> pos = single_tet_positions();
    auto leaves = forest.resolve_leaf_tets(pos);

    // random adjoint on every leaf corner
    std::vector<SubdivisionForest::ResolvedTet> adj = leaves;
    for (auto& a : adj)
        for (auto& c : a.corners) c = Vec3(rng.normal(), rng.normal(), rng.normal());

    std::vector<Vec3> d_pos(pos.size(), Vec3::Zero());
    std::vector<Vec4> d_ctrl(forest.node_count(), Vec4::Zero());
    forest.resolve_backward(pos, adj, d_pos, d_ctrl);

    auto objective = [&] {
        auto ls = forest.resolve_leaf_tets(pos);
        double sum = 0.0;
        for (std::size_t k = 0; k < ls.size(); ++k)
            for (int i = 0; i < 4; ++i) sum += adj[k].corners[i].dot(ls[k].corners[i]);
        return sum;
    };
    const double h = 1e-6;
    for (std::size_t v = 0; v < pos.size(); ++v)
        for (int d = 0; d < 3; ++d) {
            double saved = pos[v][d];
            pos[v][d] = saved + h;
            double fp = objective();
            pos[v][d] = saved - h;
            double fm = objective();
            pos[v][d] = saved;
            CHECK(d_pos[v][d] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6).scale(1e-10));
        }
    for (int node : {0, forest.node(0).children[3]})
        for (int i = 0; i < 4; ++i) {
            double saved = forest.node(node).ctrl_raw[i];
            forest.node(node).ctrl_raw[i] = saved + h;
            double fp = objective();
            forest.node(node).ctrl_raw[i] = saved - h;
            double fm = objective();
            forest.node(node).ctrl_raw[i] = saved;
            CHECK(d_ctrl[node][i] ==
                  doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6).scale(1e-10));
        }
}
