#include <doctest.h>

#include <set>

#include "stf/dynamics.hpp"
#include "stf/scene.hpp"

using namespace stf;

namespace {

TetMesh single_tet() {
    return TetMesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {{0, 1, 2, 3}});
}

}  // namespace

TEST_CASE("build_springs basics") {
    TetMesh tet = single_tet();
    auto sys = build_springs(tet, tet.vertices(), 1000.0, 0.0);
    CHECK(sys.positions.size() == 4);
    CHECK(sys.springs.size() == 6);
    CHECK(sys.total_mass() == doctest::Approx(1000.0 / 6.0).epsilon(1e-12));

    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1, 1, 1});
    auto gsys = build_springs(grid, grid.vertices(), 2.0, 0.0);
    CHECK(gsys.positions.size() == 8);
    // brute-force unique edge count oracle
    std::set<std::pair<int, int>> edges;
    static constexpr int kEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const Tet& t : grid.tets())
        for (auto [a, b] : kEdges)
            edges.insert({std::min(t[a], t[b]), std::max(t[a], t[b])});
    CHECK(edges.size() == 19);
    CHECK(gsys.springs.size() == edges.size());
    CHECK(gsys.total_mass() == doctest::Approx(2.0 * grid.total_volume()).epsilon(1e-12));
}

TEST_CASE("free particle under gravity follows symplectic euler") {
    TetMesh tet = single_tet();
    auto sys = build_springs(tet, tet.vertices(), 1.0, 0.0);
    sys.springs.clear();
    sys.gravity = Vec3(0, 0, -10.0);
    Vec3 x0 = sys.positions[0];
    const double dt = 0.01;
    xpbd_step(sys, dt, 5);
    CHECK((sys.velocities[0] - Vec3(0, 0, -0.1)).norm() < 1e-12);
    CHECK((sys.positions[0] - (x0 + Vec3(0, 0, -0.1 * dt))).norm() < 1e-12);
}

TEST_CASE("two-particle constraint converges to rest length") {
    MassSpringSystem sys;
    sys.positions = {Vec3(-1, 0, 0), Vec3(1, 0, 0)};
    sys.velocities = {Vec3::Zero(), Vec3::Zero()};
    sys.inv_mass = {1.0, 1.0};
    sys.springs = {{0, 1, 1.0}};
    sys.compliance = 0.0;
    sys.gravity = Vec3::Zero();
    xpbd_step(sys, 0.01, 50);
    double dist = (sys.positions[0] - sys.positions[1]).norm();
    CHECK(std::abs(dist - 1.0) < 1e-6);
    // converged symmetrically
    CHECK(std::abs(sys.positions[0].x() + sys.positions[1].x()) < 1e-12);
}

TEST_CASE("pinned particle never moves") {
    TetMesh tet = single_tet();
    auto sys = build_springs(tet, tet.vertices(), 1.0, 0.0);
    sys.gravity = Vec3(0, 0, -9.81);
    sys.pin(3);
    Vec3 fixed = sys.positions[3];
    for (int i = 0; i < 100; ++i) xpbd_step(sys, 1.0 / 600.0, 10);
    CHECK(sys.positions[3] == fixed);
}

TEST_CASE("satisfied constraints with zero gravity are a fixed point") {
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1, 1, 1});
    auto sys = build_springs(grid, grid.vertices(), 1.0, 0.0);
    sys.gravity = Vec3::Zero();
    auto before = sys.positions;
    for (int i = 0; i < 10; ++i) xpbd_step(sys, 0.01, 10);
    for (std::size_t v = 0; v < before.size(); ++v)
        CHECK((sys.positions[v] - before[v]).norm() < 1e-12);
}

TEST_CASE("momentum is conserved without pins or gravity") {
    TetMesh tet = single_tet();
    auto sys = build_springs(tet, tet.vertices(), 6.0, 0.0);  // equal masses
    sys.gravity = Vec3::Zero();
    // random velocities
    Rng rng(3);
    Vec3 p_total = Vec3::Zero();
    for (std::size_t i = 0; i < sys.velocities.size(); ++i) {
        sys.velocities[i] = Vec3(rng.normal(), rng.normal(), rng.normal());
        p_total += sys.velocities[i] / sys.inv_mass[i];
    }
    // stretch the system so constraints act
    for (auto& p : sys.positions) p *= 1.3;
    for (int i = 0; i < 20; ++i) xpbd_step(sys, 0.005, 8);
    Vec3 p_after = Vec3::Zero();
    for (std::size_t i = 0; i < sys.velocities.size(); ++i)
        p_after += sys.velocities[i] / sys.inv_mass[i];
    CHECK((p_after - p_total).norm() < 1e-10);
}

TEST_CASE("lattice deformation") {
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {2, 2, 2});
    Aabb box{Vec3(0, 0, 0), Vec3(1, 1, 1)};
    LatticeDeformer lattice(box, {2, 2, 2}, grid.vertices());
    CHECK(lattice.clamped_vertices() == 0);

    std::vector<Vec3> zero(lattice.control_count(), Vec3::Zero());
    auto same = lattice.apply(zero, grid.vertices());
    for (std::size_t i = 0; i < same.size(); ++i)
        CHECK((same[i] - grid.vertices()[i]).norm() == 0.0);

    // uniform displacement -> rigid translation
    std::vector<Vec3> uniform(lattice.control_count(), Vec3(0.2, -0.1, 0.3));
    auto moved = lattice.apply(uniform, grid.vertices());
    for (std::size_t i = 0; i < moved.size(); ++i)
        CHECK((moved[i] - grid.vertices()[i] - Vec3(0.2, -0.1, 0.3)).norm() < 1e-12);

    // single corner control: corner vertex moves fully, opposite corner not
    std::vector<Vec3> corner(lattice.control_count(), Vec3::Zero());
    corner[lattice.control_index(0, 0, 0)] = Vec3(0.1, 0, 0);
    auto bent = lattice.apply(corner, grid.vertices());
    CHECK((bent[0] - (grid.vertices()[0] + Vec3(0.1, 0, 0))).norm() < 1e-12);
    int far_corner = 26;  // vertex (1,1,1) in the 3x3x3 grid ordering
    CHECK((bent[far_corner] - grid.vertices()[far_corner]).norm() == 0.0);

    // exact linearity in the control displacements
    Rng rng(4);
    std::vector<Vec3> da(lattice.control_count()), db(lattice.control_count());
    for (auto& d : da) d = Vec3(rng.normal(), rng.normal(), rng.normal());
    for (auto& d : db) d = Vec3(rng.normal(), rng.normal(), rng.normal());
    std::vector<Vec3> dsum(lattice.control_count());
    for (std::size_t i = 0; i < dsum.size(); ++i) dsum[i] = 2.0 * da[i] + 0.5 * db[i];
    auto ra = lattice.apply(da, grid.vertices());
    auto rb = lattice.apply(db, grid.vertices());
    auto rsum = lattice.apply(dsum, grid.vertices());
    for (std::size_t i = 0; i < rsum.size(); ++i) {
        Vec3 expect = grid.vertices()[i] + 2.0 * (ra[i] - grid.vertices()[i]) +
                      0.5 * (rb[i] - grid.vertices()[i]);
        CHECK((rsum[i] - expect).norm() < 1e-12);
    }

    // out-of-box vertices are clamped and counted
    std::vector<Vec3> outside = {Vec3(2, 2, 2)};
    LatticeDeformer l2(box, {2, 2, 2}, outside);
    CHECK(l2.clamped_vertices() == 1);
}

TEST_CASE("playback: constant sequence renders identical frames") {
    TrainConfig cfg;
    cfg.mode = ConstraintMode::kFrozenVertices;
    cfg.sh_degree = 0;
    cfg.map.encoding.table_size_log2 = 10;
    cfg.map.encoding.levels = 2;
    cfg.map.hidden_dim = 8;
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1, 1, 1});
    TrainState st = make_initial_state(std::move(grid), cfg);
    Rng rng(5);
    randomize_attributes(st, rng);
    split_leaf_with_attributes(st, 0);

    Camera cam = make_orbit_camera(Vec3(0.5, 0.5, 0.5), 2.5, 0.4, 0.3, 0.8, 32, 32);
    auto rest = st.base.vertices();
    auto f1 = playback_frame(st, rest, rest, cam, Vec3(0, 0, 0));
    auto f2 = playback_frame(st, rest, rest, cam, Vec3(0, 0, 0));
    CHECK(f1.image.rgb.data == f2.image.rgb.data);
    CHECK(f1.inverted_base_tets == 0);
}

TEST_CASE("playback equivariance under rigid motion") {
    TrainConfig cfg;
    cfg.mode = ConstraintMode::kFrozenVertices;
    cfg.sh_degree = 0;  // view-independent color so scene rotation is exact
    cfg.map.encoding.table_size_log2 = 10;
    cfg.map.encoding.levels = 2;
    cfg.map.hidden_dim = 8;
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1, 1, 1});
    TrainState st = make_initial_state(std::move(grid), cfg);
    Rng rng(6);
    randomize_attributes(st, rng);
    split_leaf_with_attributes(st, 2);

    Vec4 q(0.9, 0.2, -0.3, 0.1);
    Mat3 rot = quat_to_rotation(q.normalized());
    Vec3 shift(0.3, -0.2, 0.4);
    auto rest = st.base.vertices();
    std::vector<Vec3> moved(rest.size());
    for (std::size_t i = 0; i < rest.size(); ++i) moved[i] = rot * rest[i] + shift;

    Camera cam = make_orbit_camera(rot * Vec3(0.5, 0.5, 0.5) + shift, 2.5, 0.7, 0.25, 0.8, 48, 48);
    auto frame = playback_frame(st, rest, moved, cam, Vec3(0, 0, 0));

    // oracle: directly transform the rest-pose gaussians
    auto scene = assemble_gaussians(st, rest, cam);
    for (auto& g : scene.gaussians) {
        g.mean = rot * g.mean + shift;
        g.cov = rot * g.cov * rot.transpose();
    }
    auto direct = render(scene.gaussians, cam, Vec3(0, 0, 0));
    CHECK(psnr(frame.image.rgb, direct.rgb) > 50.0);

    // leaf volumes still partition deformed roots
    auto leaves = st.forest.resolve_leaf_tets(moved);
    double sum = 0.0;
    for (const auto& leaf : leaves)
        sum += signed_volume(leaf.corners[0], leaf.corners[1], leaf.corners[2], leaf.corners[3]);
    double root_sum = 0.0;
    for (const Tet& t : st.base.tets())
        root_sum += signed_volume(moved[t[0]], moved[t[1]], moved[t[2]], moved[t[3]]);
    CHECK(sum == doctest::Approx(root_sum).epsilon(1e-12));
}
