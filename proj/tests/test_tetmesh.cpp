#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "stf/rng.hpp"
#include "stf/tetmesh.hpp"

using namespace stf;

namespace {

std::array<Vec3, 4> corner_tet() {
    return {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
}

std::array<Vec3, 4> regular_tet(double scale = 1.0) {
    return {scale * Vec3(1, 1, 1), scale * Vec3(1, -1, -1), scale * Vec3(-1, -1, 1),
            scale * Vec3(-1, 1, -1)};
}

std::array<Vec3, 4> random_tet(Rng& rng, double min_vol = 1e-4) {
    for (;;) {
        std::array<Vec3, 4> t;
        for (auto& p : t) p = rng.uniform_vec3(-1.0, 1.0);
        double v = signed_volume(t);
        if (v < 0) {
            std::swap(t[2], t[3]);
            v = -v;
        }
        if (v > min_vol) return t;
    }
}

Mat3 random_rotation(Rng& rng) {
    Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

// Brute-force face incidence count, independent of validate_conformal's
// parity bookkeeping.
std::map<std::array<int, 3>, int> face_counts(const std::vector<Tet>& tets) {
    std::map<std::array<int, 3>, int> counts;
    for (const Tet& t : tets) {
        for (int skip = 0; skip < 4; ++skip) {
            std::array<int, 3> f;
            int j = 0;
            for (int i = 0; i < 4; ++i)
                if (i != skip) f[j++] = t[i];
            std::sort(f.begin(), f.end());
            counts[f]++;
        }
    }
    return counts;
}

}  // namespace

TEST_CASE("signed volume basics") {
    auto t = corner_tet();
    CHECK(signed_volume(t[0], t[1], t[2], t[3]) == doctest::Approx(1.0 / 6.0));
    CHECK(signed_volume(t[0], t[1], t[3], t[2]) == doctest::Approx(-1.0 / 6.0));
    CHECK(signed_volume(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)) == 0.0);
}

TEST_CASE("signed volume symmetry and scaling properties") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        auto t = random_tet(rng);
        double v = signed_volume(t);
        // antisymmetric under a swap
        CHECK(signed_volume(t[1], t[0], t[2], t[3]) == doctest::Approx(-v).epsilon(1e-12));
        // translation invariant
        Vec3 d = rng.uniform_vec3(-5, 5);
        CHECK(signed_volume(t[0] + d, t[1] + d, t[2] + d, t[3] + d) ==
              doctest::Approx(v).epsilon(1e-9));
        // scales cubically
        double s = rng.uniform(0.5, 2.0);
        CHECK(signed_volume(s * t[0], s * t[1], s * t[2], s * t[3]) ==
              doctest::Approx(s * s * s * v).epsilon(1e-12));
    }
}

TEST_CASE("quality gamma reference values") {
    CHECK(quality_gamma(regular_tet()) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(quality_gamma(regular_tet(37.5)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(quality_gamma({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)}) == 0.0);
    // corner tet: V = 1/6, S_rms = sqrt(1.5), oracle value recomputed here
    double v = 1.0 / 6.0;
    double s_rms = std::sqrt((3.0 * 1.0 + 3.0 * 2.0) / 6.0);
    double expected = 6.0 * std::sqrt(2.0) * v / (s_rms * s_rms * s_rms);
    CHECK(expected == doctest::Approx(0.7698).epsilon(1e-4));
    CHECK(quality_gamma(corner_tet()) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("aspect ratio reference values") {
    CHECK(aspect_ratio(regular_tet()) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(aspect_ratio({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)}) == 0.0);
    // corner tet oracle: r = 3V / sum(face areas), rho = |(.5,.5,.5)|
    double v = 1.0 / 6.0;
    double areas = 3 * 0.5 + std::sqrt(3.0) / 2.0;
    double r = 3.0 * v / areas;
    double rho = std::sqrt(3.0) / 2.0;
    CHECK(3.0 * r / rho == doctest::Approx(0.732).epsilon(1e-3));
    CHECK(aspect_ratio(corner_tet()) == doctest::Approx(3.0 * r / rho).epsilon(1e-12));
}

TEST_CASE("quality metrics are rigid-motion and scale invariant") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        auto t = random_tet(rng);
        double q0 = quality_gamma(t);
        double ar0 = aspect_ratio(t);
        Mat3 rot = random_rotation(rng);
        Vec3 shift = rng.uniform_vec3(-3, 3);
        double s = rng.uniform(0.2, 5.0);
        std::array<Vec3, 4> t2;
        for (int j = 0; j < 4; ++j) t2[j] = s * (rot * t[j]) + shift;
        CHECK(quality_gamma(t2) == doctest::Approx(q0).epsilon(1e-9));
        CHECK(aspect_ratio(t2) == doctest::Approx(ar0).epsilon(1e-9));
    }
}

TEST_CASE("quality metrics stay in (0, 1] on random tets") {
    Rng rng(13);
    for (int i = 0; i < 10000; ++i) {
        auto t = random_tet(rng, 1e-6);
        double q = quality_gamma(t);
        double ar = aspect_ratio(t);
        CHECK(q > 0.0);
        CHECK(q <= 1.0 + 1e-12);
        CHECK(ar > 0.0);
        CHECK(ar <= 1.0 + 1e-12);
    }
}

TEST_CASE("quality gamma gradient matches finite differences") {
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        auto t = random_tet(rng, 1e-2);
        auto grad = quality_gamma_gradient(t);
        const double h = 1e-6;
        for (int i = 0; i < 4; ++i)
            for (int d = 0; d < 3; ++d) {
                auto tp = t, tm = t;
                tp[i][d] += h;
                tm[i][d] -= h;
                double fd = (quality_gamma(tp) - quality_gamma(tm)) / (2 * h);
                CHECK(grad[i][d] == doctest::Approx(fd).epsilon(1e-5));
            }
    }
}

TEST_CASE("adjacent volume ratio") {
    // two tets sharing a face, volumes 1/6 and 1/12
    std::vector<Vec3> verts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1),
                               Vec3(0.5, 0.5, -0.5)};
    std::vector<Tet> tets = {{0, 1, 2, 3}, {0, 2, 1, 4}};
    REQUIRE(signed_volume(verts[0], verts[2], verts[1], verts[4]) == doctest::Approx(1.0 / 12.0));
    TetMesh mesh(verts, tets);
    CHECK(adjacent_volume_ratio(mesh, 0) == doctest::Approx(2.0));
    CHECK(adjacent_volume_ratio(mesh, 1) == doctest::Approx(2.0));

    // isolated tet
    TetMesh single({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {{0, 1, 2, 3}});
    CHECK(adjacent_volume_ratio(single, 0) == doctest::Approx(1.0));

    // uniform grid: congruent cells
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {2, 2, 2});
    for (int k = 0; k < 8; ++k)
        CHECK(adjacent_volume_ratio(grid, k) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uniform grid construction") {
    TetMesh unit = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1, 1, 1});
    CHECK(unit.tet_count() == 6);
    for (int k = 0; k < 6; ++k) {
        auto p = unit.tet_points(k);
        CHECK(signed_volume(p) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    }
    CHECK(count_inverted(unit.vertices(), unit.tets()) == 0);
    CHECK(validate_conformal(unit).ok);

    TetMesh two = build_uniform_grid({Vec3(0, 0, 0), Vec3(2, 1, 1)}, {2, 1, 1});
    CHECK(two.tet_count() == 12);
    CHECK(two.total_volume() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(validate_conformal(two).ok);

    TetMesh grid = build_uniform_grid({Vec3(-1, -0.5, 0), Vec3(1, 1.5, 3)}, {3, 4, 2});
    CHECK(grid.tet_count() == 3 * 4 * 2 * 6);
    CHECK(grid.total_volume() == doctest::Approx(2.0 * 2.0 * 3.0).epsilon(1e-12));
    CHECK(count_inverted(grid.vertices(), grid.tets()) == 0);
    CHECK(validate_conformal(grid).ok);

    // brute-force face incidence: every face is shared by 1 or 2 tets
    auto counts = face_counts(grid.tets());
    for (auto& [face, n] : counts) {
        CHECK(n >= 1);
        CHECK(n <= 2);
    }

    CHECK_THROWS(build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 0, 1)}, {1, 1, 1}));
    CHECK_THROWS(build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {0, 1, 1}));
}

TEST_CASE("validate_conformal flags violations") {
    // two disjoint tets: conformal with 8 boundary faces
    std::vector<Tet> disjoint = {{0, 1, 2, 3}, {4, 5, 6, 7}};
    auto rep = validate_conformal(std::span<const Tet>(disjoint));
    CHECK(rep.ok);
    CHECK(rep.boundary_faces == 8);
    CHECK(rep.interior_faces == 0);

    // face {0,1,2} shared by three tets
    std::vector<Tet> bad = {{0, 1, 2, 3}, {0, 2, 1, 4}, {0, 1, 2, 5}};
    rep = validate_conformal(std::span<const Tet>(bad));
    CHECK_FALSE(rep.ok);
    REQUIRE(rep.bad_faces.size() == 1);
    CHECK(rep.bad_faces[0] == std::array<int, 3>{0, 1, 2});

    // same-winding duplicate pair is also rejected
    std::vector<Tet> dup = {{0, 1, 2, 3}, {0, 1, 2, 4}};
    CHECK_FALSE(validate_conformal(std::span<const Tet>(dup)).ok);
}

TEST_CASE("count_inverted") {
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {2, 2, 2});
    CHECK(count_inverted(grid.vertices(), grid.tets()) == 0);

    // reflect one vertex far through the mesh
    std::vector<Vec3> moved = grid.vertices();
    moved[0] = Vec3(2.0, 2.0, 2.0);
    CHECK(count_inverted(moved, grid.tets()) >= 1);
}

TEST_CASE("mesh construction validates input") {
    std::vector<Vec3> verts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    CHECK_THROWS(TetMesh(verts, {{0, 1, 2, 7}}));
    CHECK_THROWS(TetMesh(verts, {{0, 2, 1, 3}}));  // inverted
    CHECK_NOTHROW(TetMesh(verts, {{0, 1, 2, 3}}));
}

TEST_CASE("quality report") {
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {2, 2, 2});
    auto rep = compute_quality(grid.vertices(), grid.tets());
    CHECK(rep.inverted_count == 0);
    CHECK(rep.mean_avr() == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = 0; k < rep.q.size(); ++k) {
        CHECK(rep.q[k] > 0.0);
        CHECK(rep.ar[k] > 0.0);
        CHECK(rep.volume[k] == doctest::Approx(1.0 / 48.0).epsilon(1e-12));
    }
}
