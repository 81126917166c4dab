#include <doctest.h>

#include "stf/rng.hpp"
#include "stf/sh.hpp"

using namespace stf;

TEST_CASE("sh basis sizes and DC value") {
    CHECK(sh_coeff_count(0) == 1);
    CHECK(sh_coeff_count(3) == 16);
    double basis[16];
    sh_basis(0, Vec3(0, 0, 1), basis);
    CHECK(basis[0] == doctest::Approx(0.28209479177387814));
}

TEST_CASE("sh basis gradient matches finite differences") {
    Rng rng(1);
    double basis[16], dbasis[48], bp[16], bm[16];
    for (int rep = 0; rep < 50; ++rep) {
        Vec3 d(rng.normal(), rng.normal(), rng.normal());
        d.normalize();
        sh_basis_with_grad(3, d, basis, dbasis);
        const double h = 1e-6;
        for (int axis = 0; axis < 3; ++axis) {
            Vec3 dp = d, dm = d;
            dp[axis] += h;
            dm[axis] -= h;
            // the polynomial basis is defined off the sphere too
            sh_basis(3, dp, bp);
            sh_basis(3, dm, bm);
            for (int k = 0; k < 16; ++k) {
                double fd = (bp[k] - bm[k]) / (2 * h);
                CHECK(dbasis[3 * k + axis] == doctest::Approx(fd).epsilon(1e-6).scale(1e-9));
            }
        }
    }
}

TEST_CASE("odd bands flip under direction reversal") {
    Rng rng(2);
    double b1[16], b2[16];
    for (int rep = 0; rep < 20; ++rep) {
        Vec3 d(rng.normal(), rng.normal(), rng.normal());
        d.normalize();
        sh_basis(3, d, b1);
        sh_basis(3, -d, b2);
        CHECK(b1[0] == b2[0]);
        for (int k = 1; k < 4; ++k) CHECK(b1[k] == doctest::Approx(-b2[k]));   // l = 1
        for (int k = 4; k < 9; ++k) CHECK(b1[k] == doctest::Approx(b2[k]));    // l = 2
        for (int k = 9; k < 16; ++k) CHECK(b1[k] == doctest::Approx(-b2[k]));  // l = 3
    }
}
