#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stf/image.hpp"
#include "stf/rng.hpp"
#include "stf/tetgen_io.hpp"
#include "stf/tetmesh.hpp"

using namespace stf;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("node/ele round trip") {
    TetMesh grid = build_uniform_grid({Vec3(-1, 0, 2), Vec3(1, 3, 5)}, {2, 3, 1});
    auto node = temp_path("stf_rt.node");
    auto ele = temp_path("stf_rt.ele");
    write_node(node, grid.vertices());
    write_ele(ele, grid.tets());
    auto verts = read_node(node);
    auto tets = read_ele(ele);
    REQUIRE(verts.size() == grid.vertex_count());
    REQUIRE(tets.size() == grid.tet_count());
    for (std::size_t i = 0; i < verts.size(); ++i)
        CHECK((verts[i] - grid.vertices()[i]).norm() == 0.0);
    for (std::size_t i = 0; i < tets.size(); ++i) CHECK(tets[i] == grid.tets()[i]);
}

TEST_CASE("node/ele 1-based autodetect") {
    auto node = temp_path("stf_1based.node");
    auto ele = temp_path("stf_1based.ele");
    {
        std::ofstream n(node);
        n << "4 3 0 0\n"
          << "1 0 0 0\n"
          << "2 1 0 0\n"
          << "3 0 1 0\n"
          << "4 0 0 1\n";
        std::ofstream e(ele);
        e << "# comment line\n"
          << "1 4 0\n"
          << "1 1 2 3 4\n";
    }
    auto verts = read_node(node);
    auto tets = read_ele(ele);
    REQUIRE(verts.size() == 4);
    REQUIRE(tets.size() == 1);
    CHECK(tets[0] == Tet{0, 1, 2, 3});
    CHECK(signed_volume(verts[tets[0][0]], verts[tets[0][1]], verts[tets[0][2]],
                        verts[tets[0][3]]) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("node/ele errors") {
    CHECK_THROWS(read_node(temp_path("missing_file.node")));
    auto bad = temp_path("stf_bad.ele");
    {
        std::ofstream e(bad);
        e << "2 4 0\n"
          << "0 0 1 2 3\n";
    }
    CHECK_THROWS(read_ele(bad));
}

TEST_CASE("png round trip") {
    Rng rng(3);
    for (int ch : {1, 3, 4}) {
        ImageU8 img{13, 7, ch, {}};
        img.data.resize(13 * 7 * ch);
        for (auto& b : img.data) b = static_cast<std::uint8_t>(rng.uniform_int(256));
        auto path = temp_path("stf_rt_" + std::to_string(ch) + ".png");
        write_png(path, img);
        ImageU8 back = read_png(path);
        REQUIRE(back.width == img.width);
        REQUIRE(back.height == img.height);
        REQUIRE(back.channels == img.channels);
        CHECK(back.data == img.data);
    }
}

TEST_CASE("png rejects garbage") {
    auto path = temp_path("stf_not_png.png");
    {
        std::ofstream f(path);
        f << "definitely not a png";
    }
    CHECK_THROWS(read_png(path));
}

TEST_CASE("quantize and psnr") {
    ImageF a(4, 4, 3, 0.25);
    ImageF b = a;
    CHECK(image_psnr(a, b) == 99.0);
    b.at(0, 0, 0) += 0.5;
    CHECK(image_psnr(a, b) < 40.0);
    ImageU8 q = quantize(a);
    CHECK(q.data[0] == 64);
    ImageF f = to_float(q);
    CHECK(f.at(2, 2, 1) == doctest::Approx(0.25).epsilon(2e-2));
}

TEST_CASE("quality csv export") {
    TetMesh grid = build_uniform_grid({Vec3(0, 0, 0), Vec3(1, 1, 1)}, {1, 1, 1});
    auto rep = compute_quality(grid.vertices(), grid.tets());
    auto path = temp_path("stf_quality.csv");
    write_quality_csv(path, rep);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "tet_id,volume,Q,AR,AVR");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);
}
