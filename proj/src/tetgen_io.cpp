#include "stf/tetgen_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stf {

namespace {

std::vector<std::string> content_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        bool blank = line.find_first_not_of(" \t\r\n") == std::string::npos;
        if (!blank) lines.push_back(line);
    }
    if (lines.empty()) throw std::runtime_error(path + ": empty file");
    return lines;
}

}  // namespace

void write_node(const std::string& path, std::span<const Vec3> positions) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(f, "%zu 3 0 0\n", positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        std::fprintf(f, "%zu %.17g %.17g %.17g\n", i, positions[i].x(), positions[i].y(),
                     positions[i].z());
    std::fclose(f);
}

void write_ele(const std::string& path, std::span<const Tet> tets) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(f, "%zu 4 0\n", tets.size());
    for (std::size_t i = 0; i < tets.size(); ++i)
        std::fprintf(f, "%zu %d %d %d %d\n", i, tets[i][0], tets[i][1], tets[i][2], tets[i][3]);
    std::fclose(f);
}

std::vector<Vec3> read_node(const std::string& path) {
    auto lines = content_lines(path);
    std::istringstream header(lines[0]);
    std::size_t n = 0;
    int dim = 0;
    header >> n >> dim;
    if (dim != 3) throw std::runtime_error(path + ": expected 3D points, got dim " +
                                           std::to_string(dim));
    if (lines.size() < n + 1) throw std::runtime_error(path + ": truncated node file");
    std::vector<Vec3> pts(n);
    long long base = -1;
    for (std::size_t i = 0; i < n; ++i) {
        std::istringstream row(lines[i + 1]);
        long long idx;
        double x, y, z;
        if (!(row >> idx >> x >> y >> z))
            throw std::runtime_error(path + ": malformed point line " + std::to_string(i + 1));
        if (base < 0) base = idx;  // 0- or 1-based, from the first index
        long long slot = idx - base;
        if (slot < 0 || slot >= static_cast<long long>(n))
            throw std::runtime_error(path + ": point index " + std::to_string(idx) +
                                     " out of range");
        pts[slot] = Vec3(x, y, z);
    }
    return pts;
}

std::vector<Tet> read_ele(const std::string& path) {
    auto lines = content_lines(path);
    std::istringstream header(lines[0]);
    std::size_t n = 0;
    int nodes_per = 0;
    header >> n >> nodes_per;
    if (nodes_per != 4)
        throw std::runtime_error(path + ": expected 4 nodes per tet, got " +
                                 std::to_string(nodes_per));
    if (lines.size() < n + 1) throw std::runtime_error(path + ": truncated ele file");
    std::vector<Tet> tets(n);
    long long base = -1;
    for (std::size_t i = 0; i < n; ++i) {
        std::istringstream row(lines[i + 1]);
        long long idx, v0, v1, v2, v3;
        if (!(row >> idx >> v0 >> v1 >> v2 >> v3))
            throw std::runtime_error(path + ": malformed tet line " + std::to_string(i + 1));
        if (base < 0) base = idx;
        long long slot = idx - base;
        if (slot < 0 || slot >= static_cast<long long>(n))
            throw std::runtime_error(path + ": tet index " + std::to_string(idx) +
                                     " out of range");
        tets[slot] = {static_cast<int>(v0 - base), static_cast<int>(v1 - base),
                      static_cast<int>(v2 - base), static_cast<int>(v3 - base)};
    }
    return tets;
}

}  // namespace stf
