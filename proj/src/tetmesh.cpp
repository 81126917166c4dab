#include "stf/tetmesh.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

namespace stf {

TetMesh::TetMesh(std::vector<Vec3> vertices, std::vector<Tet> tets)
    : vertices_(std::move(vertices)), tets_(std::move(tets)) {
    const int n = static_cast<int>(vertices_.size());
    for (std::size_t k = 0; k < tets_.size(); ++k) {
        for (int i : tets_[k])
            if (i < 0 || i >= n)
                throw std::invalid_argument("tet " + std::to_string(k) + " references vertex " +
                                            std::to_string(i) + " out of range");
        if (signed_volume(vertices_[tets_[k][0]], vertices_[tets_[k][1]], vertices_[tets_[k][2]],
                          vertices_[tets_[k][3]]) <= 0.0)
            throw std::invalid_argument("tet " + std::to_string(k) +
                                        " has non-positive signed volume");
    }
}

double TetMesh::total_volume() const {
    double v = 0.0;
    for (std::size_t k = 0; k < tets_.size(); ++k) {
        auto p = tet_points(static_cast<int>(k));
        v += signed_volume(p[0], p[1], p[2], p[3]);
    }
    return v;
}

double signed_volume(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3) {
    return (p1 - p0).cross(p2 - p0).dot(p3 - p0) / 6.0;
}

double signed_volume(const std::array<Vec3, 4>& tet) {
    return signed_volume(tet[0], tet[1], tet[2], tet[3]);
}

std::array<Vec3, 4> signed_volume_gradient(const std::array<Vec3, 4>& t) {
    std::array<Vec3, 4> g;
    g[1] = (t[2] - t[0]).cross(t[3] - t[0]) / 6.0;
    g[2] = (t[3] - t[0]).cross(t[1] - t[0]) / 6.0;
    g[3] = (t[1] - t[0]).cross(t[2] - t[0]) / 6.0;
    g[0] = -(g[1] + g[2] + g[3]);
    return g;
}

namespace {

constexpr int kEdgePairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
const double kGammaC0 = 6.0 * std::sqrt(2.0);

double mean_square_edge(const std::array<Vec3, 4>& t) {
    double s = 0.0;
    for (auto [a, b] : kEdgePairs) s += (t[a] - t[b]).squaredNorm();
    return s / 6.0;
}

}  // namespace

double quality_gamma(const std::array<Vec3, 4>& tet) {
    double v = signed_volume(tet);
    if (v <= 0.0) return 0.0;
    double s2 = mean_square_edge(tet);
    if (s2 <= 0.0) return 0.0;
    return kGammaC0 * v / (s2 * std::sqrt(s2));
}

std::array<Vec3, 4> quality_gamma_gradient(const std::array<Vec3, 4>& tet) {
    std::array<Vec3, 4> g{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    double v = signed_volume(tet);
    if (v <= 0.0) return g;
    double s2 = mean_square_edge(tet);
    if (s2 <= 0.0) return g;
    const double s3 = s2 * std::sqrt(s2);  // S_rms^3
    auto dv = signed_volume_gradient(tet);
    // dQ = C0 * (dV / S^3 - 3 V dS2 / (2 S^5)), with S^5 = s2^2 * sqrt(s2).
    const double s5 = s2 * s2 * std::sqrt(s2);
    std::array<Vec3, 4> ds2{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    for (auto [a, b] : kEdgePairs) {
        Vec3 e = tet[a] - tet[b];
        ds2[a] += e / 3.0;  // d(|e|^2)/dp_a = 2e, averaged over 6 edges
        ds2[b] -= e / 3.0;
    }
    for (int i = 0; i < 4; ++i)
        g[i] = kGammaC0 * (dv[i] / s3 - 1.5 * v * ds2[i] / s5);
    return g;
}

double aspect_ratio(const std::array<Vec3, 4>& t) {
    double v = signed_volume(t);
    if (v <= 0.0) return 0.0;
    double area_sum = 0.0;
    static constexpr int kFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
    for (auto [a, b, c] : kFaces)
        area_sum += 0.5 * (t[b] - t[a]).cross(t[c] - t[a]).norm();
    if (area_sum <= 0.0) return 0.0;
    double inradius = 3.0 * v / area_sum;
    // Circumcenter from 2*(p_i - p0) . c = |p_i|^2 - |p0|^2.
    Mat3 m;
    Vec3 rhs;
    for (int i = 1; i < 4; ++i) {
        m.row(i - 1) = 2.0 * (t[i] - t[0]).transpose();
        rhs[i - 1] = t[i].squaredNorm() - t[0].squaredNorm();
    }
    Vec3 center = m.partialPivLu().solve(rhs);
    double circumradius = (center - t[0]).norm();
    if (circumradius <= 0.0) return 0.0;
    return 3.0 * inradius / circumradius;
}

int count_inverted(std::span<const Vec3> positions, std::span<const Tet> tets) {
    int n = 0;
    for (const Tet& t : tets)
        if (signed_volume(positions[t[0]], positions[t[1]], positions[t[2]], positions[t[3]]) <=
            0.0)
            ++n;
    return n;
}

std::vector<std::vector<int>> vertex_tet_adjacency(std::size_t n_vertices,
                                                   std::span<const Tet> tets) {
    std::vector<std::vector<int>> v2t(n_vertices);
    for (std::size_t k = 0; k < tets.size(); ++k)
        for (int v : tets[k]) v2t[v].push_back(static_cast<int>(k));
    return v2t;
}

double adjacent_volume_ratio(std::span<const Vec3> positions, std::span<const Tet> tets,
                             const std::vector<std::vector<int>>& v2t, int k) {
    double vmin = 1e300, vmax = 0.0;
    std::vector<int> ring;
    for (int v : tets[k])
        for (int t : v2t[v]) ring.push_back(t);
    std::sort(ring.begin(), ring.end());
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
    for (int t : ring) {
        const Tet& tt = tets[t];
        double vol = std::abs(
            signed_volume(positions[tt[0]], positions[tt[1]], positions[tt[2]], positions[tt[3]]));
        vmin = std::min(vmin, vol);
        vmax = std::max(vmax, vol);
    }
    if (vmin <= 0.0) return std::numeric_limits<double>::infinity();
    return vmax / vmin;
}

double adjacent_volume_ratio(const TetMesh& mesh, int k) {
    auto v2t = vertex_tet_adjacency(mesh.vertex_count(), mesh.tets());
    return adjacent_volume_ratio(mesh.vertices(), mesh.tets(), v2t, k);
}

namespace {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v), s = 0.0;
    for (double x : v) s += sqr(x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

double QualityReport::mean_q() const { return mean_of(q); }
double QualityReport::std_q() const { return std_of(q); }
double QualityReport::mean_ar() const { return mean_of(ar); }
double QualityReport::std_ar() const { return std_of(ar); }
double QualityReport::mean_avr() const { return mean_of(avr); }
double QualityReport::std_avr() const { return std_of(avr); }

QualityReport compute_quality(std::span<const Vec3> positions, std::span<const Tet> tets) {
    QualityReport r;
    auto v2t = vertex_tet_adjacency(positions.size(), tets);
    r.volume.reserve(tets.size());
    for (std::size_t k = 0; k < tets.size(); ++k) {
        const Tet& t = tets[k];
        std::array<Vec3, 4> p{positions[t[0]], positions[t[1]], positions[t[2]], positions[t[3]]};
        double v = signed_volume(p);
        r.volume.push_back(v);
        r.q.push_back(quality_gamma(p));
        r.ar.push_back(aspect_ratio(p));
        r.avr.push_back(adjacent_volume_ratio(positions, tets, v2t, static_cast<int>(k)));
        if (v <= 0.0) ++r.inverted_count;
    }
    return r;
}

void write_quality_csv(const std::string& path, const QualityReport& report) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(f, "tet_id,volume,Q,AR,AVR\n");
    for (std::size_t k = 0; k < report.volume.size(); ++k)
        std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%.17g\n", k, report.volume[k], report.q[k],
                     report.ar[k], report.avr[k]);
    std::fclose(f);
}

ConformalityReport validate_conformal(std::span<const Tet> tets) {
    // Outward faces of a positively oriented tet, as corner index triples.
    static constexpr int kFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
    struct Entry {
        int even = 0;  // winding parity counts
        int odd = 0;
    };
    std::map<std::array<int, 3>, Entry> faces;
    for (const Tet& t : tets) {
        for (auto [a, b, c] : kFaces) {
            std::array<int, 3> f{t[a], t[b], t[c]};
            // Parity of the permutation sorting the oriented triple.
            int swaps = 0;
            std::array<int, 3> s = f;
            if (s[0] > s[1]) { std::swap(s[0], s[1]); ++swaps; }
            if (s[1] > s[2]) { std::swap(s[1], s[2]); ++swaps; }
            if (s[0] > s[1]) { std::swap(s[0], s[1]); ++swaps; }
            auto& e = faces[s];
            (swaps % 2 == 0 ? e.even : e.odd)++;
        }
    }
    ConformalityReport r;
    for (auto& [key, e] : faces) {
        int total = e.even + e.odd;
        if (total == 1) {
            ++r.boundary_faces;
        } else if (total == 2 && e.even == 1 && e.odd == 1) {
            ++r.interior_faces;
        } else {
            r.ok = false;
            r.bad_faces.push_back(key);
        }
    }
    return r;
}

TetMesh build_uniform_grid(const Aabb& bbox, const std::array<int, 3>& resolution) {
    for (int r : resolution)
        if (r < 1) throw std::invalid_argument("grid resolution must be >= 1 per axis");
    Vec3 ext = bbox.extent();
    if (ext.minCoeff() <= 0.0) throw std::invalid_argument("degenerate bounding box");

    const int nx = resolution[0], ny = resolution[1], nz = resolution[2];
    std::vector<Vec3> verts;
    verts.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i)
                verts.push_back(bbox.lo + Vec3(ext.x() * i / nx, ext.y() * j / ny,
                                               ext.z() * k / nz));
    auto vid = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };

    // Six tets per cell, one per permutation of the axis walk from the cell's
    // low corner to its high corner; all share the main diagonal.
    static constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                         {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    static constexpr int kPermSign[6] = {1, -1, -1, 1, 1, -1};
    std::vector<Tet> tets;
    tets.reserve(static_cast<std::size_t>(nx) * ny * nz * 6);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                for (int p = 0; p < 6; ++p) {
                    int c[3] = {i, j, k};
                    Tet t;
                    t[0] = vid(c[0], c[1], c[2]);
                    for (int step = 0; step < 3; ++step) {
                        c[kPerms[p][step]] += 1;
                        t[step + 1] = vid(c[0], c[1], c[2]);
                    }
                    if (kPermSign[p] < 0) std::swap(t[1], t[2]);
                    tets.push_back(t);
                }
    return TetMesh(std::move(verts), std::move(tets));
}

}  // namespace stf
