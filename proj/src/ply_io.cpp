#include "stf/ply_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stf {

std::vector<PlyGaussian> state_to_ply_gaussians(const TrainState& state) {
    auto positions = state.effective_base_positions();
    auto leaf_tets = state.forest.resolve_leaf_tets(positions);
    std::vector<PlyGaussian> out;
    const int coeffs = state.sh_coeffs();
    for (const auto& leaf : leaf_tets) {
        const TetNode& node = state.forest.node(leaf.node);
        if (node.masked) continue;
        std::array<double, 4> w;
        double w_sum = 0.0;
        for (int i = 0; i < 4; ++i) {
            w[i] = weight_activation(node.weight_raw[i]);
            w_sum += w[i];
        }
        Vec3 mean;
        Mat3 cov;
        gaussian_geometry(leaf.corners, w, node.quat_raw.normalized(), mean, cov);

        PlyGaussian p;
        p.position = mean;
        Vec3 scales;
        covariance_to_scale_rotation(cov, scales, p.quat);
        for (int d = 0; d < 3; ++d) p.log_scales[d] = std::log(std::max(scales[d], 1e-12));
        p.opacity_raw = node.opacity_raw;

        // blended SH: color(d) = sum_i w_i SH_i(d) / sum w  is linear in the
        // coefficients, so the blend of coefficient sets is exact
        std::array<double, 48> blend{};
        for (int i = 0; i < 4; ++i) {
            const double* sh = state.sh_slot(node.sh_idx[i]);
            for (int k = 0; k < coeffs * 3; ++k) blend[k] += w[i] / w_sum * sh[k];
        }
        // dc first, then f_rest channel-major (all R coeffs, all G, all B)
        for (int ch = 0; ch < 3; ++ch) p.sh[ch] = blend[ch];
        for (int ch = 0; ch < 3; ++ch)
            for (int k = 1; k < 16; ++k)
                p.sh[3 + ch * 15 + (k - 1)] = k < coeffs ? blend[k * 3 + ch] : 0.0;
        out.push_back(p);
    }
    return out;
}

Gaussian3D ply_to_gaussian(const PlyGaussian& p, const Vec3& view_origin) {
    Gaussian3D g;
    g.mean = p.position;
    Mat3 r = quat_to_rotation(p.quat.normalized());
    Vec3 s2(std::exp(2 * p.log_scales[0]), std::exp(2 * p.log_scales[1]),
            std::exp(2 * p.log_scales[2]));
    g.cov = r * s2.asDiagonal() * r.transpose();
    g.opacity = sigmoid(p.opacity_raw);
    // re-expand channel-major rest into interleaved coefficients
    double coeffs[48];
    for (int ch = 0; ch < 3; ++ch) coeffs[ch] = p.sh[ch];
    for (int ch = 0; ch < 3; ++ch)
        for (int k = 1; k < 16; ++k) coeffs[k * 3 + ch] = p.sh[3 + ch * 15 + (k - 1)];
    double basis[16];
    Vec3 d = (g.mean - view_origin).normalized();
    sh_basis(3, d, basis);
    Vec3 c = Vec3::Constant(0.5);
    for (int k = 0; k < 16; ++k)
        for (int ch = 0; ch < 3; ++ch) c[ch] += basis[k] * coeffs[k * 3 + ch];
    g.color = c.cwiseMax(0.0).cwiseMin(1.0);
    return g;
}

void write_ply(const std::string& path, std::span<const PlyGaussian> gaussians) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << gaussians.size() << "\n";
    for (const char* name : {"x", "y", "z", "nx", "ny", "nz"})
        out << "property float " << name << "\n";
    for (int i = 0; i < 3; ++i) out << "property float f_dc_" << i << "\n";
    for (int i = 0; i < 45; ++i) out << "property float f_rest_" << i << "\n";
    out << "property float opacity\n";
    for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
    out << "end_header\n";
    for (const auto& g : gaussians) {
        float row[62];
        int k = 0;
        for (int d = 0; d < 3; ++d) row[k++] = static_cast<float>(g.position[d]);
        for (int d = 0; d < 3; ++d) row[k++] = 0.0f;  // normals
        for (int d = 0; d < 48; ++d) row[k++] = static_cast<float>(g.sh[d]);
        row[k++] = static_cast<float>(g.opacity_raw);
        for (int d = 0; d < 3; ++d) row[k++] = static_cast<float>(g.log_scales[d]);
        for (int d = 0; d < 4; ++d) row[k++] = static_cast<float>(g.quat[d]);
        out.write(reinterpret_cast<const char*>(row), sizeof(row));
    }
}

std::vector<PlyGaussian> read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != "ply") throw std::runtime_error(path + ": not a PLY file");
    std::getline(in, line);
    if (line.find("binary_little_endian") == std::string::npos)
        throw std::runtime_error(path + ": expected binary little-endian PLY");
    std::size_t count = 0;
    std::vector<std::string> props;
    while (std::getline(in, line)) {
        if (line.rfind("element vertex", 0) == 0) {
            std::istringstream ss(line);
            std::string a, b;
            ss >> a >> b >> count;
        } else if (line.rfind("property", 0) == 0) {
            std::istringstream ss(line);
            std::string a, type, name;
            ss >> a >> type >> name;
            if (type != "float") throw std::runtime_error(path + ": non-float PLY property");
            props.push_back(name);
        } else if (line == "end_header") {
            break;
        }
    }
    auto index_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < props.size(); ++i)
            if (props[i] == name) return static_cast<int>(i);
        throw std::runtime_error(path + ": missing PLY property " + name);
    };
    const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
    const int idc = index_of("f_dc_0");
    const int irest = index_of("f_rest_0");
    const int iop = index_of("opacity");
    const int isc = index_of("scale_0");
    const int irot = index_of("rot_0");

    std::vector<PlyGaussian> out(count);
    std::vector<float> row(props.size());
    for (std::size_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw std::runtime_error(path + ": truncated PLY payload");
        PlyGaussian& g = out[i];
        g.position = Vec3(row[ix], row[iy], row[iz]);
        for (int d = 0; d < 3; ++d) g.sh[d] = row[idc + d];
        for (int d = 0; d < 45; ++d) g.sh[3 + d] = row[irest + d];
        g.opacity_raw = row[iop];
        for (int d = 0; d < 3; ++d) g.log_scales[d] = row[isc + d];
        for (int d = 0; d < 4; ++d) g.quat[d] = row[irot + d];
    }
    return out;
}

}  // namespace stf
