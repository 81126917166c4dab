#include "stf/hash_encoding.hpp"

#include <cmath>

namespace stf {

namespace {

constexpr std::uint32_t kPrimeU = 1u;
constexpr std::uint32_t kPrimeV = 2654435761u;

inline std::uint32_t hash_cell(std::uint32_t ix, std::uint32_t iy, std::uint32_t mask) {
    return ((ix * kPrimeU) ^ (iy * kPrimeV)) & mask;
}

}  // namespace

HashEncoding2D::HashEncoding2D(const HashEncodingConfig& cfg, Rng* init_rng) : cfg_(cfg) {
    rebuild_resolutions();
    table_.assign(cfg_.param_count(), 0.0);
    if (init_rng)
        for (double& w : table_) w = init_rng->uniform(-1e-4, 1e-4);
}

void HashEncoding2D::rebuild_resolutions() {
    res_.resize(cfg_.levels);
    if (cfg_.levels == 1) {
        res_[0] = cfg_.base_resolution;
        return;
    }
    double growth = std::exp((std::log(double(cfg_.max_resolution)) -
                              std::log(double(cfg_.base_resolution))) /
                             (cfg_.levels - 1));
    for (int l = 0; l < cfg_.levels; ++l)
        res_[l] = static_cast<int>(std::round(cfg_.base_resolution * std::pow(growth, l)));
}

void HashEncoding2D::encode(double u, double v, double* out) const {
    const std::uint32_t mask = cfg_.table_size() - 1;
    const int f = cfg_.features;
    for (int l = 0; l < cfg_.levels; ++l) {
        const double pu = u * res_[l], pv = v * res_[l];
        const double fu = std::floor(pu), fv = std::floor(pv);
        const double du = pu - fu, dv = pv - fv;
        const auto iu = static_cast<std::uint32_t>(fu), iv = static_cast<std::uint32_t>(fv);
        const double w00 = (1 - du) * (1 - dv), w10 = du * (1 - dv), w01 = (1 - du) * dv,
                     w11 = du * dv;
        const double* base = table_.data() + static_cast<std::size_t>(l) * cfg_.table_size() * f;
        const double* e00 = base + static_cast<std::size_t>(hash_cell(iu, iv, mask)) * f;
        const double* e10 = base + static_cast<std::size_t>(hash_cell(iu + 1, iv, mask)) * f;
        const double* e01 = base + static_cast<std::size_t>(hash_cell(iu, iv + 1, mask)) * f;
        const double* e11 = base + static_cast<std::size_t>(hash_cell(iu + 1, iv + 1, mask)) * f;
        for (int k = 0; k < f; ++k)
            out[l * f + k] = w00 * e00[k] + w10 * e10[k] + w01 * e01[k] + w11 * e11[k];
    }
}

void HashEncoding2D::encode_with_jacobian(double u, double v, double* out, double* d_du,
                                          double* d_dv) const {
    const std::uint32_t mask = cfg_.table_size() - 1;
    const int f = cfg_.features;
    for (int l = 0; l < cfg_.levels; ++l) {
        const double n = res_[l];
        const double pu = u * n, pv = v * n;
        const double fu = std::floor(pu), fv = std::floor(pv);
        const double du = pu - fu, dv = pv - fv;
        const auto iu = static_cast<std::uint32_t>(fu), iv = static_cast<std::uint32_t>(fv);
        const double* base = table_.data() + static_cast<std::size_t>(l) * cfg_.table_size() * f;
        const double* e00 = base + static_cast<std::size_t>(hash_cell(iu, iv, mask)) * f;
        const double* e10 = base + static_cast<std::size_t>(hash_cell(iu + 1, iv, mask)) * f;
        const double* e01 = base + static_cast<std::size_t>(hash_cell(iu, iv + 1, mask)) * f;
        const double* e11 = base + static_cast<std::size_t>(hash_cell(iu + 1, iv + 1, mask)) * f;
        for (int k = 0; k < f; ++k) {
            out[l * f + k] = (1 - du) * (1 - dv) * e00[k] + du * (1 - dv) * e10[k] +
                             (1 - du) * dv * e01[k] + du * dv * e11[k];
            // derivative of the bilinear blend, chain ruled through pu = u*n
            d_du[l * f + k] = n * ((1 - dv) * (e10[k] - e00[k]) + dv * (e11[k] - e01[k]));
            d_dv[l * f + k] = n * ((1 - du) * (e01[k] - e00[k]) + du * (e11[k] - e10[k]));
        }
    }
}

void HashEncoding2D::accumulate_table_grad(double u, double v, const double* d_out,
                                           std::vector<std::pair<std::uint32_t, double>>& grads) const {
    const std::uint32_t mask = cfg_.table_size() - 1;
    const int f = cfg_.features;
    for (int l = 0; l < cfg_.levels; ++l) {
        const double pu = u * res_[l], pv = v * res_[l];
        const double fu = std::floor(pu), fv = std::floor(pv);
        const double du = pu - fu, dv = pv - fv;
        const auto iu = static_cast<std::uint32_t>(fu), iv = static_cast<std::uint32_t>(fv);
        const std::uint32_t level_base = static_cast<std::uint32_t>(l) * cfg_.table_size();
        const std::uint32_t cell[4] = {hash_cell(iu, iv, mask), hash_cell(iu + 1, iv, mask),
                                       hash_cell(iu, iv + 1, mask), hash_cell(iu + 1, iv + 1, mask)};
        const double w[4] = {(1 - du) * (1 - dv), du * (1 - dv), (1 - du) * dv, du * dv};
        for (int c = 0; c < 4; ++c)
            for (int k = 0; k < f; ++k) {
                double g = w[c] * d_out[l * f + k];
                if (g != 0.0)
                    grads.emplace_back((level_base + cell[c]) * f + k, g);
            }
    }
}

}  // namespace stf
