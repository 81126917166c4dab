#include "stf/homeo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stf {

namespace {

inline double clamp01(double x, bool* interior = nullptr) {
    if (interior) *interior = x > 0.0 && x < 1.0;
    return std::clamp(x, 0.0, 1.0);
}

}  // namespace

CouplingBlock::CouplingBlock(int axis, const HashEncodingConfig& enc_cfg, int hidden_dim, Rng& rng)
    : axis_(axis), enc_(enc_cfg, &rng), mlp_(enc_cfg.output_dim(), hidden_dim, 2) {
    mlp_.init_random(rng, /*zero_output=*/true);
}

Mat3 CouplingBlock::permutation_matrix() const {
    Mat3 p = Mat3::Zero();
    auto src = permutation();
    for (int i = 0; i < 3; ++i) p(i, src[i]) = 1.0;
    return p;
}

Vec2 CouplingBlock::conditioner(double u, double v) const {
    VecX enc(enc_.config().output_dim());
    enc_.encode(u, v, enc.data());
    VecX out = mlp_.forward(enc);
    return {out[0], out[1]};
}

Vec3 CouplingBlock::forward(const Vec3& p, CouplingBlockCache* cache) const {
    auto src = permutation();
    bool u_in, v_in;
    const double u = clamp01(p[src[0]], &u_in);
    const double v = clamp01(p[src[1]], &v_in);
    const double w = p[src[2]];

    VecX enc(enc_.config().output_dim());
    enc_.encode(u, v, enc.data());
    Mlp::Cache mlp_cache;
    VecX st = mlp_.forward(enc, cache ? &mlp_cache : nullptr);
    const double s_raw = st[0];
    const double s = std::clamp(s_raw, -kScaleClamp, kScaleClamp);
    const double t = st[1];
    const double exp_s = std::exp(s);

    Vec3 out = p;
    out[src[2]] = w * exp_s + t;
    if (cache) {
        cache->u = u;
        cache->v = v;
        cache->u_interior = u_in;
        cache->v_interior = v_in;
        cache->w = w;
        cache->s_raw = s_raw;
        cache->s = s;
        cache->t = t;
        cache->exp_s = exp_s;
        cache->mlp = std::move(mlp_cache);
    }
    return out;
}

Vec3 CouplingBlock::inverse(const Vec3& p) const {
    auto src = permutation();
    const double u = clamp01(p[src[0]]);
    const double v = clamp01(p[src[1]]);
    Vec2 st = conditioner(u, v);
    const double s = std::clamp(st[0], -kScaleClamp, kScaleClamp);
    Vec3 out = p;
    out[src[2]] = (p[src[2]] - st[1]) * std::exp(-s);
    return out;
}

Mat3 CouplingBlock::jacobian(const Vec3& p) const {
    auto src = permutation();
    bool u_in, v_in;
    const double u = clamp01(p[src[0]], &u_in);
    const double v = clamp01(p[src[1]], &v_in);
    const double w = p[src[2]];

    const int dim = enc_.config().output_dim();
    VecX enc(dim), enc_du(dim), enc_dv(dim);
    enc_.encode_with_jacobian(u, v, enc.data(), enc_du.data(), enc_dv.data());
    Mlp::Cache cache;
    VecX st = mlp_.forward(enc, &cache);
    MatX j_mlp = mlp_.input_jacobian(cache);  // 2 x dim
    const double s_raw = st[0];
    const double s = std::clamp(s_raw, -kScaleClamp, kScaleClamp);
    const double exp_s = std::exp(s);
    const double s_gate = (s_raw > -kScaleClamp && s_raw < kScaleClamp) ? 1.0 : 0.0;

    Vec2 ds(j_mlp.row(0).dot(enc_du), j_mlp.row(0).dot(enc_dv));
    Vec2 dt(j_mlp.row(1).dot(enc_du), j_mlp.row(1).dot(enc_dv));
    ds *= s_gate;
    if (!u_in) { ds[0] = 0; dt[0] = 0; }
    if (!v_in) { ds[1] = 0; dt[1] = 0; }

    Mat3 j = Mat3::Identity();
    j(src[2], src[0]) = w * exp_s * ds[0] + dt[0];
    j(src[2], src[1]) = w * exp_s * ds[1] + dt[1];
    j(src[2], src[2]) = exp_s;
    return j;
}

void CouplingBlock::backward(const CouplingBlockCache& cache, const Vec3& d_out, Vec3& d_in,
                             CouplingBlockGrad& grad) const {
    auto src = permutation();
    d_in = d_out;
    const double d_w_out = d_out[src[2]];
    // w' = w * exp(s) + t
    d_in[src[2]] = d_w_out * cache.exp_s;
    const double s_gate =
        (cache.s_raw > -kScaleClamp && cache.s_raw < kScaleClamp) ? 1.0 : 0.0;
    VecX d_st(2);
    d_st[0] = d_w_out * cache.w * cache.exp_s * s_gate;
    d_st[1] = d_w_out;
    VecX d_enc;
    mlp_.backward(cache.mlp, d_st, grad.mlp, &d_enc);
    enc_.accumulate_table_grad(cache.u, cache.v, d_enc.data(), grad.table);

    // conditioner inputs also receive gradient (they are coordinates)
    const int dim = enc_.config().output_dim();
    VecX enc(dim), enc_du(dim), enc_dv(dim);
    enc_.encode_with_jacobian(cache.u, cache.v, enc.data(), enc_du.data(), enc_dv.data());
    if (cache.u_interior) d_in[src[0]] += d_enc.dot(enc_du);
    if (cache.v_interior) d_in[src[1]] += d_enc.dot(enc_dv);
}

void MapGrad::setZero(const OrientationPreservingMap& map) {
    blocks.resize(map.blocks().size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        blocks[b].mlp.setZero(map.blocks()[b].mlp());
        blocks[b].table.clear();
    }
}

OrientationPreservingMap::OrientationPreservingMap(const Aabb& domain_box, const MapConfig& cfg,
                                                   Rng& rng)
    : domain_box_(domain_box), cfg_(cfg) {
    if (domain_box_.extent().minCoeff() <= 0.0)
        throw std::invalid_argument("map domain box is degenerate");
    blocks_.reserve(cfg.num_blocks);
    for (int b = 0; b < cfg.num_blocks; ++b)
        blocks_.emplace_back(b % 3, cfg.encoding, cfg.hidden_dim, rng);
}

Vec3 OrientationPreservingMap::forward(const Vec3& p) const {
    Vec3 n = normalize(p);
    for (const auto& b : blocks_) n = b.forward(n);
    return denormalize(n);
}

Vec3 OrientationPreservingMap::inverse(const Vec3& p) const {
    Vec3 n = normalize(p);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) n = it->inverse(n);
    return denormalize(n);
}

Mat3 OrientationPreservingMap::jacobian(const Vec3& p) const {
    Vec3 n = normalize(p);
    Mat3 j = Mat3::Identity();
    for (const auto& b : blocks_) {
        j = b.jacobian(n) * j;
        n = b.forward(n);
    }
    Vec3 ext = domain_box_.extent();
    return ext.asDiagonal() * j * ext.cwiseInverse().asDiagonal();
}

double OrientationPreservingMap::log_det_jacobian(const Vec3& p) const {
    Vec3 n = normalize(p);
    double log_det = 0.0;
    for (const auto& b : blocks_) {
        CouplingBlockCache c;
        n = b.forward(n, &c);
        log_det += c.s;
    }
    return log_det;
}

std::vector<Vec3> OrientationPreservingMap::map_points(std::span<const Vec3> points) const {
    const std::size_t n = points.size();
    std::vector<Vec3> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = normalize(points[i]);
    for (const auto& block : blocks_) {
        auto src = block.permutation();
        const int dim = block.encoding().config().output_dim();
        MatX enc(dim, n);
        for (std::size_t i = 0; i < n; ++i) {
            double u = clamp01(out[i][src[0]]);
            double v = clamp01(out[i][src[1]]);
            block.encoding().encode(u, v, enc.col(i).data());
        }
        MatX st = block.mlp().forward_batch(enc);
        for (std::size_t i = 0; i < n; ++i) {
            double s = std::clamp(st(0, i), -CouplingBlock::kScaleClamp,
                                  CouplingBlock::kScaleClamp);
            out[i][src[2]] = out[i][src[2]] * std::exp(s) + st(1, i);
        }
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = denormalize(out[i]);
    return out;
}

std::vector<double> OrientationPreservingMap::log_det_jacobians(
    std::span<const Vec3> points) const {
    const std::size_t n = points.size();
    std::vector<Vec3> cur(n);
    std::vector<double> log_det(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) cur[i] = normalize(points[i]);
    for (const auto& block : blocks_) {
        auto src = block.permutation();
        const int dim = block.encoding().config().output_dim();
        MatX enc(dim, n);
        for (std::size_t i = 0; i < n; ++i) {
            double u = clamp01(cur[i][src[0]]);
            double v = clamp01(cur[i][src[1]]);
            block.encoding().encode(u, v, enc.col(i).data());
        }
        MatX st = block.mlp().forward_batch(enc);
        for (std::size_t i = 0; i < n; ++i) {
            double s = std::clamp(st(0, i), -CouplingBlock::kScaleClamp,
                                  CouplingBlock::kScaleClamp);
            log_det[i] += s;
            cur[i][src[2]] = cur[i][src[2]] * std::exp(s) + st(1, i);
        }
    }
    return log_det;
}

std::vector<Vec3> OrientationPreservingMap::map_vertices(std::span<const Vec3> base_positions,
                                                         int* clamped_count) const {
    if (clamped_count) {
        *clamped_count = 0;
        for (const Vec3& p : base_positions)
            if (!domain_box_.contains(p)) ++(*clamped_count);
    }
    return map_points(base_positions);
}

Vec3 OrientationPreservingMap::forward_with_cache(const Vec3& p, VertexCache& cache) const {
    cache.blocks.resize(blocks_.size());
    Vec3 n = normalize(p);
    for (std::size_t b = 0; b < blocks_.size(); ++b) n = blocks_[b].forward(n, &cache.blocks[b]);
    return denormalize(n);
}

void OrientationPreservingMap::backward(const VertexCache& cache, const Vec3& d_mapped,
                                        MapGrad& grad) const {
    Vec3 d = d_mapped.cwiseProduct(domain_box_.extent());  // through denormalize
    for (std::size_t b = blocks_.size(); b-- > 0;) {
        Vec3 d_in;
        blocks_[b].backward(cache.blocks[b], d, d_in, grad.blocks[b]);
        d = d_in;
    }
}

std::size_t OrientationPreservingMap::param_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.encoding().config().param_count() + b.mlp().param_count();
    return n;
}

}  // namespace stf
