#include "stf/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace stf {

const char* constraint_mode_name(ConstraintMode m) {
    switch (m) {
        case ConstraintMode::kNone: return "none";
        case ConstraintMode::kSvLoss: return "sv_loss";
        case ConstraintMode::kHomeo: return "homeo";
        case ConstraintMode::kHomeoQuality: return "homeo_quality";
        case ConstraintMode::kFrozenVertices: return "frozen_vertices";
    }
    return "unknown";
}

ConstraintMode constraint_mode_from_name(const std::string& name) {
    if (name == "none") return ConstraintMode::kNone;
    if (name == "sv_loss") return ConstraintMode::kSvLoss;
    if (name == "homeo") return ConstraintMode::kHomeo;
    if (name == "homeo_quality" || name == "homeo+quality")
        return ConstraintMode::kHomeoQuality;
    if (name == "frozen_vertices") return ConstraintMode::kFrozenVertices;
    throw std::invalid_argument("unknown constraint mode: " + name);
}

std::vector<Vec3> TrainState::effective_base_positions() const {
    switch (cfg.mode) {
        case ConstraintMode::kNone:
        case ConstraintMode::kSvLoss:
            return vertex_params;
        case ConstraintMode::kHomeo:
        case ConstraintMode::kHomeoQuality:
            return map.map_points(base.vertices());
        case ConstraintMode::kFrozenVertices:
            return base.vertices();
    }
    return base.vertices();
}

TrainState make_initial_state(TetMesh mesh, const TrainConfig& cfg) {
    TrainState st;
    st.cfg = cfg;
    st.rng = Rng(cfg.seed);
    st.vertex_params = mesh.vertices();
    Aabb box = mesh.bounding_box().padded(0.1);
    st.map = OrientationPreservingMap(box, cfg.map, st.rng);
    st.forest = SubdivisionForest(mesh.tets(), static_cast<int>(mesh.vertex_count()),
                                  cfg.max_depth);
    st.base = std::move(mesh);
    st.sh.assign(st.forest.attribute_slot_count() * st.sh_stride(), 0.0);
    const double opacity_raw = inverse_sigmoid(0.1);
    for (int n = 0; n < st.forest.node_count(); ++n) st.forest.node(n).opacity_raw = opacity_raw;
    st.adam_map_tables.resize(st.map.blocks().size());
    st.adam_map_mlps.resize(st.map.blocks().size());
    st.split_grad_accum.assign(st.forest.node_count(), 0.0);
    st.split_grad_count.assign(st.forest.node_count(), 0);
    return st;
}

AssembledScene assemble_gaussians(const TrainState& state, std::span<const Vec3> positions,
                                  const Camera& cam) {
    AssembledScene out;
    out.leaf_tets = state.forest.resolve_leaf_tets(positions);
    out.gaussians.reserve(out.leaf_tets.size());
    out.leaf_nodes.reserve(out.leaf_tets.size());
    std::vector<SubdivisionForest::ResolvedTet> kept;
    kept.reserve(out.leaf_tets.size());
    for (const auto& leaf : out.leaf_tets) {
        const TetNode& node = state.forest.node(leaf.node);
        if (node.masked) continue;
        LeafInputs in;
        in.corners = leaf.corners;
        for (int i = 0; i < 4; ++i) {
            in.weight_raw[i] = node.weight_raw[i];
            in.sh[i] = state.sh_slot(node.sh_idx[i]);
        }
        in.l_max = state.cfg.sh_degree;
        in.opacity_raw = node.opacity_raw;
        in.quat_raw = node.quat_raw;
        out.gaussians.push_back(tet_to_gaussian(in, cam.origin));
        out.leaf_nodes.push_back(leaf.node);
        kept.push_back(leaf);
    }
    out.leaf_tets = std::move(kept);
    return out;
}

RenderOutput render_state(const TrainState& state, const Camera& cam, const Vec3& background,
                          int threads) {
    auto positions = state.effective_base_positions();
    auto scene = assemble_gaussians(state, positions, cam);
    return render(scene.gaussians, cam, background, nullptr, threads);
}

RenderOutput render_state_lod(const TrainState& state, int level, const Camera& cam,
                              const Vec3& background, int threads) {
    auto positions = state.effective_base_positions();
    auto collapsed = state.forest.collapse_to_level(level, positions);
    std::vector<Gaussian3D> gaussians;
    gaussians.reserve(collapsed.size());
    for (const auto& c : collapsed) {
        const TetNode& node = state.forest.node(c.node);
        LeafInputs in;
        in.corners = c.corners;
        for (int i = 0; i < 4; ++i) {
            in.weight_raw[i] = node.weight_raw[i];
            in.sh[i] = state.sh_slot(node.sh_idx[i]);
        }
        in.l_max = state.cfg.sh_degree;
        in.opacity_raw = c.opacity_raw;
        in.quat_raw = c.quat;
        gaussians.push_back(tet_to_gaussian(in, cam.origin));
    }
    return render(gaussians, cam, background, nullptr, threads);
}

int split_leaf_with_attributes(TrainState& state, int node_id) {
    const TetNode& node = state.forest.node(node_id);
    const Vec4 bary = constrained_barycentric(node.ctrl_raw);
    std::array<int, 4> parent_slots = node.sh_idx;
    int slot = state.forest.subdivide(node_id);
    if (slot < 0) return -1;
    const std::size_t stride = state.sh_stride();
    state.sh.resize(state.sh.size() + stride, 0.0);
    double* dst = state.sh_slot(slot);
    for (int i = 0; i < 4; ++i) {
        const double* src = state.sh_slot(parent_slots[i]);
        for (std::size_t k = 0; k < stride; ++k) dst[k] += bary[i] * src[k];
    }
    state.split_grad_accum.resize(state.forest.node_count(), 0.0);
    state.split_grad_count.resize(state.forest.node_count(), 0);
    return slot;
}

namespace {

/// Gather/scatter adapters so node-attached parameters can run through the
/// dense Adam kernel.
struct NodeParamView {
    std::vector<double> values;
    std::vector<double> grads;
};

void adam_update_nodes(TrainState& st, const std::vector<double>& grads_flat,
                       AdamState& adam_state, double lr, int per_node,
                       double TetNode::* scalar_member, Vec4 TetNode::* vec_member) {
    const int n = st.forest.node_count();
    std::vector<double> params(static_cast<std::size_t>(n) * per_node);
    for (int i = 0; i < n; ++i) {
        if (per_node == 1) {
            params[i] = st.forest.node(i).*scalar_member;
        } else {
            const Vec4& v = st.forest.node(i).*vec_member;
            for (int k = 0; k < 4; ++k) params[i * 4 + k] = v[k];
        }
    }
    adam_step_dense(params, grads_flat, adam_state, AdamHyperparams{}, lr);
    for (int i = 0; i < n; ++i) {
        if (per_node == 1) {
            st.forest.node(i).*scalar_member = params[i];
        } else {
            Vec4& v = st.forest.node(i).*vec_member;
            for (int k = 0; k < 4; ++k) v[k] = params[i * 4 + k];
        }
    }
}

void adam_update_mlp(Mlp& mlp, const Mlp::Grad& g, MlpAdam& state, double lr) {
    const AdamHyperparams hp{};
    auto run = [&](auto& tensor, const auto& grad, AdamState& s) {
        adam_step_dense(std::span<double>(tensor.data(), tensor.size()),
                        std::span<const double>(grad.data(), grad.size()), s, hp, lr);
    };
    run(mlp.w1(), g.w1, state.w1);
    run(mlp.b1(), g.b1, state.b1);
    run(mlp.w2(), g.w2, state.w2);
    run(mlp.b2(), g.b2, state.b2);
    run(mlp.w3(), g.w3, state.w3);
    run(mlp.b3(), g.b3, state.b3);
}

bool uses_map(ConstraintMode m) {
    return m == ConstraintMode::kHomeo || m == ConstraintMode::kHomeoQuality;
}

}  // namespace

namespace {

std::vector<Vec3> positions_with_caches(
    const TrainState& st, std::vector<OrientationPreservingMap::VertexCache>* map_caches) {
    if (uses_map(st.cfg.mode)) {
        std::vector<Vec3> positions(st.base.vertex_count());
        if (map_caches) {
            map_caches->resize(st.base.vertex_count());
            for (std::size_t i = 0; i < st.base.vertex_count(); ++i)
                positions[i] = st.map.forward_with_cache(st.base.vertices()[i], (*map_caches)[i]);
        } else {
            positions = st.map.map_points(st.base.vertices());
        }
        return positions;
    }
    if (st.cfg.mode == ConstraintMode::kFrozenVertices) return st.base.vertices();
    return st.vertex_params;
}

/// Composite image loss terms + gradient images for one view.
StepMetrics image_losses(const TrainState& st, const SceneView& view, const RenderOutput& out,
                         ImageF* d_rgb, ImageF* d_alpha) {
    const TrainConfig& cfg = st.cfg;
    StepMetrics m;
    ImageF l1_grad, ssim_grad;
    if (d_rgb) {
        l1_grad = ImageF(view.cam.width, view.cam.height, 3, 0.0);
        ssim_grad = ImageF(view.cam.width, view.cam.height, 3, 0.0);
    }
    m.l1 = loss_l1(out.rgb, view.rgb, d_rgb ? &l1_grad : nullptr);
    m.ssim_loss = loss_ssim(out.rgb, view.rgb, d_rgb ? &ssim_grad : nullptr);
    m.mask = loss_mask(out.alpha, view.mask, d_alpha);
    if (d_rgb)
        for (std::size_t i = 0; i < d_rgb->data.size(); ++i)
            d_rgb->data[i] = cfg.weights.l1 * l1_grad.data[i] + cfg.weights.ssim * ssim_grad.data[i];
    if (d_alpha)
        for (double& v : d_alpha->data) v *= cfg.weights.mask;
    m.psnr = psnr(out.rgb, view.rgb);
    return m;
}

/// Geometric loss terms on the base tets; accumulates weighted gradients.
void geometric_losses(const TrainState& st, std::span<const Vec3> positions, StepMetrics& m,
                      std::vector<Vec3>* d_positions) {
    const TrainConfig& cfg = st.cfg;
    if (cfg.mode == ConstraintMode::kHomeoQuality && cfg.weights.quality > 0.0) {
        std::vector<Vec3> g(positions.size(), Vec3::Zero());
        m.quality = loss_quality(positions, st.base.tets(), cfg.weights.quality_hinge,
                                 d_positions ? std::span<Vec3>(g) : std::span<Vec3>());
        if (d_positions)
            for (std::size_t i = 0; i < g.size(); ++i)
                (*d_positions)[i] += cfg.weights.quality * g[i];
    }
    if (cfg.mode == ConstraintMode::kSvLoss && cfg.weights.sv > 0.0) {
        std::vector<Vec3> g(positions.size(), Vec3::Zero());
        m.sv = loss_sv(positions, st.base.tets(),
                       d_positions ? std::span<Vec3>(g) : std::span<Vec3>());
        if (d_positions)
            for (std::size_t i = 0; i < g.size(); ++i) (*d_positions)[i] += cfg.weights.sv * g[i];
    }
    m.total = cfg.weights.l1 * m.l1 + cfg.weights.ssim * m.ssim_loss + cfg.weights.mask * m.mask +
              cfg.weights.quality * m.quality + cfg.weights.sv * m.sv;
}

}  // namespace

double compute_loss(const TrainState& st, const SceneDataset& dataset, int view_index,
                    RenderCache* cache) {
    const SceneView& view = dataset.views.at(view_index);
    auto positions = positions_with_caches(st, nullptr);
    auto scene = assemble_gaussians(st, positions, view.cam);
    RenderOutput out =
        render(scene.gaussians, view.cam, dataset.background, cache, std::max(1, st.cfg.threads));
    StepMetrics m = image_losses(st, view, out, nullptr, nullptr);
    geometric_losses(st, positions, m, nullptr);
    return m.total;
}

StepGradients compute_step_gradients(const TrainState& st, const SceneDataset& dataset,
                                     int view_index) {
    const SceneView& view = dataset.views.at(view_index);
    const TrainConfig& cfg = st.cfg;
    const int threads = std::max(1, cfg.threads);

    std::vector<OrientationPreservingMap::VertexCache> map_caches;
    auto positions = positions_with_caches(st, uses_map(cfg.mode) ? &map_caches : nullptr);

    auto scene = assemble_gaussians(st, positions, view.cam);
    RenderCache rcache;
    RenderOutput out = render(scene.gaussians, view.cam, dataset.background, &rcache, threads);

    StepGradients sg;
    ImageF d_rgb(view.cam.width, view.cam.height, 3, 0.0);
    ImageF d_alpha(view.cam.width, view.cam.height, 1, 0.0);
    sg.metrics = image_losses(st, view, out, &d_rgb, &d_alpha);

    sg.d_positions.assign(positions.size(), Vec3::Zero());
    geometric_losses(st, positions, sg.metrics, &sg.d_positions);
    if (!std::isfinite(sg.metrics.total))
        throw std::runtime_error("train_step: non-finite loss at iteration " +
                                 std::to_string(st.iteration) +
                                 " (l1=" + std::to_string(sg.metrics.l1) +
                                 " ssim=" + std::to_string(sg.metrics.ssim_loss) + ")");

    // ---- backward: image -> gaussians ----
    auto g_grads = render_backward(scene.gaussians, view.cam, dataset.background, rcache, d_rgb,
                                   d_alpha, threads);

    // ---- backward: gaussians -> leaf corners + attributes ----
    const int n_nodes = st.forest.node_count();
    sg.d_weights.assign(static_cast<std::size_t>(n_nodes) * 4, 0.0);
    sg.d_opacity.assign(n_nodes, 0.0);
    sg.d_quat.assign(static_cast<std::size_t>(n_nodes) * 4, 0.0);
    sg.d_ctrl.assign(static_cast<std::size_t>(n_nodes) * 4, 0.0);
    sg.d_sh.assign(st.sh.size(), 0.0);
    sg.screen_grad.assign(n_nodes, 0.0);
    sg.screen_visible.assign(n_nodes, 0);
    std::vector<SubdivisionForest::ResolvedTet> corner_adjoints;
    corner_adjoints.reserve(scene.gaussians.size());

    for (std::size_t gi = 0; gi < scene.gaussians.size(); ++gi) {
        const int node_id = scene.leaf_nodes[gi];
        const TetNode& node = st.forest.node(node_id);
        const auto& gg = g_grads[gi];
        if (gg.touched) {
            sg.screen_grad[node_id] += gg.d_mean2d.norm();
            sg.screen_visible[node_id] = 1;
        }

        LeafInputs in;
        in.corners = scene.leaf_tets[gi].corners;
        for (int i = 0; i < 4; ++i) {
            in.weight_raw[i] = node.weight_raw[i];
            in.sh[i] = st.sh_slot(node.sh_idx[i]);
        }
        in.l_max = cfg.sh_degree;
        in.opacity_raw = node.opacity_raw;
        in.quat_raw = node.quat_raw;

        GaussianAdjoint adj;
        adj.d_mean = gg.d_mean;
        adj.d_cov = gg.d_cov;
        adj.d_color = gg.d_color;
        adj.d_opacity = gg.d_opacity;

        LeafGrads lg;
        for (int i = 0; i < 4; ++i)
            lg.d_sh[i] = sg.d_sh.data() + node.sh_idx[i] * st.sh_stride();
        tet_to_gaussian_backward(in, view.cam.origin, adj, lg);

        for (int i = 0; i < 4; ++i) {
            sg.d_weights[static_cast<std::size_t>(node_id) * 4 + i] += lg.d_weight_raw[i];
            sg.d_quat[static_cast<std::size_t>(node_id) * 4 + i] += lg.d_quat_raw[i];
        }
        sg.d_opacity[node_id] += lg.d_opacity_raw;
        corner_adjoints.push_back({scene.leaf_tets[gi].node, lg.d_corners});
    }

    // ---- backward: leaf corners -> base positions + controls ----
    std::vector<Vec4> d_ctrl(n_nodes, Vec4::Zero());
    st.forest.resolve_backward(positions, corner_adjoints, sg.d_positions, d_ctrl);
    for (int i = 0; i < n_nodes; ++i)
        for (int k = 0; k < 4; ++k)
            sg.d_ctrl[static_cast<std::size_t>(i) * 4 + k] = d_ctrl[i][k];

    // ---- backward: base positions -> map parameters ----
    if (uses_map(cfg.mode)) {
        sg.map_grad.setZero(st.map);
        for (std::size_t i = 0; i < st.base.vertex_count(); ++i)
            st.map.backward(map_caches[i], sg.d_positions[i], sg.map_grad);
    }

    sg.metrics.leaves = static_cast<int>(scene.gaussians.size());
    sg.metrics.masked_leaves = st.forest.leaf_count() - sg.metrics.leaves;
    sg.metrics.inverted = count_inverted(positions, st.base.tets());
    return sg;
}

StepMetrics train_step(TrainState& st, const SceneDataset& dataset, int view_index) {
    if (dataset.views.empty()) throw std::invalid_argument("train_step: empty dataset");
    if (view_index < 0)
        view_index = static_cast<int>(st.rng.uniform_int(dataset.views.size()));
    const TrainConfig& cfg = st.cfg;

    StepGradients sg = compute_step_gradients(st, dataset, view_index);

    // ---- parameter updates ----
    const AdamHyperparams hp{};
    if (uses_map(cfg.mode)) {
        for (std::size_t b = 0; b < st.map.blocks().size(); ++b) {
            auto& table = st.map.blocks()[b].encoding().table();
            adam_step_sparse(table, sg.map_grad.blocks[b].table, st.adam_map_tables[b], hp,
                             cfg.lr.map);
            adam_update_mlp(st.map.blocks()[b].mlp(), sg.map_grad.blocks[b].mlp,
                            st.adam_map_mlps[b], cfg.lr.map);
        }
    } else if (cfg.mode != ConstraintMode::kFrozenVertices) {
        std::vector<double> flat_grads(st.vertex_params.size() * 3);
        std::vector<double> flat_params(st.vertex_params.size() * 3);
        for (std::size_t i = 0; i < st.vertex_params.size(); ++i)
            for (int d = 0; d < 3; ++d) {
                flat_params[i * 3 + d] = st.vertex_params[i][d];
                flat_grads[i * 3 + d] = sg.d_positions[i][d];
            }
        adam_step_dense(flat_params, flat_grads, st.adam_vertices, hp, cfg.lr.vertices);
        for (std::size_t i = 0; i < st.vertex_params.size(); ++i)
            for (int d = 0; d < 3; ++d) st.vertex_params[i][d] = flat_params[i * 3 + d];
    }

    adam_step_dense(st.sh, sg.d_sh, st.adam_sh, hp, cfg.lr.sh);
    adam_update_nodes(st, sg.d_weights, st.adam_weights, cfg.lr.weights, 4, nullptr,
                      &TetNode::weight_raw);
    adam_update_nodes(st, sg.d_opacity, st.adam_opacity, cfg.lr.opacity, 1,
                      &TetNode::opacity_raw, nullptr);
    adam_update_nodes(st, sg.d_quat, st.adam_rotation, cfg.lr.rotation, 4, nullptr,
                      &TetNode::quat_raw);
    adam_update_nodes(st, sg.d_ctrl, st.adam_controls, cfg.lr.controls, 4, nullptr,
                      &TetNode::ctrl_raw);

    // ---- adaptive-control statistics ----
    st.split_grad_accum.resize(st.forest.node_count(), 0.0);
    st.split_grad_count.resize(st.forest.node_count(), 0);
    for (int n = 0; n < st.forest.node_count(); ++n) {
        if (sg.screen_visible[n]) {
            st.split_grad_accum[n] += sg.screen_grad[n];
            st.split_grad_count[n] += 1;
        }
    }

    ++st.iteration;
    return sg.metrics;
}

ControlReport adaptive_control(TrainState& st) {
    ControlReport report;
    if (uses_map(st.cfg.mode)) {
        auto positions = st.effective_base_positions();
        int inverted = count_inverted(positions, st.base.tets());
        if (inverted != 0)
            throw std::logic_error("orientation-preserving map produced " +
                                   std::to_string(inverted) + " inverted base tets");
    }
    auto leaves = st.forest.leaves();
    for (int node_id : leaves) {
        TetNode& node = st.forest.node(node_id);
        if (node.masked) continue;
        if (sigmoid(node.opacity_raw) < st.cfg.mask_opacity_threshold) {
            node.masked = true;
            ++report.newly_masked;
            continue;
        }
        if (node.depth >= st.cfg.max_depth) continue;
        const int count = st.split_grad_count[node_id];
        if (count == 0) continue;
        const double mean_grad = st.split_grad_accum[node_id] / count;
        if (mean_grad > st.cfg.split_grad_threshold) {
            if (split_leaf_with_attributes(st, node_id) >= 0) ++report.splits;
        }
    }
    std::fill(st.split_grad_accum.begin(), st.split_grad_accum.end(), 0.0);
    std::fill(st.split_grad_count.begin(), st.split_grad_count.end(), 0);
    st.split_grad_accum.resize(st.forest.node_count(), 0.0);
    st.split_grad_count.resize(st.forest.node_count(), 0);
    return report;
}

std::string metrics_json(const TrainState& state, const StepMetrics& m) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "{\"iter\":%llu,\"l1\":%.8g,\"ssim\":%.8g,\"mask\":%.8g,\"quality\":%.8g,"
                  "\"sv\":%.8g,\"total\":%.8g,\"psnr\":%.4f,\"leaves\":%d,\"masked\":%d,"
                  "\"inverted\":%d}",
                  static_cast<unsigned long long>(state.iteration), m.l1, m.ssim_loss, m.mask,
                  m.quality, m.sv, m.total, m.psnr, m.leaves, m.masked_leaves, m.inverted);
    return buf;
}

}  // namespace stf
