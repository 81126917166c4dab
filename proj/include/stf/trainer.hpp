#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stf/adam.hpp"
#include "stf/camera.hpp"
#include "stf/hierarchy.hpp"
#include "stf/homeo.hpp"
#include "stf/image.hpp"
#include "stf/losses.hpp"
#include "stf/rng.hpp"
#include "stf/splat.hpp"
#include "stf/tetmesh.hpp"

namespace stf {

enum class ConstraintMode : std::uint8_t {
    kNone = 0,            // vertices optimized directly, no constraint
    kSvLoss = 1,          // + signed-volume sparsity penalty
    kHomeo = 2,           // vertices move only through the map
    kHomeoQuality = 3,    // map + quality hinge
    kFrozenVertices = 4,  // only rendering attributes train
};

const char* constraint_mode_name(ConstraintMode m);
ConstraintMode constraint_mode_from_name(const std::string& name);

struct LossWeights {
    double l1 = 0.8;       // lambda_1
    double ssim = 0.2;     // lambda_2
    double mask = 0.5;     // lambda_3
    double quality = 10.0; // lambda_4
    double sv = 100.0;     // signed-volume penalty weight (sv_loss mode)
    double quality_hinge = 0.8;  // r
};

struct LearningRates {
    double map = 1e-3;
    double sh = 2.5e-3;
    double weights = 5e-3;
    double opacity = 5e-2;
    double rotation = 1e-3;
    double controls = 1e-3;
    double vertices = 1.6e-3;
};

struct TrainConfig {
    int iterations = 30000;
    double split_grad_threshold = 2e-4;    // delta
    double mask_opacity_threshold = 0.05;  // epsilon
    int max_depth = 5;
    int control_interval = 100;
    ConstraintMode mode = ConstraintMode::kHomeoQuality;
    LossWeights weights;
    LearningRates lr;
    int sh_degree = 3;
    std::uint64_t seed = 0;
    int threads = 1;
    MapConfig map;
};

struct SceneView {
    Camera cam;
    ImageF rgb;   // H x W x 3
    ImageF mask;  // H x W x 1
};

struct SceneDataset {
    std::vector<SceneView> views;
    Vec3 background = Vec3::Zero();
};

struct MlpAdam {
    AdamState w1, b1, w2, b2, w3, b3;
};

/// Everything a training run owns: geometry, map, hierarchy, attributes,
/// optimizer moments and adaptive-control statistics.
struct TrainState {
    TetMesh base;                     // rest positions + fixed topology
    std::vector<Vec3> vertex_params;  // optimized positions (none / sv_loss)
    OrientationPreservingMap map;
    SubdivisionForest forest;
    std::vector<double> sh;  // [slot][coeff][channel]
    TrainConfig cfg;
    std::uint64_t iteration = 0;
    Rng rng{0};

    AdamState adam_sh, adam_weights, adam_opacity, adam_rotation, adam_controls, adam_vertices;
    std::vector<AdamState> adam_map_tables;  // one per block
    std::vector<MlpAdam> adam_map_mlps;      // one per block

    std::vector<double> split_grad_accum;  // per node
    std::vector<int> split_grad_count;     // per node

    int sh_coeffs() const { return sh_coeff_count(cfg.sh_degree); }
    std::size_t sh_stride() const { return static_cast<std::size_t>(sh_coeffs()) * 3; }
    const double* sh_slot(int slot) const { return sh.data() + slot * sh_stride(); }
    double* sh_slot(int slot) { return sh.data() + slot * sh_stride(); }

    /// Current base-vertex positions under the active constraint mode.
    std::vector<Vec3> effective_base_positions() const;
};

/// Fresh state over a mesh: identity map over the padded bounding box, no
/// splits, neutral attributes (weights 1, opacity 0.1, identity rotation,
/// gray SH).
TrainState make_initial_state(TetMesh mesh, const TrainConfig& cfg);

/// Assembles the active (unmasked leaf) gaussians for one camera.
struct AssembledScene {
    std::vector<int> leaf_nodes;  // per gaussian
    std::vector<SubdivisionForest::ResolvedTet> leaf_tets;
    std::vector<Gaussian3D> gaussians;
};
AssembledScene assemble_gaussians(const TrainState& state, std::span<const Vec3> positions,
                                  const Camera& cam);

RenderOutput render_state(const TrainState& state, const Camera& cam, const Vec3& background,
                          int threads = 1);
/// Renders a collapsed LOD level instead of the leaves.
RenderOutput render_state_lod(const TrainState& state, int level, const Camera& cam,
                              const Vec3& background, int threads = 1);

struct StepMetrics {
    double l1 = 0, ssim_loss = 0, mask = 0, quality = 0, sv = 0, total = 0, psnr = 0;
    int leaves = 0, masked_leaves = 0, inverted = 0;
};

/// Full backward pass of the composite loss for one view, before any
/// parameter update. d_positions is w.r.t. the effective base positions;
/// map_grad is populated in the homeo modes.
struct StepGradients {
    StepMetrics metrics;
    std::vector<Vec3> d_positions;
    std::vector<double> d_sh;
    std::vector<double> d_weights;  // node-major, 4 per node
    std::vector<double> d_opacity;  // per node
    std::vector<double> d_quat;     // node-major, 4 per node
    std::vector<double> d_ctrl;     // node-major, 4 per node
    MapGrad map_grad;
    std::vector<double> screen_grad;   // per node, |dL/d mean2d| accumulator
    std::vector<int> screen_visible;   // per node, 1 when rendered this view
};

StepGradients compute_step_gradients(const TrainState& state, const SceneDataset& dataset,
                                     int view_index);

/// Composite loss value only (forward pass); optionally returns the render
/// cache so callers can compare the discrete compositing structure between
/// evaluations.
double compute_loss(const TrainState& state, const SceneDataset& dataset, int view_index,
                    RenderCache* cache = nullptr);

/// One optimization step on one view (random from the dataset when
/// view_index < 0). Throws on non-finite loss.
StepMetrics train_step(TrainState& state, const SceneDataset& dataset, int view_index = -1);

struct ControlReport {
    int splits = 0;
    int newly_masked = 0;
};

/// Adaptive control: splits leaves whose mean screen-space positional
/// gradient exceeded the threshold, masks low-opacity leaves, resets the
/// gradient window. In homeo modes also verifies the mapped base mesh is
/// inversion free.
ControlReport adaptive_control(TrainState& state);

/// Extends the SH storage for a split (blended interior slot); used by
/// adaptive_control and by tests that split manually.
int split_leaf_with_attributes(TrainState& state, int node_id);

std::string metrics_json(const TrainState& state, const StepMetrics& m);

}  // namespace stf
