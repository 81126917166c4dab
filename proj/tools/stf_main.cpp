// stf: tetrahedral-mesh gaussian scene tool.
//
// Subcommands cover the full pipeline: grid or file initialization,
// optimization, rendering/evaluation, LOD rendering, quality reports,
// PLY export, XPBD simulation and lattice deformation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "stf/checkpoint.hpp"
#include "stf/dynamics.hpp"
#include "stf/ply_io.hpp"
#include "stf/scene.hpp"
#include "stf/tetgen_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stf;

namespace {

std::uint64_t resolve_seed(std::uint64_t flag_seed) {
    if (const char* env = std::getenv("STFD_SEED")) return std::strtoull(env, nullptr, 10);
    return flag_seed;
}

void write_image(const std::string& path, const RenderOutput& out, bool with_alpha) {
    ImageU8 img{out.rgb.width, out.rgb.height, with_alpha ? 4 : 3, {}};
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            auto* px = &img.data[(static_cast<std::size_t>(y) * img.width + x) * img.channels];
            for (int c = 0; c < 3; ++c)
                px[c] = static_cast<std::uint8_t>(
                    std::lround(std::clamp(out.rgb.at(y, x, c), 0.0, 1.0) * 255.0));
            if (with_alpha)
                px[3] = static_cast<std::uint8_t>(
                    std::lround(std::clamp(out.alpha.at(y, x, 0), 0.0, 1.0) * 255.0));
        }
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".ppm") {
        ImageU8 rgb{img.width, img.height, 3, {}};
        rgb.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
        for (std::size_t p = 0; p < rgb.data.size() / 3; ++p)
            for (int c = 0; c < 3; ++c) rgb.data[p * 3 + c] = img.data[p * img.channels + c];
        write_ppm(path, rgb);
    } else {
        write_png(path, img);
    }
}

struct CameraArgs {
    std::string scene;
    int index = 0;
    double azimuth = 0.7;
    double elevation = 0.3;
    double radius_scale = 2.2;
    double fov = 0.7;
    int width = 512, height = 512;

    void attach(CLI::App* cmd) {
        cmd->add_option("--scene", scene, "scene directory providing cameras");
        cmd->add_option("--camera", index, "camera index within --scene");
        cmd->add_option("--azimuth", azimuth, "orbit azimuth (rad), used without --scene");
        cmd->add_option("--elevation", elevation, "orbit elevation (rad)");
        cmd->add_option("--radius-scale", radius_scale, "orbit radius as a bbox-diagonal multiple");
        cmd->add_option("--fov", fov, "horizontal field of view (rad)");
        cmd->add_option("--width", width, "image width");
        cmd->add_option("--height", height, "image height");
    }

    Camera resolve(const TrainState& st) const {
        if (!scene.empty()) {
            SceneDataset ds = load_scene(scene);
            if (index < 0 || index >= static_cast<int>(ds.views.size()))
                throw std::runtime_error("camera index out of range (scene has " +
                                         std::to_string(ds.views.size()) + " views)");
            return ds.views[index].cam;
        }
        Aabb box = st.base.bounding_box();
        return make_orbit_camera(box.center(), radius_scale * box.diagonal(), azimuth, elevation,
                                 fov, width, height);
    }
};

void attach_train_flags(CLI::App* cmd, TrainConfig& cfg, std::string& mode_name) {
    cmd->add_option("--iters", cfg.iterations, "training iterations");
    cmd->add_option("--mode", mode_name,
                    "constraint mode: none|sv_loss|homeo|homeo_quality|frozen_vertices");
    cmd->add_option("--split-threshold", cfg.split_grad_threshold,
                    "screen-gradient split threshold");
    cmd->add_option("--mask-threshold", cfg.mask_opacity_threshold, "opacity masking threshold");
    cmd->add_option("--max-depth", cfg.max_depth, "maximum subdivision depth");
    cmd->add_option("--control-interval", cfg.control_interval,
                    "iterations between adaptive-control passes");
    cmd->add_option("--sh-degree", cfg.sh_degree, "spherical harmonics degree (0-3)");
    cmd->add_option("--seed", cfg.seed, "RNG seed (STFD_SEED env overrides)");
    cmd->add_option("--lambda-l1", cfg.weights.l1, "L1 term weight");
    cmd->add_option("--lambda-ssim", cfg.weights.ssim, "SSIM term weight");
    cmd->add_option("--lambda-mask", cfg.weights.mask, "mask term weight");
    cmd->add_option("--lambda-quality", cfg.weights.quality, "quality term weight");
    cmd->add_option("--lambda-sv", cfg.weights.sv, "signed-volume term weight");
    cmd->add_option("--quality-hinge", cfg.weights.quality_hinge, "quality hinge r");
    cmd->add_option("--lr-map", cfg.lr.map, "map learning rate");
    cmd->add_option("--lr-sh", cfg.lr.sh, "SH learning rate");
    cmd->add_option("--lr-weights", cfg.lr.weights, "corner weight learning rate");
    cmd->add_option("--lr-opacity", cfg.lr.opacity, "opacity learning rate");
    cmd->add_option("--lr-rotation", cfg.lr.rotation, "rotation learning rate");
    cmd->add_option("--lr-controls", cfg.lr.controls, "control point learning rate");
    cmd->add_option("--lr-vertices", cfg.lr.vertices, "vertex learning rate (none/sv modes)");
    cmd->add_option("--hash-levels", cfg.map.encoding.levels, "hash encoding levels");
    cmd->add_option("--hash-table-log2", cfg.map.encoding.table_size_log2,
                    "log2 of hash table entries per level");
    cmd->add_option("--hash-max-res", cfg.map.encoding.max_resolution,
                    "hash encoding max resolution");
}

int run(int argc, char** argv) {
    CLI::App app{"structured tetrahedral gaussian scenes"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker threads for rendering")->capture_default_str();

    // ---- init-grid ----
    auto* init_grid = app.add_subcommand("init-grid", "checkpoint from a uniform grid");
    std::vector<double> bbox_vals = {0, 0, 0, 1, 1, 1};
    std::vector<int> res_vals = {4, 4, 4};
    std::string out_path;
    TrainConfig grid_cfg;
    std::string grid_mode = constraint_mode_name(grid_cfg.mode);
    init_grid->add_option("--bbox", bbox_vals, "bounding box: x0 y0 z0 x1 y1 z1")->expected(6);
    init_grid->add_option("--res", res_vals, "grid resolution per axis")->expected(3);
    init_grid->add_option("--out", out_path, "output checkpoint")->required();
    attach_train_flags(init_grid, grid_cfg, grid_mode);

    // ---- init-mesh ----
    auto* init_mesh = app.add_subcommand("init-mesh", "checkpoint from .node/.ele files");
    std::string node_path, ele_path;
    TrainConfig mesh_cfg;
    std::string mesh_mode = constraint_mode_name(mesh_cfg.mode);
    init_mesh->add_option("--node", node_path, "TetGen .node file")->required();
    init_mesh->add_option("--ele", ele_path, "TetGen .ele file")->required();
    init_mesh->add_option("--out", out_path, "output checkpoint")->required();
    attach_train_flags(init_mesh, mesh_cfg, mesh_mode);

    // ---- train ----
    auto* train = app.add_subcommand("train", "optimize a checkpoint against a scene");
    std::string scene_dir, ckpt_path, metrics_path, train_out;
    TrainConfig train_cfg;
    std::string train_mode;
    int ckpt_every = 0, log_every = 10;
    bool mask_from_bbox = false;
    train->add_option("--scene", scene_dir, "scene directory")->required();
    train->add_option("--ckpt", ckpt_path, "input checkpoint")->required();
    train->add_option("--out", train_out, "output checkpoint (default: overwrite input)");
    train->add_option("--metrics", metrics_path, "metrics JSONL path");
    train->add_option("--ckpt-every", ckpt_every, "checkpoint every N iterations (0 = end only)");
    train->add_option("--log-every", log_every, "emit metrics every N iterations");
    train->add_flag("--mask-bbox", mask_from_bbox,
                    "derive masks from the projected mesh bbox when PNGs lack alpha");
    attach_train_flags(train, train_cfg, train_mode);

    // ---- render ----
    auto* render_cmd = app.add_subcommand("render", "render a checkpoint");
    CameraArgs render_cam;
    std::string render_out;
    std::vector<double> bg_vals = {0, 0, 0};
    render_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    render_cmd->add_option("--out", render_out, "output PNG/PPM")->required();
    render_cmd->add_option("--background", bg_vals, "background RGB")->expected(3);
    render_cam.attach(render_cmd);

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM table against a scene");
    std::string eval_csv;
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    eval_cmd->add_option("--scene", scene_dir, "scene directory")->required();
    eval_cmd->add_option("--out", eval_csv, "output CSV (default stdout)");

    // ---- lod ----
    auto* lod_cmd = app.add_subcommand("lod", "render at a collapsed hierarchy level");
    CameraArgs lod_cam;
    int lod_level = 0;
    lod_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    lod_cmd->add_option("--level", lod_level, "hierarchy level (0 = roots)")->required();
    lod_cmd->add_option("--out", render_out, "output PNG/PPM")->required();
    lod_cmd->add_option("--background", bg_vals, "background RGB")->expected(3);
    lod_cam.attach(lod_cmd);

    // ---- quality ----
    auto* quality_cmd = app.add_subcommand("quality", "mesh quality report");
    std::string quality_csv;
    quality_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    quality_cmd->add_option("--out", quality_csv, "per-tet CSV output");

    // ---- export-ply ----
    auto* export_cmd = app.add_subcommand("export-ply", "3DGS-compatible PLY export");
    export_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    export_cmd->add_option("--out", out_path, "output PLY")->required();

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "XPBD or lattice-keyframe simulation");
    std::string sim_config, sim_out_dir;
    CameraArgs sim_cam;
    sim_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    sim_cmd->add_option("--sim", sim_config, "simulation config JSON")->required();
    sim_cmd->add_option("--out", sim_out_dir, "output directory")->required();
    sim_cmd->add_option("--background", bg_vals, "background RGB")->expected(3);
    sim_cam.attach(sim_cmd);

    // ---- deform ----
    auto* deform_cmd = app.add_subcommand("deform", "lattice deformation render");
    std::string lattice_config;
    CameraArgs deform_cam;
    deform_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    deform_cmd->add_option("--lattice", lattice_config, "lattice config JSON")->required();
    deform_cmd->add_option("--out", render_out, "output PNG/PPM")->required();
    deform_cmd->add_option("--background", bg_vals, "background RGB")->expected(3);
    deform_cmd->add_option("--node-out", node_path, "also write deformed .node snapshot");
    deform_cam.attach(deform_cmd);

    CLI11_PARSE(app, argc, argv);

    auto make_checkpoint = [&](TetMesh mesh, TrainConfig cfg, const std::string& mode_name) {
        cfg.mode = constraint_mode_from_name(mode_name);
        cfg.seed = resolve_seed(cfg.seed);
        cfg.threads = threads;
        TrainState st = make_initial_state(std::move(mesh), cfg);
        save_checkpoint(out_path, st);
        std::cout << "wrote " << out_path << " (" << st.base.tet_count() << " tets, "
                  << st.base.vertex_count() << " vertices)\n";
    };

    if (init_grid->parsed()) {
        Aabb box{Vec3(bbox_vals[0], bbox_vals[1], bbox_vals[2]),
                 Vec3(bbox_vals[3], bbox_vals[4], bbox_vals[5])};
        make_checkpoint(build_uniform_grid(box, {res_vals[0], res_vals[1], res_vals[2]}),
                        grid_cfg, grid_mode);
    } else if (init_mesh->parsed()) {
        auto verts = read_node(node_path);
        auto tets = read_ele(ele_path);
        auto conf = validate_conformal(std::span<const Tet>(tets));
        if (!conf.ok)
            throw std::runtime_error("input mesh is not conformal (" +
                                     std::to_string(conf.bad_faces.size()) + " bad faces)");
        int inverted = count_inverted(verts, tets);
        if (inverted > 0)
            throw std::runtime_error("input mesh has " + std::to_string(inverted) +
                                     " inverted tets");
        make_checkpoint(TetMesh(std::move(verts), std::move(tets)), mesh_cfg, mesh_mode);
    } else if (train->parsed()) {
        TrainState st = load_checkpoint(ckpt_path);
        // passed flags override the checkpoint's config snapshot
        TrainConfig cfg = st.cfg;
        auto passed = [&](const std::string& flag) { return train->count(flag) > 0; };
        if (passed("--iters")) cfg.iterations = train_cfg.iterations;
        if (passed("--split-threshold")) cfg.split_grad_threshold = train_cfg.split_grad_threshold;
        if (passed("--mask-threshold"))
            cfg.mask_opacity_threshold = train_cfg.mask_opacity_threshold;
        if (passed("--max-depth")) cfg.max_depth = train_cfg.max_depth;
        if (passed("--control-interval")) cfg.control_interval = train_cfg.control_interval;
        if (passed("--sh-degree")) cfg.sh_degree = train_cfg.sh_degree;
        if (passed("--seed")) cfg.seed = train_cfg.seed;
        if (passed("--mode")) cfg.mode = constraint_mode_from_name(train_mode);
        if (passed("--lambda-l1")) cfg.weights.l1 = train_cfg.weights.l1;
        if (passed("--lambda-ssim")) cfg.weights.ssim = train_cfg.weights.ssim;
        if (passed("--lambda-mask")) cfg.weights.mask = train_cfg.weights.mask;
        if (passed("--lambda-quality")) cfg.weights.quality = train_cfg.weights.quality;
        if (passed("--lambda-sv")) cfg.weights.sv = train_cfg.weights.sv;
        if (passed("--quality-hinge")) cfg.weights.quality_hinge = train_cfg.weights.quality_hinge;
        if (passed("--lr-map")) cfg.lr.map = train_cfg.lr.map;
        if (passed("--lr-sh")) cfg.lr.sh = train_cfg.lr.sh;
        if (passed("--lr-weights")) cfg.lr.weights = train_cfg.lr.weights;
        if (passed("--lr-opacity")) cfg.lr.opacity = train_cfg.lr.opacity;
        if (passed("--lr-rotation")) cfg.lr.rotation = train_cfg.lr.rotation;
        if (passed("--lr-controls")) cfg.lr.controls = train_cfg.lr.controls;
        if (passed("--lr-vertices")) cfg.lr.vertices = train_cfg.lr.vertices;
        cfg.seed = resolve_seed(cfg.seed);
        cfg.threads = threads;
        if (cfg.sh_degree != st.cfg.sh_degree)
            throw std::runtime_error("--sh-degree cannot change after initialization");
        st.cfg = cfg;
        st.rng = Rng(cfg.seed);

        Aabb mask_box = st.base.bounding_box();
        SceneDataset ds = load_scene(scene_dir, mask_from_bbox ? &mask_box : nullptr);
        std::ofstream metrics;
        if (!metrics_path.empty()) metrics.open(metrics_path);
        const std::string final_out = train_out.empty() ? ckpt_path : train_out;
        for (int i = 0; i < cfg.iterations; ++i) {
            auto m = train_step(st, ds);
            if (log_every > 0 && (st.iteration % log_every == 0 || i + 1 == cfg.iterations)) {
                std::string line = metrics_json(st, m);
                if (metrics.is_open()) metrics << line << "\n";
                else if (st.iteration % (log_every * 10) == 0)
                    std::cout << line << std::endl;
            }
            if (cfg.control_interval > 0 && st.iteration % cfg.control_interval == 0)
                adaptive_control(st);
            if (ckpt_every > 0 && st.iteration % ckpt_every == 0)
                save_checkpoint(final_out, st);
        }
        save_checkpoint(final_out, st);
        std::cout << "wrote " << final_out << "\n";
    } else if (render_cmd->parsed()) {
        TrainState st = load_checkpoint(ckpt_path);
        Camera cam = render_cam.resolve(st);
        auto out = render_state(st, cam, Vec3(bg_vals[0], bg_vals[1], bg_vals[2]), threads);
        write_image(render_out, out, true);
        std::cout << "wrote " << render_out << "\n";
    } else if (eval_cmd->parsed()) {
        TrainState st = load_checkpoint(ckpt_path);
        SceneDataset ds = load_scene(scene_dir);
        std::ostream* os = &std::cout;
        std::ofstream csv;
        if (!eval_csv.empty()) {
            csv.open(eval_csv);
            os = &csv;
        }
        *os << "view,psnr,ssim\n";
        double psnr_sum = 0, ssim_sum = 0;
        for (std::size_t i = 0; i < ds.views.size(); ++i) {
            auto out = render_state(st, ds.views[i].cam, ds.background, threads);
            // compare through the same 8-bit quantization the files carry
            ImageF rendered = to_float(quantize(out.rgb));
            double p = psnr(rendered, ds.views[i].rgb);
            double s = ssim(rendered, ds.views[i].rgb);
            psnr_sum += p;
            ssim_sum += s;
            *os << i << "," << p << "," << s << "\n";
        }
        *os << "mean," << psnr_sum / ds.views.size() << "," << ssim_sum / ds.views.size() << "\n";
    } else if (lod_cmd->parsed()) {
        TrainState st = load_checkpoint(ckpt_path);
        Camera cam = lod_cam.resolve(st);
        auto out = render_state_lod(st, lod_level, cam, Vec3(bg_vals[0], bg_vals[1], bg_vals[2]),
                                    threads);
        write_image(render_out, out, true);
        std::cout << "wrote " << render_out << "\n";
    } else if (quality_cmd->parsed()) {
        TrainState st = load_checkpoint(ckpt_path);
        auto positions = st.effective_base_positions();
        auto report = compute_quality(positions, st.base.tets());
        if (!quality_csv.empty()) write_quality_csv(quality_csv, report);
        std::printf("tets %zu\n", report.volume.size());
        std::printf("AR   %.4f +- %.4f\n", report.mean_ar(), report.std_ar());
        std::printf("ARG  %.4f +- %.4f\n", report.mean_q(), report.std_q());
        std::printf("AVR  %.4f +- %.4f\n", report.mean_avr(), report.std_avr());
        std::printf("inverted %d\n", report.inverted_count);
    } else if (export_cmd->parsed()) {
        TrainState st = load_checkpoint(ckpt_path);
        auto gaussians = state_to_ply_gaussians(st);
        write_ply(out_path, gaussians);
        std::cout << "wrote " << out_path << " (" << gaussians.size() << " gaussians)\n";
    } else if (sim_cmd->parsed()) {
        TrainState st = load_checkpoint(ckpt_path);
        std::ifstream cfg_in(sim_config);
        if (!cfg_in) throw std::runtime_error("cannot open " + sim_config);
        json cfg = json::parse(cfg_in);
        fs::create_directories(sim_out_dir);
        Camera cam = sim_cam.resolve(st);
        Vec3 bg(bg_vals[0], bg_vals[1], bg_vals[2]);

        auto rest = st.effective_base_positions();
        const int frames = cfg.value("frames", 60);
        const double fps = cfg.value("fps", 60.0);
        const std::string type = cfg.value("type", "xpbd");

        std::vector<std::vector<Vec3>> sequence;
        if (type == "xpbd") {
            MassSpringSystem sys = build_springs(st.base, rest, cfg.value("density", 1000.0),
                                                 cfg.value("compliance", 0.0));
            if (cfg.contains("gravity"))
                sys.gravity = Vec3(cfg["gravity"][0], cfg["gravity"][1], cfg["gravity"][2]);
            if (cfg.contains("pins")) {
                const auto& pins = cfg["pins"];
                if (pins.contains("indices"))
                    for (int idx : pins["indices"]) sys.pin(idx);
                if (pins.contains("box")) {
                    Aabb box{Vec3(pins["box"]["lo"][0], pins["box"]["lo"][1],
                                  pins["box"]["lo"][2]),
                             Vec3(pins["box"]["hi"][0], pins["box"]["hi"][1],
                                  pins["box"]["hi"][2])};
                    for (std::size_t i = 0; i < rest.size(); ++i)
                        if (box.contains(rest[i])) sys.pin(static_cast<int>(i));
                }
            }
            const int substeps = cfg.value("substeps", 10);
            const int iterations = cfg.value("iterations", 10);
            for (int f = 0; f < frames; ++f) {
                for (int s = 0; s < substeps; ++s)
                    xpbd_step(sys, 1.0 / (fps * substeps), iterations);
                sequence.push_back(sys.positions);
            }
        } else if (type == "lattice") {
            const auto& lat = cfg.at("lattice");
            std::array<int, 3> res{lat["res"][0], lat["res"][1], lat["res"][2]};
            Aabb box = st.base.bounding_box().padded(0.01);
            if (lat.contains("box"))
                box = Aabb{Vec3(lat["box"]["lo"][0], lat["box"]["lo"][1], lat["box"]["lo"][2]),
                           Vec3(lat["box"]["hi"][0], lat["box"]["hi"][1], lat["box"]["hi"][2])};
            LatticeDeformer lattice(box, res, rest);
            // keyframes: {"t": frame_fraction, "displacements": [[dx,dy,dz], ...]}
            struct Key {
                double t;
                std::vector<Vec3> d;
            };
            std::vector<Key> keys;
            for (const auto& k : cfg.at("keyframes")) {
                Key key;
                key.t = k.at("t").get<double>();
                for (const auto& d : k.at("displacements"))
                    key.d.push_back(Vec3(d[0], d[1], d[2]));
                if (static_cast<int>(key.d.size()) != lattice.control_count())
                    throw std::runtime_error("keyframe displacement count mismatch");
                keys.push_back(std::move(key));
            }
            if (keys.empty()) throw std::runtime_error("lattice simulation needs keyframes");
            for (int f = 0; f < frames; ++f) {
                double t = frames > 1 ? static_cast<double>(f) / (frames - 1) : 0.0;
                // piecewise-linear interpolation between keyframes
                std::vector<Vec3> d(lattice.control_count(), Vec3::Zero());
                if (t <= keys.front().t) {
                    d = keys.front().d;
                } else if (t >= keys.back().t) {
                    d = keys.back().d;
                } else {
                    for (std::size_t k = 1; k < keys.size(); ++k)
                        if (t <= keys[k].t) {
                            double u = (t - keys[k - 1].t) / (keys[k].t - keys[k - 1].t);
                            for (int c = 0; c < lattice.control_count(); ++c)
                                d[c] = (1 - u) * keys[k - 1].d[c] + u * keys[k].d[c];
                            break;
                        }
                }
                sequence.push_back(lattice.apply(d, rest));
            }
        } else {
            throw std::runtime_error("unknown simulation type: " + type);
        }

        int total_inverted = 0;
        for (std::size_t f = 0; f < sequence.size(); ++f) {
            auto frame = playback_frame(st, rest, sequence[f], cam, bg, threads);
            total_inverted += frame.inverted_base_tets;
            char name[64];
            std::snprintf(name, sizeof(name), "frame_%04zu.png", f);
            write_image((fs::path(sim_out_dir) / name).string(), frame.image, true);
            std::snprintf(name, sizeof(name), "frame_%04zu.node", f);
            write_node((fs::path(sim_out_dir) / name).string(), sequence[f]);
            if (frame.inverted_base_tets > 0)
                std::cerr << "warning: frame " << f << " has " << frame.inverted_base_tets
                          << " inverted base tets\n";
        }
        std::cout << "wrote " << sequence.size() << " frames to " << sim_out_dir
                  << " (inverted tets across frames: " << total_inverted << ")\n";
    } else if (deform_cmd->parsed()) {
        TrainState st = load_checkpoint(ckpt_path);
        std::ifstream cfg_in(lattice_config);
        if (!cfg_in) throw std::runtime_error("cannot open " + lattice_config);
        json cfg = json::parse(cfg_in);
        auto rest = st.effective_base_positions();
        std::array<int, 3> res{cfg["res"][0], cfg["res"][1], cfg["res"][2]};
        Aabb box = st.base.bounding_box().padded(0.01);
        if (cfg.contains("box"))
            box = Aabb{Vec3(cfg["box"]["lo"][0], cfg["box"]["lo"][1], cfg["box"]["lo"][2]),
                       Vec3(cfg["box"]["hi"][0], cfg["box"]["hi"][1], cfg["box"]["hi"][2])};
        LatticeDeformer lattice(box, res, rest);
        std::vector<Vec3> d;
        for (const auto& disp : cfg.at("displacements")) d.push_back(Vec3(disp[0], disp[1], disp[2]));
        if (static_cast<int>(d.size()) != lattice.control_count())
            throw std::runtime_error("displacement count mismatch: expected " +
                                     std::to_string(lattice.control_count()));
        auto deformed = lattice.apply(d, rest);
        Camera cam = deform_cam.resolve(st);
        auto frame = playback_frame(st, rest, deformed, cam,
                                    Vec3(bg_vals[0], bg_vals[1], bg_vals[2]), threads);
        write_image(render_out, frame.image, true);
        if (!node_path.empty()) write_node(node_path, deformed);
        if (frame.inverted_base_tets > 0)
            std::cerr << "warning: deformed mesh has " << frame.inverted_base_tets
                      << " inverted base tets\n";
        std::cout << "wrote " << render_out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
