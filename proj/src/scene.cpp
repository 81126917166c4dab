#include "stf/scene.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace stf {

namespace fs = std::filesystem;
using nlohmann::json;

SceneDataset load_scene(const std::string& dir, const Aabb* mask_bbox) {
    fs::path root(dir);
    fs::path manifest = root / "transforms.json";
    if (!fs::exists(manifest)) manifest = root / "manifest.json";
    if (!fs::exists(manifest))
        throw std::runtime_error("no transforms.json or manifest.json in " + dir);
    std::ifstream in(manifest);
    json j = json::parse(in);

    SceneDataset ds;
    if (j.contains("background")) {
        auto bg = j["background"];
        ds.background = Vec3(bg[0].get<double>(), bg[1].get<double>(), bg[2].get<double>());
    }
    const double fov_x = j.at("camera_angle_x").get<double>();
    for (const auto& frame : j.at("frames")) {
        Mat4 c2w;
        const auto& rows = frame.at("transform_matrix");
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) c2w(r, c) = rows[r][c].get<double>();

        std::string file = frame.at("file_path").get<std::string>();
        fs::path img_path = root / file;
        if (!fs::exists(img_path) && fs::exists(img_path.string() + ".png"))
            img_path = img_path.string() + ".png";
        ImageU8 img = read_png(img_path.string());

        SceneView view;
        view.cam = Camera::from_gl_c2w(c2w, fov_x, img.width, img.height);
        view.rgb = ImageF(img.width, img.height, 3);
        view.mask = ImageF(img.width, img.height, 1, 1.0);
        const bool has_alpha = img.channels == 4;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    int ch = img.channels == 1 ? 0 : c;
                    view.rgb.at(y, x, c) =
                        img.data[(static_cast<std::size_t>(y) * img.width + x) * img.channels +
                                 ch] /
                        255.0;
                }
                if (has_alpha)
                    view.mask.at(y, x, 0) =
                        img.data[(static_cast<std::size_t>(y) * img.width + x) * 4 + 3] / 255.0;
            }
        if (!has_alpha && mask_bbox) {
            // mask = 1 inside the projected box corners, else 0
            double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
            for (int corner = 0; corner < 8; ++corner) {
                Vec3 p(corner & 1 ? mask_bbox->hi.x() : mask_bbox->lo.x(),
                       corner & 2 ? mask_bbox->hi.y() : mask_bbox->lo.y(),
                       corner & 4 ? mask_bbox->hi.z() : mask_bbox->lo.z());
                Vec3 t = view.cam.world_to_cam(p);
                if (t.z() < view.cam.near_plane) continue;
                double u = view.cam.fx * t.x() / t.z() + view.cam.cx;
                double v = view.cam.fy * t.y() / t.z() + view.cam.cy;
                x0 = std::min(x0, u);
                x1 = std::max(x1, u);
                y0 = std::min(y0, v);
                y1 = std::max(y1, v);
            }
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    view.mask.at(y, x, 0) =
                        (x + 0.5 >= x0 && x + 0.5 <= x1 && y + 0.5 >= y0 && y + 0.5 <= y1) ? 1.0
                                                                                           : 0.0;
        }
        ds.views.push_back(std::move(view));
    }
    return ds;
}

void save_scene(const std::string& dir, const SceneDataset& dataset, double fov_x) {
    fs::create_directories(dir);
    json j;
    j["camera_angle_x"] = fov_x;
    j["background"] = {dataset.background[0], dataset.background[1], dataset.background[2]};
    j["frames"] = json::array();
    for (std::size_t i = 0; i < dataset.views.size(); ++i) {
        const SceneView& view = dataset.views[i];
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%04zu.png", i);

        ImageU8 img{view.cam.width, view.cam.height, 4, {}};
        img.data.resize(static_cast<std::size_t>(img.width) * img.height * 4);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                auto* px = &img.data[(static_cast<std::size_t>(y) * img.width + x) * 4];
                for (int c = 0; c < 3; ++c)
                    px[c] = static_cast<std::uint8_t>(
                        std::lround(std::clamp(view.rgb.at(y, x, c), 0.0, 1.0) * 255.0));
                px[3] = static_cast<std::uint8_t>(
                    std::lround(std::clamp(view.mask.at(y, x, 0), 0.0, 1.0) * 255.0));
            }
        write_png((fs::path(dir) / name).string(), img);

        // internal camera -> OpenGL convention
        Mat3 flip = Mat3::Identity();
        flip(1, 1) = -1.0;
        flip(2, 2) = -1.0;
        Mat3 r_gl = view.cam.rot_c2w * flip;
        Mat4 c2w = Mat4::Identity();
        c2w.topLeftCorner<3, 3>() = r_gl;
        c2w.topRightCorner<3, 1>() = view.cam.origin;
        json rows = json::array();
        for (int r = 0; r < 4; ++r) {
            json row = json::array();
            for (int c = 0; c < 4; ++c) row.push_back(c2w(r, c));
            rows.push_back(row);
        }
        j["frames"].push_back({{"file_path", name}, {"transform_matrix", rows}});
    }
    std::ofstream out(fs::path(dir) / "transforms.json");
    out << j.dump(1);
}

std::vector<Camera> make_orbit_cameras(int count, const Vec3& center, double radius,
                                       double elevation, double fov_x, int width, int height) {
    std::vector<Camera> cams;
    cams.reserve(count);
    for (int i = 0; i < count; ++i) {
        double az = 2.0 * M_PI * i / count + 0.1;
        cams.push_back(make_orbit_camera(center, radius, az, elevation, fov_x, width, height));
    }
    return cams;
}

SceneDataset make_synthetic_dataset(const TrainState& state, std::span<const Camera> cameras,
                                    const Vec3& background, int threads) {
    SceneDataset ds;
    ds.background = background;
    for (const Camera& cam : cameras) {
        RenderOutput out = render_state(state, cam, background, threads);
        SceneView view;
        view.cam = cam;
        view.rgb = to_float(quantize(out.rgb));
        view.mask = to_float(quantize(out.alpha));
        ds.views.push_back(std::move(view));
    }
    return ds;
}

void randomize_attributes(TrainState& state, Rng& rng) {
    const double dc = 0.28209479177387814;
    const int coeffs = state.sh_coeffs();
    for (int slot = 0; slot < state.forest.attribute_slot_count(); ++slot) {
        double* sh = state.sh_slot(slot);
        for (int ch = 0; ch < 3; ++ch)
            sh[ch] = (rng.uniform(0.15, 0.85) - 0.5) / dc;  // DC color in range
        for (int k = 1; k < coeffs; ++k)
            for (int ch = 0; ch < 3; ++ch) sh[k * 3 + ch] = rng.uniform(-0.1, 0.1);
    }
    for (int n = 0; n < state.forest.node_count(); ++n) {
        TetNode& node = state.forest.node(n);
        for (int i = 0; i < 4; ++i) node.weight_raw[i] = rng.uniform(0.5, 2.0);
        node.opacity_raw = inverse_sigmoid(rng.uniform(0.3, 0.9));
        Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        node.quat_raw = q.norm() > 0.1 ? q.normalized() : Vec4(1, 0, 0, 0);
    }
}

}  // namespace stf
