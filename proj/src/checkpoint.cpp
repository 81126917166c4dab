#include "stf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stf {

namespace {

// Little-endian scalar I/O. The build targets little-endian hosts; the
// format is defined as little-endian either way.
class Writer {
  public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    }
    template <typename T>
    void put(T v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void put_f32(double v) { put<float>(static_cast<float>(v)); }
    void bytes(const void* p, std::size_t n) {
        out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    }

  private:
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw std::runtime_error("cannot open " + path);
    }
    template <typename T>
    T get() {
        T v;
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) throw std::runtime_error("checkpoint truncated");
        return v;
    }
    double get_f32() { return static_cast<double>(get<float>()); }
    void bytes(void* p, std::size_t n) {
        in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw std::runtime_error("checkpoint truncated");
    }

  private:
    std::ifstream in_;
};

void write_mlp(Writer& w, const Mlp& mlp) {
    auto tensor = [&](const auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) w.put_f32(t.data()[i]);
    };
    tensor(mlp.w1());
    tensor(mlp.b1());
    tensor(mlp.w2());
    tensor(mlp.b2());
    tensor(mlp.w3());
    tensor(mlp.b3());
}

void read_mlp(Reader& r, Mlp& mlp) {
    auto tensor = [&](auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.get_f32();
    };
    tensor(mlp.w1());
    tensor(mlp.b1());
    tensor(mlp.w2());
    tensor(mlp.b2());
    tensor(mlp.w3());
    tensor(mlp.b3());
}

void write_adam(Writer& w, const AdamState& s) {
    w.put<std::int64_t>(s.step);
    w.put<std::uint64_t>(s.m.size());
    w.bytes(s.m.data(), s.m.size() * sizeof(float));
    w.bytes(s.v.data(), s.v.size() * sizeof(float));
}

void read_adam(Reader& r, AdamState& s) {
    s.step = r.get<std::int64_t>();
    auto n = r.get<std::uint64_t>();
    s.m.resize(n);
    s.v.resize(n);
    r.bytes(s.m.data(), n * sizeof(float));
    r.bytes(s.v.data(), n * sizeof(float));
}

/// Preorder node listing per root, the serialization order of the forest.
std::vector<int> preorder_nodes(const SubdivisionForest& forest) {
    std::vector<int> order;
    order.reserve(forest.node_count());
    std::vector<int> work;
    for (int r = 0; r < forest.root_count(); ++r) {
        work.push_back(r);
        while (!work.empty()) {
            int id = work.back();
            work.pop_back();
            order.push_back(id);
            const TetNode& n = forest.node(id);
            if (!n.is_leaf())
                for (int i = 3; i >= 0; --i) work.push_back(n.children[i]);
        }
    }
    return order;
}

void write_node_record(Writer& w, const TetNode& n) {
    std::uint8_t flags = (n.is_leaf() ? 0 : 1) | (n.masked ? 2 : 0);
    w.put(flags);
    for (int k = 0; k < 4; ++k) w.put_f32(n.ctrl_raw[k]);
    for (int k = 0; k < 4; ++k) w.put_f32(n.weight_raw[k]);
    w.put_f32(n.opacity_raw);
    for (int k = 0; k < 4; ++k) w.put_f32(n.quat_raw[k]);
    for (int k = 0; k < 4; ++k) w.put<std::uint32_t>(static_cast<std::uint32_t>(n.sh_idx[k]));
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& st, bool include_optimizer) {
    Writer w(path);
    w.bytes("STFD", 4);
    w.put<std::uint32_t>(kCheckpointVersion);

    // config snapshot
    const TrainConfig& c = st.cfg;
    w.put<std::int32_t>(c.iterations);
    w.put<double>(c.split_grad_threshold);
    w.put<double>(c.mask_opacity_threshold);
    w.put<std::int32_t>(c.max_depth);
    w.put<std::int32_t>(c.control_interval);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(c.mode));
    w.put<std::int32_t>(c.sh_degree);
    w.put<std::uint64_t>(c.seed);
    w.put<double>(c.weights.l1);
    w.put<double>(c.weights.ssim);
    w.put<double>(c.weights.mask);
    w.put<double>(c.weights.quality);
    w.put<double>(c.weights.sv);
    w.put<double>(c.weights.quality_hinge);
    w.put<double>(c.lr.map);
    w.put<double>(c.lr.sh);
    w.put<double>(c.lr.weights);
    w.put<double>(c.lr.opacity);
    w.put<double>(c.lr.rotation);
    w.put<double>(c.lr.controls);
    w.put<double>(c.lr.vertices);
    w.put<std::int32_t>(c.map.hidden_dim);
    w.put<std::int32_t>(c.map.num_blocks);
    w.put<std::int32_t>(c.map.encoding.levels);
    w.put<std::int32_t>(c.map.encoding.base_resolution);
    w.put<std::int32_t>(c.map.encoding.max_resolution);
    w.put<std::int32_t>(c.map.encoding.table_size_log2);
    w.put<std::int32_t>(c.map.encoding.features);
    w.put<std::uint64_t>(st.iteration);

    // base mesh, f64
    w.put<std::uint64_t>(st.base.vertex_count());
    for (const Vec3& v : st.base.vertices())
        for (int d = 0; d < 3; ++d) w.put<double>(v[d]);
    w.put<std::uint64_t>(st.base.tet_count());
    for (const Tet& t : st.base.tets())
        for (int i : t) w.put<std::uint32_t>(static_cast<std::uint32_t>(i));
    for (const Vec3& v : st.vertex_params)
        for (int d = 0; d < 3; ++d) w.put<double>(v[d]);

    // map
    for (int d = 0; d < 3; ++d) w.put<double>(st.map.domain_box().lo[d]);
    for (int d = 0; d < 3; ++d) w.put<double>(st.map.domain_box().hi[d]);
    for (const auto& block : st.map.blocks()) {
        w.put<std::uint8_t>(static_cast<std::uint8_t>(block.axis()));
        for (double t : block.encoding().table()) w.put_f32(t);
        write_mlp(w, block.mlp());
    }

    // SH
    w.put<std::uint64_t>(st.forest.attribute_slot_count());
    for (double v : st.sh) w.put_f32(v);

    // forest, preorder
    w.put<std::int32_t>(st.forest.max_depth());
    w.put<std::uint64_t>(st.forest.root_count());
    auto order = preorder_nodes(st.forest);
    w.put<std::uint64_t>(order.size());
    for (int id : order) write_node_record(w, st.forest.node(id));

    // optimizer state
    w.put<std::uint8_t>(include_optimizer ? 1 : 0);
    if (include_optimizer) {
        // node-attached moments follow the same preorder as the node records
        auto write_node_adam = [&](const AdamState& s, int per_node) {
            w.put<std::int64_t>(s.step);
            std::vector<float> m(order.size() * per_node, 0.0f), v(order.size() * per_node, 0.0f);
            for (std::size_t oi = 0; oi < order.size(); ++oi)
                for (int k = 0; k < per_node; ++k) {
                    std::size_t src = static_cast<std::size_t>(order[oi]) * per_node + k;
                    if (src < s.m.size()) {
                        m[oi * per_node + k] = s.m[src];
                        v[oi * per_node + k] = s.v[src];
                    }
                }
            w.bytes(m.data(), m.size() * sizeof(float));
            w.bytes(v.data(), v.size() * sizeof(float));
        };
        write_adam(w, st.adam_sh);
        write_node_adam(st.adam_weights, 4);
        write_node_adam(st.adam_opacity, 1);
        write_node_adam(st.adam_rotation, 4);
        write_node_adam(st.adam_controls, 4);
        write_adam(w, st.adam_vertices);
        for (std::size_t b = 0; b < st.map.blocks().size(); ++b) {
            write_adam(w, st.adam_map_tables[b]);
            write_adam(w, st.adam_map_mlps[b].w1);
            write_adam(w, st.adam_map_mlps[b].b1);
            write_adam(w, st.adam_map_mlps[b].w2);
            write_adam(w, st.adam_map_mlps[b].b2);
            write_adam(w, st.adam_map_mlps[b].w3);
            write_adam(w, st.adam_map_mlps[b].b3);
        }
    }
}

TrainState load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "STFD", 4) != 0)
        throw std::runtime_error(path + ": not a checkpoint (bad magic)");
    auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));

    TrainState st;
    TrainConfig& c = st.cfg;
    c.iterations = r.get<std::int32_t>();
    c.split_grad_threshold = r.get<double>();
    c.mask_opacity_threshold = r.get<double>();
    c.max_depth = r.get<std::int32_t>();
    c.control_interval = r.get<std::int32_t>();
    c.mode = static_cast<ConstraintMode>(r.get<std::uint8_t>());
    c.sh_degree = r.get<std::int32_t>();
    c.seed = r.get<std::uint64_t>();
    c.weights.l1 = r.get<double>();
    c.weights.ssim = r.get<double>();
    c.weights.mask = r.get<double>();
    c.weights.quality = r.get<double>();
    c.weights.sv = r.get<double>();
    c.weights.quality_hinge = r.get<double>();
    c.lr.map = r.get<double>();
    c.lr.sh = r.get<double>();
    c.lr.weights = r.get<double>();
    c.lr.opacity = r.get<double>();
    c.lr.rotation = r.get<double>();
    c.lr.controls = r.get<double>();
    c.lr.vertices = r.get<double>();
    c.map.hidden_dim = r.get<std::int32_t>();
    c.map.num_blocks = r.get<std::int32_t>();
    c.map.encoding.levels = r.get<std::int32_t>();
    c.map.encoding.base_resolution = r.get<std::int32_t>();
    c.map.encoding.max_resolution = r.get<std::int32_t>();
    c.map.encoding.table_size_log2 = r.get<std::int32_t>();
    c.map.encoding.features = r.get<std::int32_t>();
    st.iteration = r.get<std::uint64_t>();
    st.rng = Rng(c.seed);

    auto nv = r.get<std::uint64_t>();
    std::vector<Vec3> verts(nv);
    for (auto& v : verts)
        for (int d = 0; d < 3; ++d) v[d] = r.get<double>();
    auto nt = r.get<std::uint64_t>();
    std::vector<Tet> tets(nt);
    for (auto& t : tets)
        for (int& i : t) i = static_cast<int>(r.get<std::uint32_t>());
    st.base = TetMesh(std::move(verts), std::move(tets));
    st.vertex_params.resize(nv);
    for (auto& v : st.vertex_params)
        for (int d = 0; d < 3; ++d) v[d] = r.get<double>();

    Aabb box;
    for (int d = 0; d < 3; ++d) box.lo[d] = r.get<double>();
    for (int d = 0; d < 3; ++d) box.hi[d] = r.get<double>();
    Rng init_rng(0);
    st.map = OrientationPreservingMap(box, c.map, init_rng);
    for (auto& block : st.map.blocks()) {
        auto axis = r.get<std::uint8_t>();
        if (axis != static_cast<std::uint8_t>(block.axis()))
            throw std::runtime_error(path + ": block axis mismatch");
        for (double& t : block.encoding().table()) t = r.get_f32();
        read_mlp(r, block.mlp());
    }

    auto n_slots = r.get<std::uint64_t>();
    const std::size_t stride = st.sh_stride();
    st.sh.resize(n_slots * stride);
    for (double& v : st.sh) v = r.get_f32();

    int max_depth = r.get<std::int32_t>();
    auto n_roots = r.get<std::uint64_t>();
    auto n_nodes = r.get<std::uint64_t>();
    st.forest = SubdivisionForest(st.base.tets(), static_cast<int>(nv), max_depth);
    if (n_roots != static_cast<std::uint64_t>(st.forest.root_count()))
        throw std::runtime_error(path + ": forest root count mismatch");

    // Rebuild the tree in preorder. Records arrive parent-first; an internal
    // flag means "subdivide and descend".
    std::size_t consumed = 0;
    std::vector<int> stack;
    for (int root = 0; root < st.forest.root_count(); ++root) {
        stack.push_back(root);
        while (!stack.empty()) {
            int id = stack.back();
            stack.pop_back();
            ++consumed;
            auto flags = r.get<std::uint8_t>();
            TetNode& n = st.forest.node(id);
            for (int k = 0; k < 4; ++k) n.ctrl_raw[k] = r.get_f32();
            for (int k = 0; k < 4; ++k) n.weight_raw[k] = r.get_f32();
            n.opacity_raw = r.get_f32();
            for (int k = 0; k < 4; ++k) n.quat_raw[k] = r.get_f32();
            std::array<int, 4> sh_idx;
            for (int k = 0; k < 4; ++k) sh_idx[k] = static_cast<int>(r.get<std::uint32_t>());
            n.masked = (flags & 2) != 0;
            if (flags & 1) {
                st.forest.subdivide(id);
                // subdivide derives slots/weights from current attrs; the
                // serialized child records overwrite them next
                for (int k = 3; k >= 0; --k) stack.push_back(st.forest.node(id).children[k]);
            }
            st.forest.node(id).sh_idx = sh_idx;
        }
    }
    if (consumed != n_nodes) throw std::runtime_error(path + ": forest node count mismatch");
    if (static_cast<std::uint64_t>(st.forest.attribute_slot_count()) != n_slots)
        throw std::runtime_error(path + ": attribute slot count mismatch");

    st.split_grad_accum.assign(st.forest.node_count(), 0.0);
    st.split_grad_count.assign(st.forest.node_count(), 0);
    st.adam_map_tables.resize(st.map.blocks().size());
    st.adam_map_mlps.resize(st.map.blocks().size());

    auto has_optimizer = r.get<std::uint8_t>();
    if (has_optimizer) {
        // Node ids after the rebuild follow DFS creation order, not preorder;
        // scatter the preorder-serialized moments through the preorder list.
        auto order = preorder_nodes(st.forest);
        auto read_node_adam = [&](AdamState& s, int per_node) {
            s.step = r.get<std::int64_t>();
            s.m.assign(static_cast<std::size_t>(st.forest.node_count()) * per_node, 0.0f);
            s.v.assign(s.m.size(), 0.0f);
            std::vector<float> m(order.size() * per_node), v(order.size() * per_node);
            r.bytes(m.data(), m.size() * sizeof(float));
            r.bytes(v.data(), v.size() * sizeof(float));
            for (std::size_t oi = 0; oi < order.size(); ++oi)
                for (int k = 0; k < per_node; ++k) {
                    s.m[static_cast<std::size_t>(order[oi]) * per_node + k] = m[oi * per_node + k];
                    s.v[static_cast<std::size_t>(order[oi]) * per_node + k] = v[oi * per_node + k];
                }
        };
        read_adam(r, st.adam_sh);
        read_node_adam(st.adam_weights, 4);
        read_node_adam(st.adam_opacity, 1);
        read_node_adam(st.adam_rotation, 4);
        read_node_adam(st.adam_controls, 4);
        read_adam(r, st.adam_vertices);
        for (std::size_t b = 0; b < st.map.blocks().size(); ++b) {
            read_adam(r, st.adam_map_tables[b]);
            read_adam(r, st.adam_map_mlps[b].w1);
            read_adam(r, st.adam_map_mlps[b].b1);
            read_adam(r, st.adam_map_mlps[b].w2);
            read_adam(r, st.adam_map_mlps[b].b2);
            read_adam(r, st.adam_map_mlps[b].w3);
            read_adam(r, st.adam_map_mlps[b].b3);
        }
    }
    return st;
}

}  // namespace stf
