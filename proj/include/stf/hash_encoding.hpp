#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stf/rng.hpp"
#include "stf/types.hpp"

namespace stf {

struct HashEncodingConfig {
    int levels = 8;
    int base_resolution = 16;
    int max_resolution = 1024;
    int table_size_log2 = 19;
    int features = 2;

    int output_dim() const { return levels * features; }
    std::uint32_t table_size() const { return 1u << table_size_log2; }
    std::size_t param_count() const {
        return static_cast<std::size_t>(levels) * table_size() * features;
    }
    bool operator==(const HashEncodingConfig&) const = default;
};

/// Multi-resolution 2D hash grid with bilinear interpolation. Input lives in
/// [0,1]^2 (callers clamp); features are learnable and hashed at every level
/// with the fixed primes (1, 2654435761) so serialized tables stay portable.
class HashEncoding2D {
  public:
    HashEncoding2D() { rebuild_resolutions(); }
    explicit HashEncoding2D(const HashEncodingConfig& cfg, Rng* init_rng = nullptr);

    const HashEncodingConfig& config() const { return cfg_; }
    const std::vector<int>& level_resolutions() const { return res_; }
    std::vector<double>& table() { return table_; }
    const std::vector<double>& table() const { return table_; }

    void encode(double u, double v, double* out) const;
    /// out plus d(out)/du and d(out)/dv, each output_dim() long.
    void encode_with_jacobian(double u, double v, double* out, double* d_du, double* d_dv) const;
    /// Appends (table index, gradient) pairs for d(loss)/d(table) given
    /// d(loss)/d(out). Duplicate indices may appear; the optimizer merges.
    void accumulate_table_grad(double u, double v, const double* d_out,
                               std::vector<std::pair<std::uint32_t, double>>& grads) const;

  private:
    void rebuild_resolutions();

    HashEncodingConfig cfg_;
    std::vector<int> res_;
    std::vector<double> table_;  // [level][entry][feature]
};

}  // namespace stf
