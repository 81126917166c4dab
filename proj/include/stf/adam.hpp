#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stf/types.hpp"

namespace stf {

struct AdamHyperparams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// Adam moments for one parameter tensor. Entries whose gradient is exactly
/// zero are skipped entirely, so untouched parameters (e.g. hash-table cells
/// the current batch never read) stay bit-identical.
struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    std::int64_t step = 0;

    void ensure_size(std::size_t n) {
        if (m.size() < n) {
            m.resize(n, 0.0f);
            v.resize(n, 0.0f);
        }
    }
};

void adam_step_dense(std::span<double> params, std::span<const double> grads, AdamState& state,
                     const AdamHyperparams& hp, double lr);

/// Sparse update from (index, grad) pairs; duplicates are merged first.
/// `pairs` is reordered in place.
void adam_step_sparse(std::span<double> params,
                      std::vector<std::pair<std::uint32_t, double>>& pairs, AdamState& state,
                      const AdamHyperparams& hp, double lr);

}  // namespace stf
