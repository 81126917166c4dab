#include "stf/adam.hpp"

#include <algorithm>
#include <cmath>

namespace stf {

void adam_step_dense(std::span<double> params, std::span<const double> grads, AdamState& state,
                     const AdamHyperparams& hp, double lr) {
    state.ensure_size(params.size());
    ++state.step;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        if (g == 0.0) continue;
        double m = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        double v = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        state.m[i] = static_cast<float>(m);
        state.v[i] = static_cast<float>(v);
        params[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + hp.eps);
    }
}

void adam_step_sparse(std::span<double> params,
                      std::vector<std::pair<std::uint32_t, double>>& pairs, AdamState& state,
                      const AdamHyperparams& hp, double lr) {
    state.ensure_size(params.size());
    ++state.step;
    if (pairs.empty()) return;
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    std::size_t i = 0;
    while (i < pairs.size()) {
        const std::uint32_t idx = pairs[i].first;
        double g = 0.0;
        while (i < pairs.size() && pairs[i].first == idx) g += pairs[i++].second;
        if (g == 0.0) continue;
        double m = hp.beta1 * state.m[idx] + (1.0 - hp.beta1) * g;
        double v = hp.beta2 * state.v[idx] + (1.0 - hp.beta2) * g * g;
        state.m[idx] = static_cast<float>(m);
        state.v[idx] = static_cast<float>(v);
        params[idx] -= lr * (m / bc1) / (std::sqrt(v / bc2) + hp.eps);
    }
}

}  // namespace stf
