#pragma once

#include <string>

#include "stf/trainer.hpp"

namespace stf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: magic "STFD", version, config snapshot, base mesh
/// (f64), optimized vertex positions (f64), map parameters (f32, fixed
/// tensor order per block), SH (f32), subdivision forest (preorder bitstream
/// with raw controls and attributes, f32), and optionally the optimizer
/// moments. save(load(x)) is byte-identical to save(x).
void save_checkpoint(const std::string& path, const TrainState& state,
                     bool include_optimizer = true);
TrainState load_checkpoint(const std::string& path);

}  // namespace stf
