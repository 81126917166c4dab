#pragma once

#include "stf/image.hpp"
#include "stf/types.hpp"

namespace stf {

/// Mean absolute difference. If grad is non-null it receives d(loss)/d(img)
/// (accumulated, caller zeroes).
double loss_l1(const ImageF& img, const ImageF& gt, ImageF* grad = nullptr);

/// 1 - SSIM with the standard 11x11 Gaussian window (sigma 1.5), zero-padded
/// 'same' convolutions, K1 = 0.01, K2 = 0.03 on unit dynamic range.
double loss_ssim(const ImageF& img, const ImageF& gt, ImageF* grad = nullptr);

double ssim(const ImageF& img, const ImageF& gt);

/// Mean |alpha - mask| over pixels.
double loss_mask(const ImageF& alpha, const ImageF& gt_mask, ImageF* grad = nullptr);

/// Hinge on the aspect-ratio-gamma quality of the base tets:
/// mean_k max(r - Q_k, 0). Gradients accumulate into d_positions.
double loss_quality(std::span<const Vec3> positions, std::span<const Tet> tets, double r,
                    std::span<Vec3> d_positions = {});

/// Sparsity penalty on inverted elements: mean_k max(-V_k, 0).
double loss_sv(std::span<const Vec3> positions, std::span<const Tet> tets,
               std::span<Vec3> d_positions = {});

double psnr(const ImageF& img, const ImageF& gt);

}  // namespace stf
