// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>

#include <torch/torch.h>

#include "tst/policy.hpp"
#include "tst/rng.hpp"

namespace tst {

/// Affine map from a normalized magnitude m in [0,1] to a policy's native
/// parameter. Signed transforms are centred so m = 0.5 is the identity.
struct MagnitudeRange {
  double low = 0.0;
  double high = 0.0;
  double at(double m) const { return low + (high - low) * m; }
};

/// Native range per learnable policy:
///   Shear{X,Y}       shear coefficient      -0.3 .. 0.3
///   Translate{X,Y}   fraction of the side   -0.3 .. 0.3
///   Rotate           degrees                -30  .. 30
///   Posterize        kept bits               8   .. 4
///   Solarize         threshold               1.0 .. 0.0
///   Brightness, Color, Contrast, Sharpness   enhancement factor 0.1 .. 1.9
/// Throws ContractError for the unlearnable policies.
MagnitudeRange magnitude_range(SubPolicy policy);

/// Side length of the Cutout square for an image of the given size.
std::int64_t cutout_side(std::int64_t height, std::int64_t width);
inline constexpr double kCutoutFill = 0.5;

/// Integer bit depth Posterize keeps at magnitude m.
int posterize_bits(double magnitude);

/// 2x3 output-to-input sampling matrix in normalized [-1, 1] coordinates
/// (the convention of affine_grid) implementing an affine policy.
torch::Tensor manual_affine_matrix(SubPolicy policy, double magnitude, std::int64_t height,
                                   std::int64_t width,
                                   torch::Dtype dtype = torch::kFloat32);

/// Bilinear warp with zero padding. `matrix` is either (2,3), shared by the
/// whole batch, or (B,2,3). Differentiable in both arguments.
torch::Tensor affine_warp(const torch::Tensor& batch, const torch::Tensor& matrix);

// Process-wide count of affine_warp calls; lets callers verify how many resamplings ran.
std::uint64_t affine_warp_calls();

/// Reference implementation of one sub-policy on a (B,C,H,W) batch in [0,1].
/// `magnitude` must be present exactly for the eleven learnable policies.
/// Only Cutout consumes `rng` (one random centre per image).
torch::Tensor apply_manual(SubPolicy policy, const torch::Tensor& batch,
                           std::optional<double> magnitude, Rng& rng);

}  // namespace tst
