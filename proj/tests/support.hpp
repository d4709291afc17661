// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>

#include <torch/torch.h>

#include "tst/rng.hpp"

namespace tst::testing {

/// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const torch::Tensor& a, const torch::Tensor& b,
                             double floor = 1e-12) {
  auto x = a.detach().to(torch::kFloat64);
  auto y = b.detach().to(torch::kFloat64);
  const double denom =
      std::max({x.norm().item<double>(), y.norm().item<double>(), floor});
  return (x - y).norm().item<double>() / denom;
}

/// Uniform [0,1) images from the project generator.
inline torch::Tensor random_images(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w,
                                   std::uint64_t seed) {
  Rng rng(seed);
  auto out = torch::empty({b, c, h, w}, torch::kFloat32);
  auto* p = out.data_ptr<float>();
  for (std::int64_t i = 0; i < out.numel(); ++i) p[i] = static_cast<float>(rng.uniform());
  return out;
}

/// Low-frequency images: a 4x4 random grid upsampled bilinearly.
inline torch::Tensor smooth_images(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w,
                                   std::uint64_t seed) {
  auto coarse = random_images(b, c, 4, 4, seed);
  return torch::nn::functional::interpolate(
      coarse, torch::nn::functional::InterpolateFuncOptions()
                  .size(std::vector<std::int64_t>{h, w})
                  .mode(torch::kBilinear)
                  .align_corners(true));
}

}  // namespace tst::testing
