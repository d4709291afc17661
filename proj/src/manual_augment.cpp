// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/manual_augment.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include "tst/errors.hpp"

namespace tst {
namespace F = torch::nn::functional;
namespace {

std::atomic<std::uint64_t> g_warp_calls{0};

void check_batch(const torch::Tensor& batch) {
  if (!batch.defined() || batch.dim() != 4) {
    throw ShapeError("expected a (batch, channel, height, width) tensor, got " +
                     std::to_string(batch.defined() ? batch.dim() : 0) + " dims");
  }
}

torch::Tensor luminance(const torch::Tensor& x) {
  if (x.size(1) == 1) return x;
  if (x.size(1) != 3) {
    throw ShapeError("colour policies need 1 or 3 channels, got " + std::to_string(x.size(1)));
  }
  return x.select(1, 0).unsqueeze(1) * 0.299 + x.select(1, 1).unsqueeze(1) * 0.587 +
         x.select(1, 2).unsqueeze(1) * 0.114;
}

torch::Tensor blend(const torch::Tensor& degenerate, const torch::Tensor& x, double factor) {
  return (degenerate + factor * (x - degenerate)).clamp(0.0, 1.0);
}

// 3x3 smoothing kernel [[1,1,1],[1,5,1],[1,1,1]] / 13; the one-pixel border
// keeps the original values.
torch::Tensor smooth(const torch::Tensor& x) {
  const auto c = x.size(1);
  auto kernel = torch::ones({3, 3}, x.options());
  kernel.index_put_({1, 1}, 5.0);
  kernel = (kernel / 13.0).view({1, 1, 3, 3}).repeat({c, 1, 1, 1});
  auto blurred = F::conv2d(x, kernel, F::Conv2dFuncOptions().padding(1).groups(c));
  if (x.size(2) < 3 || x.size(3) < 3) return x.clone();
  auto out = x.clone();
  using torch::indexing::Slice;
  out.index_put_({Slice(), Slice(), Slice(1, -1), Slice(1, -1)},
                 blurred.index({Slice(), Slice(), Slice(1, -1), Slice(1, -1)}));
  return out;
}

torch::Tensor quantize(const torch::Tensor& x) {
  return (x * 255.0).round().clamp(0.0, 255.0).to(torch::kInt64);
}

torch::Tensor posterize(const torch::Tensor& x, int bits) {
  const std::int64_t mask = (0xFF << (8 - bits)) & 0xFF;
  return torch::bitwise_and(quantize(x), mask).to(x.scalar_type()) / 255.0;
}

torch::Tensor equalize(const torch::Tensor& x) {
  auto q = quantize(x).contiguous();
  auto out = x.detach().clone().contiguous().to(torch::kFloat64);
  const auto batch = x.size(0), channels = x.size(1), pixels = x.size(2) * x.size(3);
  auto qv = q.view({batch, channels, pixels});
  auto ov = out.view({batch, channels, pixels});
  auto qa = qv.accessor<std::int64_t, 3>();
  auto oa = ov.accessor<double, 3>();
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      std::array<std::int64_t, 256> hist{};
      for (std::int64_t i = 0; i < pixels; ++i) ++hist[static_cast<std::size_t>(qa[b][c][i])];
      std::int64_t total = 0, last = 0, nonzero = 0;
      for (auto h : hist) {
        if (h == 0) continue;
        total += h;
        last = h;
        ++nonzero;
      }
      if (nonzero <= 1) continue;
      const std::int64_t step = (total - last) / 255;
      if (step == 0) continue;
      std::array<double, 256> lut{};
      std::int64_t n = step / 2;
      for (std::size_t i = 0; i < 256; ++i) {
        lut[i] = static_cast<double>(std::min<std::int64_t>(n / step, 255));
        n += hist[i];
      }
      for (std::int64_t i = 0; i < pixels; ++i) {
        oa[b][c][i] = lut[static_cast<std::size_t>(qa[b][c][i])] / 255.0;
      }
    }
  }
  return out.to(x.scalar_type());
}

torch::Tensor cutout(const torch::Tensor& x, Rng& rng) {
  const auto batch = x.size(0), h = x.size(2), w = x.size(3);
  const auto side = cutout_side(h, w);
  auto mask = torch::zeros({batch, 1, h, w}, x.options());
  using torch::indexing::Slice;
  for (std::int64_t b = 0; b < batch; ++b) {
    const auto cy = rng.below(h);
    const auto cx = rng.below(w);
    const auto y0 = std::max<std::int64_t>(0, cy - side / 2);
    const auto x0 = std::max<std::int64_t>(0, cx - side / 2);
    const auto y1 = std::min<std::int64_t>(h, cy - side / 2 + side);
    const auto x1 = std::min<std::int64_t>(w, cx - side / 2 + side);
    mask.index_put_({b, 0, Slice(y0, y1), Slice(x0, x1)}, 1.0);
  }
  return x * (1.0 - mask) + kCutoutFill * mask;
}

}  // namespace

MagnitudeRange magnitude_range(SubPolicy policy) {
  switch (policy) {
    case SubPolicy::kShearX:
    case SubPolicy::kShearY:
    case SubPolicy::kTranslateX:
    case SubPolicy::kTranslateY:
      return {-0.3, 0.3};
    case SubPolicy::kRotate:
      return {-30.0, 30.0};
    case SubPolicy::kPosterize:
      return {8.0, 4.0};
    case SubPolicy::kSolarize:
      return {1.0, 0.0};
    case SubPolicy::kBrightness:
    case SubPolicy::kColor:
    case SubPolicy::kContrast:
    case SubPolicy::kSharpness:
      return {0.1, 1.9};
    default:
      throw ContractError(std::string(name(policy)) + " has no magnitude");
  }
}

std::int64_t cutout_side(std::int64_t height, std::int64_t width) {
  return static_cast<std::int64_t>(std::ceil(0.25 * static_cast<double>(std::min(height, width))));
}

int posterize_bits(double magnitude) {
  return static_cast<int>(std::lround(magnitude_range(SubPolicy::kPosterize).at(magnitude)));
}

torch::Tensor manual_affine_matrix(SubPolicy policy, double magnitude, std::int64_t height,
                                   std::int64_t width, torch::Dtype dtype) {
  if (!is_affine(policy)) {
    throw ContractError(std::string(name(policy)) + " is not an affine policy");
  }
  const double v = magnitude_range(policy).at(magnitude);
  const double h_over_w = static_cast<double>(height) / static_cast<double>(width);
  std::array<double, 6> a = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  switch (policy) {
    case SubPolicy::kShearX:
      a[1] = v * h_over_w;
      break;
    case SubPolicy::kShearY:
      a[3] = v / h_over_w;
      break;
    case SubPolicy::kTranslateX:
      a[2] = -2.0 * v;
      break;
    case SubPolicy::kTranslateY:
      a[5] = -2.0 * v;
      break;
    case SubPolicy::kRotate: {
      const double rad = v * std::numbers::pi / 180.0;
      a = {std::cos(rad), -std::sin(rad) * h_over_w, 0.0,
           std::sin(rad) / h_over_w, std::cos(rad), 0.0};
      break;
    }
    default:
      break;
  }
  return torch::tensor(std::vector<double>(a.begin(), a.end()), torch::kFloat64)
      .view({2, 3})
      .to(dtype);
}

std::uint64_t affine_warp_calls() { return g_warp_calls.load(); }

torch::Tensor affine_warp(const torch::Tensor& batch, const torch::Tensor& matrix) {
  check_batch(batch);
  ++g_warp_calls;
  auto theta = matrix;
  if (theta.dim() == 2) theta = theta.unsqueeze(0).expand({batch.size(0), 2, 3});
  if (theta.dim() != 3 || theta.size(0) != batch.size(0) || theta.size(1) != 2 ||
      theta.size(2) != 3) {
    throw ShapeError("affine matrix must be (2,3) or (B,2,3)");
  }
  theta = theta.to(batch.scalar_type());
  auto grid = F::affine_grid(theta, batch.sizes(), /*align_corners=*/false);
  return F::grid_sample(batch, grid,
                        F::GridSampleFuncOptions()
                            .mode(torch::kBilinear)
                            .padding_mode(torch::kZeros)
                            .align_corners(false));
}

torch::Tensor apply_manual(SubPolicy policy, const torch::Tensor& batch,
                           std::optional<double> magnitude, Rng& rng) {
  check_batch(batch);
  if (has_magnitude(policy) && !magnitude) {
    throw ContractError(std::string(name(policy)) + " requires a magnitude");
  }
  if (!has_magnitude(policy) && magnitude) {
    throw ContractError(std::string(name(policy)) + " does not take a magnitude");
  }
  if (magnitude && !(*magnitude >= 0.0 && *magnitude <= 1.0)) {
    throw DomainError("magnitude must lie in [0, 1], got " + std::to_string(*magnitude));
  }
  const double m = magnitude.value_or(0.0);

  switch (category(policy)) {
    case PolicyCategory::kAffineLearnable:
      return affine_warp(batch, manual_affine_matrix(policy, m, batch.size(2), batch.size(3),
                                                     batch.scalar_type()))
          .clamp(0.0, 1.0);
    case PolicyCategory::kColorLearnable:
      break;
    case PolicyCategory::kMagnitudeUnlearnable:
      switch (policy) {
        case SubPolicy::kEqualize:
          return equalize(batch);
        case SubPolicy::kInvert:
          return 1.0 - batch;
        default:
          return cutout(batch, rng);
      }
  }

  const double factor = magnitude_range(policy).at(m);
  switch (policy) {
    case SubPolicy::kPosterize:
      return posterize(batch, posterize_bits(m));
    case SubPolicy::kSolarize:
      return torch::where(batch > factor, 1.0 - batch, batch);
    case SubPolicy::kBrightness:
      return (batch * factor).clamp(0.0, 1.0);
    case SubPolicy::kColor:
      return blend(luminance(batch).expand_as(batch), batch, factor);
    case SubPolicy::kContrast: {
      auto mean = luminance(batch).mean({1, 2, 3}, /*keepdim=*/true);
      return blend(mean.expand_as(batch), batch, factor);
    }
    default:
      return blend(smooth(batch), batch, factor);
  }
}

}  // namespace tst
