// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "tst/policy.hpp"
#include "tst/relaxed_sampling.hpp"
#include "tst/rng.hpp"

namespace tst {

struct EncoderShape {
  std::int64_t bias_dim = 16;  // length of theta_E
  /// Width of the zero-initialized residual head. 0 keeps only the single
  /// fully connected layer (and, for the Color Network, the single conv).
  std::int64_t hidden = 32;
  std::int64_t channels = 3;
};

/// Spatial transformer meta-encoder: A = reshape(FC([theta_E, m])) followed by
/// a bilinear warp. An optional residual MLP on [theta_E, m] lets A bend with
/// the magnitude (Rotate needs cos/sin of an angle that is affine in m).
class StnEncoderImpl : public torch::nn::Cloneable<StnEncoderImpl> {
 public:
  explicit StnEncoderImpl(EncoderShape shape = {});
  void reset() override;

  /// `magnitude` is a scalar tensor (returns (2,3)) or a (B,) tensor
  /// (returns (B,2,3)). With `noise`, temperature * Logistic draws are added
  /// to the six entries.
  torch::Tensor matrix(const torch::Tensor& magnitude, const EncoderNoise* noise = nullptr);
  torch::Tensor forward(const torch::Tensor& batch, const torch::Tensor& magnitude,
                        const EncoderNoise* noise = nullptr);

  EncoderShape shape;
  torch::Tensor theta_e;
  torch::nn::Linear fc{nullptr};
  torch::nn::Linear hidden_in{nullptr};
  torch::nn::Linear hidden_out{nullptr};
};
TORCH_MODULE(StnEncoder);

/// Color Network meta-encoder:
///   C(x * (0.5 + sigmoid(theta_scale)) + sigmoid(theta_shift) - 0.5)
/// where (theta_scale, theta_shift) = FC([theta_EV, m]) and C is a
/// channel-preserving 3x3 convolution, identity-initialized. An optional
/// zero-initialized pointwise branch W2 relu(W1 [z; m]) is added to C's output.
class ColorEncoderImpl : public torch::nn::Cloneable<ColorEncoderImpl> {
 public:
  explicit ColorEncoderImpl(EncoderShape shape = {});
  void reset() override;

  /// Returns (scale, shift) already mapped to (0.5, 1.5) and (-0.5, 0.5),
  /// each shaped like `magnitude` flattened to (n,).
  std::pair<torch::Tensor, torch::Tensor> scale_shift(const torch::Tensor& magnitude,
                                                      const EncoderNoise* noise = nullptr);
  torch::Tensor forward(const torch::Tensor& batch, const torch::Tensor& magnitude,
                        const EncoderNoise* noise = nullptr);

  EncoderShape shape;
  torch::Tensor theta_ev;
  torch::nn::Linear fc{nullptr};
  torch::nn::Conv2d conv{nullptr};
  torch::nn::Linear branch_in{nullptr};
  torch::nn::Linear branch_out{nullptr};
};
TORCH_MODULE(ColorEncoder);

/// The fourteen meta-encoders f_E. The eleven learnable policies own a
/// network; Equalize, Invert and Cutout dispatch to the manual transforms.
/// Submodules are registered under the policy names.
class MetaEncoderSetImpl : public torch::nn::Cloneable<MetaEncoderSetImpl> {
 public:
  explicit MetaEncoderSetImpl(EncoderShape shape = {});
  void reset() override;

  StnEncoder& stn(SubPolicy policy);
  ColorEncoder& color(SubPolicy policy);
  std::vector<torch::Tensor> parameters_of(SubPolicy policy);

  /// f_E(x, m). `magnitude` must be defined exactly for learnable policies.
  torch::Tensor apply(SubPolicy policy, const torch::Tensor& batch,
                      const torch::Tensor& magnitude, const EncoderNoise* noise, Rng& rng);

  /// Stops gradient flow into every bias parameter.
  void freeze();
  bool frozen() const { return frozen_; }

  EncoderShape shape;

 private:
  std::vector<StnEncoder> stn_;
  std::vector<ColorEncoder> color_;
  bool frozen_ = false;
};
TORCH_MODULE(MetaEncoderSet);

}  // namespace tst
