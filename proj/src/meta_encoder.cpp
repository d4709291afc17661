// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/meta_encoder.hpp"

#include <string>

#include "tst/errors.hpp"
#include "tst/manual_augment.hpp"

namespace tst {
namespace nn = torch::nn;

namespace {

torch::Tensor head_input(const torch::Tensor& bias, const torch::Tensor& magnitude) {
  auto m = magnitude.reshape({-1, 1}).to(bias.scalar_type());
  return torch::cat({bias.unsqueeze(0).expand({m.size(0), bias.size(0)}), m}, 1);
}

void check_magnitude(const torch::Tensor& magnitude) {
  if (!magnitude.defined() || magnitude.dim() > 1) {
    throw ShapeError("magnitude must be a scalar or (B,) tensor");
  }
}

}  // namespace

StnEncoderImpl::StnEncoderImpl(EncoderShape s) : shape(s) { reset(); }

void StnEncoderImpl::reset() {
  theta_e = register_parameter("theta_e", torch::randn({shape.bias_dim}) * 0.1);
  fc = register_module("fc", nn::Linear(shape.bias_dim + 1, 6));
  {
    torch::NoGradGuard guard;
    fc->weight.mul_(0.01);
    fc->bias.copy_(torch::tensor({1.0F, 0.0F, 0.0F, 0.0F, 1.0F, 0.0F}));
  }
  if (shape.hidden > 0) {
    hidden_in = register_module("hidden_in", nn::Linear(shape.bias_dim + 1, shape.hidden));
    hidden_out = register_module("hidden_out", nn::Linear(shape.hidden, 6));
    torch::NoGradGuard guard;
    // Hinge basis in m: kinks spread over [0, 1], alternating slope sign.
    hidden_in->weight.zero_();
    for (std::int64_t k = 0; k < shape.hidden; ++k) {
      const double slope = k % 2 == 0 ? 1.0 : -1.0;
      const double kink = (static_cast<double>(k) + 0.5) / static_cast<double>(shape.hidden);
      hidden_in->weight.index_put_({k, shape.bias_dim}, slope);
      hidden_in->bias.index_put_({k}, -slope * kink);
    }
    hidden_out->weight.zero_();
    hidden_out->bias.zero_();
  }
}

torch::Tensor StnEncoderImpl::matrix(const torch::Tensor& magnitude, const EncoderNoise* noise) {
  check_magnitude(magnitude);
  auto input = head_input(theta_e, magnitude);
  auto out = fc->forward(input);
  if (hidden_in) out = out + hidden_out->forward(torch::relu(hidden_in->forward(input)));
  if (noise != nullptr) {
    auto draws = torch::tensor(std::vector<double>(noise->affine.begin(), noise->affine.end()),
                               torch::kFloat64)
                     .to(out.scalar_type());
    out = out + noise->temperature * draws;
  }
  out = out.view({-1, 2, 3});
  return magnitude.dim() == 0 ? out.squeeze(0) : out;
}

torch::Tensor StnEncoderImpl::forward(const torch::Tensor& batch, const torch::Tensor& magnitude,
                                      const EncoderNoise* noise) {
  return affine_warp(batch, matrix(magnitude, noise));
}

ColorEncoderImpl::ColorEncoderImpl(EncoderShape s) : shape(s) { reset(); }

void ColorEncoderImpl::reset() {
  theta_ev = register_parameter("theta_ev", torch::randn({shape.bias_dim}) * 0.1);
  fc = register_module("fc", nn::Linear(shape.bias_dim + 1, 2));
  conv = register_module(
      "conv", nn::Conv2d(nn::Conv2dOptions(shape.channels, shape.channels, 3).padding(1)));
  torch::NoGradGuard guard;
  fc->weight.mul_(0.01);
  fc->bias.zero_();
  conv->weight.zero_();
  for (std::int64_t c = 0; c < shape.channels; ++c) conv->weight.index_put_({c, c, 1, 1}, 1.0);
  conv->bias.zero_();
  if (shape.hidden > 0) {
    branch_in = register_module("branch_in", nn::Linear(shape.channels + 1, shape.hidden));
    branch_out = register_module("branch_out", nn::Linear(shape.hidden, shape.channels));
    branch_out->weight.zero_();
    branch_out->bias.zero_();
  }
}

std::pair<torch::Tensor, torch::Tensor> ColorEncoderImpl::scale_shift(
    const torch::Tensor& magnitude, const EncoderNoise* noise) {
  check_magnitude(magnitude);
  auto out = fc->forward(head_input(theta_ev, magnitude));
  auto logit_scale = out.select(1, 0);
  auto logit_shift = out.select(1, 1);
  if (noise == nullptr) {
    return {0.5 + torch::sigmoid(logit_scale), torch::sigmoid(logit_shift) - 0.5};
  }
  auto p_scale =
      rbd_logit(logit_scale, torch::full_like(logit_scale, noise->scale), noise->temperature);
  auto p_shift =
      rbd_logit(logit_shift, torch::full_like(logit_shift, noise->shift), noise->temperature);
  return {0.5 + p_scale, p_shift - 0.5};
}

torch::Tensor ColorEncoderImpl::forward(const torch::Tensor& batch, const torch::Tensor& magnitude,
                                        const EncoderNoise* noise) {
  if (batch.dim() != 4 || batch.size(1) != shape.channels) {
    throw ShapeError("colour encoder expects (B," + std::to_string(shape.channels) + ",H,W)");
  }
  auto [scale, shift] = scale_shift(magnitude, noise);
  auto z = batch * scale.view({-1, 1, 1, 1}) + shift.view({-1, 1, 1, 1});
  auto out = conv->forward(z);
  if (branch_in) {
    auto m = magnitude.reshape({-1, 1, 1, 1})
                 .to(z.scalar_type())
                 .expand({z.size(0), 1, z.size(2), z.size(3)});
    // Per-pixel MLP over channels, run channel-last.
    auto pixels = torch::cat({z, m}, 1).permute({0, 2, 3, 1});
    out = out + branch_out->forward(torch::relu(branch_in->forward(pixels))).permute({0, 3, 1, 2});
  }
  return out;
}

MetaEncoderSetImpl::MetaEncoderSetImpl(EncoderShape s) : shape(s) { reset(); }

void MetaEncoderSetImpl::reset() {
  stn_.clear();
  color_.clear();
  for (SubPolicy p : kAllPolicies) {
    switch (category(p)) {
      case PolicyCategory::kAffineLearnable:
        stn_.push_back(register_module(std::string(tst::name(p)), StnEncoder(shape)));
        break;
      case PolicyCategory::kColorLearnable:
        color_.push_back(register_module(std::string(tst::name(p)), ColorEncoder(shape)));
        break;
      case PolicyCategory::kMagnitudeUnlearnable:
        break;
    }
  }
  if (frozen_) freeze();
}

StnEncoder& MetaEncoderSetImpl::stn(SubPolicy policy) {
  if (!is_affine(policy)) throw ContractError(std::string(tst::name(policy)) + " has no STN encoder");
  return stn_[static_cast<std::size_t>(index_of(policy))];
}

ColorEncoder& MetaEncoderSetImpl::color(SubPolicy policy) {
  if (category(policy) != PolicyCategory::kColorLearnable) {
    throw ContractError(std::string(tst::name(policy)) + " has no colour encoder");
  }
  return color_[static_cast<std::size_t>(index_of(policy) - kNumAffine)];
}

std::vector<torch::Tensor> MetaEncoderSetImpl::parameters_of(SubPolicy policy) {
  switch (category(policy)) {
    case PolicyCategory::kAffineLearnable:
      return stn(policy)->parameters();
    case PolicyCategory::kColorLearnable:
      return color(policy)->parameters();
    default:
      return {};
  }
}

torch::Tensor MetaEncoderSetImpl::apply(SubPolicy policy, const torch::Tensor& batch,
                                        const torch::Tensor& magnitude,
                                        const EncoderNoise* noise, Rng& rng) {
  if (has_magnitude(policy) != magnitude.defined()) {
    throw ContractError(std::string(tst::name(policy)) +
                        (has_magnitude(policy) ? " requires a magnitude"
                                               : " does not take a magnitude"));
  }
  switch (category(policy)) {
    case PolicyCategory::kAffineLearnable:
      return stn(policy)->forward(batch, magnitude, noise);
    case PolicyCategory::kColorLearnable:
      return color(policy)->forward(batch, magnitude, noise);
    default:
      return apply_manual(policy, batch, std::nullopt, rng);
  }
}

void MetaEncoderSetImpl::freeze() {
  frozen_ = true;
  for (auto& p : parameters()) p.set_requires_grad(false);
}

}  // namespace tst
