// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#include "tst/data_encoder.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <string>

#include "tst/errors.hpp"
#include "tst/manual_augment.hpp"

namespace tst {
namespace {

void check_selection(const PolicySelection& selection, EncodeMode expected) {
  if (selection.mode != expected) {
    throw ContractError("selection was drawn for " + std::string(name(selection.mode)) +
                        " mode, encoder called in " + std::string(name(expected)) + " mode");
  }
}

void check_sampled(const SampledParams& sampled) {
  if (!sampled.m.defined() || sampled.m.numel() != kNumLearnable || !sampled.p.defined() ||
      sampled.p.numel() != kNumPolicies) {
    throw ContractError("sampled parameters must hold 11 magnitudes and 14 probabilities");
  }
}

std::optional<EncoderNoise> noise_for(const SampledParams& sampled, SubPolicy policy,
                                      const EncodeOptions& options) {
  if (!options.diversity) return std::nullopt;
  return sampled.noise.encoder_noise(policy, sampled.temperature);
}

// Weighted residual sum over selection.policies[first, end) on `base`.
torch::Tensor residual_sum(const torch::Tensor& base, const SampledParams& sampled,
                           const PolicySelection& selection, std::size_t first,
                           MetaEncoderSet& encoders, const EncodeOptions& options) {
  Rng cutout_rng(sampled.noise.cutout_seed);
  auto out = base;
  for (std::size_t i = first; i < selection.policies.size(); ++i) {
    const SubPolicy policy = selection.policies[i];
    const auto noise = noise_for(sampled, policy, options);
    const torch::Tensor magnitude =
        has_magnitude(policy) ? sampled.magnitude(policy) : torch::Tensor();
    auto transformed =
        encoders->apply(policy, base, magnitude, noise ? &*noise : nullptr, cutout_rng);
    out = out + sampled.probability(policy).to(base.scalar_type()) * (transformed - base);
  }
  return out;
}

}  // namespace

std::string_view name(EncodeMode mode) {
  return mode == EncodeMode::kClassification ? "classification" : "detection";
}

EncodeMode encode_mode_from_name(std::string_view n) {
  if (n == "classification") return EncodeMode::kClassification;
  if (n == "detection") return EncodeMode::kDetection;
  throw ConfigError("unknown mode '" + std::string(n) + "' (expected classification|detection)");
}

PolicySelection make_selection(std::vector<SubPolicy> policies, EncodeMode mode) {
  std::array<bool, kNumPolicies> seen{};
  for (SubPolicy p : policies) {
    auto& flag = seen[static_cast<std::size_t>(index_of(p))];
    if (flag) throw ContractError("selection repeats " + std::string(name(p)));
    flag = true;
  }
  PolicySelection out;
  out.mode = mode;
  if (mode == EncodeMode::kDetection) {
    std::stable_partition(policies.begin(), policies.end(), is_affine);
    out.n_affine = static_cast<int>(std::count_if(policies.begin(), policies.end(), is_affine));
    out.n_other = static_cast<int>(policies.size()) - out.n_affine;
  }
  out.policies = std::move(policies);
  return out;
}

PolicySelection select_subpolicies(int n_augment, Rng& rng, EncodeMode mode) {
  if (n_augment < 1 || n_augment > kNumPolicies) {
    throw ConfigError("N_A must lie in [1, 14], got " + std::to_string(n_augment));
  }
  std::array<int, kNumPolicies> pool{};
  for (int i = 0; i < kNumPolicies; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::vector<SubPolicy> chosen;
  chosen.reserve(static_cast<std::size_t>(n_augment));
  for (int i = 0; i < n_augment; ++i) {
    const auto j = i + static_cast<int>(rng.below(kNumPolicies - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    chosen.push_back(policy_at(pool[static_cast<std::size_t>(i)]));
  }
  return make_selection(std::move(chosen), mode);
}

torch::Tensor encode_classification(const torch::Tensor& x, const SampledParams& sampled,
                                    const PolicySelection& selection, MetaEncoderSet& encoders,
                                    const EncodeOptions& options) {
  check_selection(selection, EncodeMode::kClassification);
  check_sampled(sampled);
  return residual_sum(x, sampled, selection, 0, encoders, options);
}

torch::Tensor combine_affine(const std::vector<torch::Tensor>& matrices,
                             const std::vector<torch::Tensor>& weights) {
  if (matrices.size() != weights.size()) {
    throw ContractError("combine_affine needs one weight per matrix");
  }
  const auto dtype = matrices.empty() ? torch::kFloat32 : matrices.front().scalar_type();
  const auto identity = torch::eye(2, 3, torch::TensorOptions().dtype(dtype));
  auto out = identity;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    if (matrices[i].sizes() != identity.sizes()) throw ShapeError("affine matrices must be 2x3");
    out = out + weights[i].to(dtype) * (matrices[i] - identity);
  }
  return out;
}

torch::Tensor encode_detection(const torch::Tensor& x, const SampledParams& sampled,
                               const PolicySelection& selection, MetaEncoderSet& encoders,
                               const EncodeOptions& options) {
  check_selection(selection, EncodeMode::kDetection);
  check_sampled(sampled);
  const auto n_affine = static_cast<std::size_t>(selection.n_affine);
  std::vector<torch::Tensor> matrices, weights;
  for (std::size_t i = 0; i < n_affine; ++i) {
    const SubPolicy policy = selection.policies[i];
    const auto noise = noise_for(sampled, policy, options);
    matrices.push_back(encoders->stn(policy)->matrix(sampled.magnitude(policy),
                                                     noise ? &*noise : nullptr));
    weights.push_back(sampled.probability(policy));
  }
  auto warped = affine_warp(x, combine_affine(matrices, weights).to(x.scalar_type()));
  return residual_sum(warped, sampled, selection, n_affine, encoders, options);
}

torch::Tensor encode(const torch::Tensor& x, const SampledParams& sampled,
                     const PolicySelection& selection, MetaEncoderSet& encoders,
                     const EncodeOptions& options) {
  return selection.mode == EncodeMode::kClassification
             ? encode_classification(x, sampled, selection, encoders, options)
             : encode_detection(x, sampled, selection, encoders, options);
}

}  // namespace tst
