// Copyright 2026 The TST Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "tst/meta_encoder.hpp"
#include "tst/policy.hpp"
#include "tst/relaxed_sampling.hpp"
#include "tst/rng.hpp"

namespace tst {

enum class EncodeMode { kClassification, kDetection };

std::string_view name(EncodeMode mode);
EncodeMode encode_mode_from_name(std::string_view name);

inline constexpr int kDefaultNumAugment = 4;

/// The N_A distinct sub-policies applied to one batch. In detection mode the
/// affine policies come first and `n_affine + n_other == policies.size()`.
struct PolicySelection {
  std::vector<SubPolicy> policies;
  EncodeMode mode = EncodeMode::kClassification;
  int n_affine = 0;
  int n_other = 0;
};

/// Uniform draw of `n_augment` policies without replacement.
/// Throws ConfigError unless 1 <= n_augment <= 14.
PolicySelection select_subpolicies(int n_augment, Rng& rng,
                                   EncodeMode mode = EncodeMode::kClassification);

/// Builds a selection from explicit policies (validated distinct; reordered
/// for detection mode).
PolicySelection make_selection(std::vector<SubPolicy> policies, EncodeMode mode);

struct EncodeOptions {
  /// Inject the per-encoder diversity noise recorded in SampledParams.
  bool diversity = false;
};

/// x + sum_i p_i * (f_E(x, m_i) - x). No clamping.
torch::Tensor encode_classification(const torch::Tensor& x, const SampledParams& sampled,
                                    const PolicySelection& selection, MetaEncoderSet& encoders,
                                    const EncodeOptions& options = {});

/// I + sum_i w_i * (A_i - I) for 2x3 matrices; w_i are scalar tensors.
torch::Tensor combine_affine(const std::vector<torch::Tensor>& matrices,
                             const std::vector<torch::Tensor>& weights);

/// Detection mode: one warp by the combined affine matrix of the selected STN
/// encoders, then the remaining policies as weighted residuals on the warped
/// image.
torch::Tensor encode_detection(const torch::Tensor& x, const SampledParams& sampled,
                               const PolicySelection& selection, MetaEncoderSet& encoders,
                               const EncodeOptions& options = {});

/// Dispatches on `selection.mode`.
torch::Tensor encode(const torch::Tensor& x, const SampledParams& sampled,
                     const PolicySelection& selection, MetaEncoderSet& encoders,
                     const EncodeOptions& options = {});

}  // namespace tst
